//! Binary proper scoring rules.
//!
//! The Beta family is defined through
//! `S(t,1) = -int_t^1 c^(a-1) (1-c)^b dc` and `S(t,0) = -int_0^t c^a (1-c)^(b-1) dc`
//! for `a, b > -1`. Log, quadratic and boosting scores are the members
//! `(0,0)`, `(1,1)` and `(-1/2,-1/2)`; the zero-one score is the `a = b -> inf`
//! limit and is only available through value evaluation.
//!
//! Values always follow the integral normalization above. Textbook closed
//! forms differ by a positive factor for two of the named rules:
//!
//! | rule      | integral convention            | textbook form               | factor |
//! |-----------|--------------------------------|-----------------------------|--------|
//! | log       | `ln t`, `ln(1-t)`              | same                        | 1      |
//! | quadratic | `-(1-t)^2/2`, `-t^2/2`         | `-(1-t)^2`, `-t^2`          | 2      |
//! | boosting  | `-2 sqrt((1-t)/t)`, `-2 sqrt(t/(1-t))` | `-sqrt((1-t)/t)`, ... | 1/2  |
//!
//! so `G(1/2)` is `-ln 2`, `-1/8` and `-2` here versus `-ln 2`, `-1/4` and `-1`
//! for the textbook forms. A positive rescaling of the score leaves every
//! argmin/argmax of the GAN objective unchanged.

use alloc::format;
use core::fmt;
use core::str::FromStr;

use crate::math;
use crate::{Error, Result};

/// Forecasts are clamped to `[T_CLAMP, 1 - T_CLAMP]` before scoring inside the trainer.
pub const T_CLAMP: f64 = 1e-12;

const QUAD_TOL: f64 = 1e-11;
const QUAD_MAX_DEPTH: u32 = 40;
const QUAD_ACCEPT: f64 = 1e-9;
const QUAD_MAX_INTERVALS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ScoringRule {
    Beta { alpha: f64, beta: f64 },
    Log,
    Quadratic,
    Boosting,
    ZeroOne,
}

/// Values and t-derivatives of `S(t,1)` and `S(t,0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreEval {
    pub s1: f64,
    pub s0: f64,
    pub ds1: f64,
    pub ds0: f64,
}

/// Condition on the Savage function at 1/2 used by the robustness theory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Condition1 {
    /// `2 G''(1/2) - G'''(1/2)`.
    pub margin: f64,
    /// `|alpha - beta| < 1`.
    pub satisfiable: bool,
}

#[inline]
pub fn clamp_t(t: f64) -> f64 {
    t.clamp(T_CLAMP, 1.0 - T_CLAMP)
}

impl ScoringRule {
    pub fn beta(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > -1.0 && beta > -1.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::Domain(format!(
                "Beta score needs alpha, beta > -1 (got {alpha}, {beta})"
            )));
        }
        Ok(Self::Beta { alpha, beta })
    }

    /// `(alpha, beta)` of the rule; `None` for zero-one.
    pub fn shape(&self) -> Option<(f64, f64)> {
        match *self {
            Self::Beta { alpha, beta } => Some((alpha, beta)),
            Self::Log => Some((0.0, 0.0)),
            Self::Quadratic => Some((1.0, 1.0)),
            Self::Boosting => Some((-0.5, -0.5)),
            Self::ZeroOne => None,
        }
    }

    pub fn is_smooth(&self) -> bool {
        self.shape().is_some()
    }

    fn smooth_shape(&self) -> Result<(f64, f64)> {
        self.shape()
            .ok_or_else(|| Error::Domain("zero-one score is value-only".into()))
    }

    /// `(dS(t,1)/dt, dS(t,0)/dt)` with no argument checks. Training hot path.
    #[inline]
    pub fn derivatives_unchecked(&self, t: f64) -> (f64, f64) {
        match *self {
            Self::Log => (1.0 / t, -1.0 / (1.0 - t)),
            Self::Quadratic => (1.0 - t, -t),
            _ => {
                let (a, b) = self.shape().unwrap_or((0.0, 0.0));
                let u = 1.0 - t;
                (
                    math::powf(t, a - 1.0) * math::powf(u, b),
                    -math::powf(t, a) * math::powf(u, b - 1.0),
                )
            }
        }
    }

    /// Full evaluation at `t` in (0, 1).
    pub fn eval(&self, t: f64) -> Result<ScoreEval> {
        let (alpha, beta) = self.smooth_shape()?;
        check_open_unit(t)?;
        let (ds1, ds0) = self.derivatives_unchecked(t);
        let (s1, s0) = smooth_values(alpha, beta, t)?;
        Ok(ScoreEval { s1, s0, ds1, ds0 })
    }

    /// `(S(t,1), S(t,0))`, including the zero-one rule.
    pub fn values(&self, t: f64) -> Result<(f64, f64)> {
        match self.shape() {
            None => Ok(score_value_zero_one(t)),
            Some((a, b)) => {
                check_open_unit(t)?;
                smooth_values(a, b, t)
            }
        }
    }

    /// Savage convex function `G(t) = t S(t,1) + (1-t) S(t,0)`.
    pub fn savage_g(&self, t: f64) -> Result<f64> {
        let e = self.eval(t)?;
        Ok(t * e.s1 + (1.0 - t) * e.s0)
    }

    /// From `G''(t) = t^(a-1) (1-t)^(b-1)`: `G''(1/2) = 2^(2-a-b)`,
    /// `G'''(1/2) = 2 (a - b) G''(1/2)`.
    pub fn condition1(&self) -> Result<Condition1> {
        let (a, b) = self.smooth_shape()?;
        let g2 = math::powf(2.0, 2.0 - a - b);
        let g3 = 2.0 * (a - b) * g2;
        Ok(Condition1 {
            margin: 2.0 * g2 - g3,
            satisfiable: (a - b).abs() < 1.0,
        })
    }
}

/// Free-function form of [`ScoringRule::eval`].
pub fn score(rule: &ScoringRule, t: f64) -> Result<ScoreEval> {
    rule.eval(t)
}

/// Zero-one score with the tie `t = 1/2` credited to event 1.
pub fn score_value_zero_one(t: f64) -> (f64, f64) {
    if t >= 0.5 {
        (2.0, 0.0)
    } else {
        (0.0, 2.0)
    }
}

pub fn savage_g(rule: &ScoringRule, t: f64) -> Result<f64> {
    rule.savage_g(t)
}

pub fn condition1_margin(rule: &ScoringRule) -> Result<Condition1> {
    rule.condition1()
}

fn check_open_unit(t: f64) -> Result<()> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("score argument t = {t} outside (0, 1)")))
    }
}

fn smooth_values(a: f64, b: f64, t: f64) -> Result<(f64, f64)> {
    let u = 1.0 - t;
    if a == 0.0 && b == 0.0 {
        return Ok((math::ln(t), math::ln_1p(-t)));
    }
    if a == 1.0 && b == 1.0 {
        return Ok((-0.5 * u * u, -0.5 * t * t));
    }
    if a == -0.5 && b == -0.5 {
        return Ok((-2.0 * math::sqrt(u / t), -2.0 * math::sqrt(t / u)));
    }
    let i1 = match (a > 0.0).then(|| lower_beta(b + 1.0, a, u)).transpose()? {
        Some(Some(v)) => v,
        _ => tail_by_quadrature(b, a, u)?,
    };
    let i0 = match (b > 0.0).then(|| lower_beta(a + 1.0, b, t)).transpose()? {
        Some(Some(v)) => v,
        _ => tail_by_quadrature(a, b, t)?,
    };
    Ok((-i1, -i0))
}

/// `int_0^x s^a (1-s)^(b-1) ds` by quadrature. Below `1/2` the substitution
/// `s = r^(1/(a+1))` flattens the endpoint singularity at 0; above it
/// `1 - s = e^y` spreads the steep rise toward 1 evenly.
fn tail_by_quadrature(a: f64, b: f64, x: f64) -> Result<f64> {
    let k = 1.0 / (a + 1.0);
    let mid = x.min(0.5);
    let lower = integrate(|r| math::powf(1.0 - math::powf(r, k), b - 1.0), 0.0, math::powf(mid, a + 1.0))? * k;
    if x <= 0.5 {
        return Ok(lower);
    }
    let upper = integrate(|y| math::powf(-math::expm1(y), a) * math::exp(b * y), math::ln_1p(-x), -core::f64::consts::LN_2)?;
    Ok(lower + upper)
}

const BETACF_MAX_ITER: usize = 300;

/// Complements smaller than this fraction of the complete beta function lose
/// too many digits to cancellation and are left to quadrature.
const CF_CANCELLATION_LIMIT: f64 = 1e-4;

/// Unregularized lower incomplete beta `int_0^x s^(a-1) (1-s)^(b-1) ds`,
/// `a, b > 0`, via the Lentz continued fraction. `None` when the value would
/// come from a badly cancelling complement.
pub(crate) fn lower_beta(a: f64, b: f64, x: f64) -> Result<Option<f64>> {
    if x <= 0.0 {
        return Ok(Some(0.0));
    }
    let full = math::exp(math::lgamma(a) + math::lgamma(b) - math::lgamma(a + b));
    if x >= 1.0 {
        return Ok(Some(full));
    }
    if x < (a + 1.0) / (a + b + 2.0) {
        return beta_cf_term(a, b, x).map(Some);
    }
    let v = full - beta_cf_term(b, a, 1.0 - x)?;
    Ok((v > CF_CANCELLATION_LIMIT * full).then_some(v))
}

fn beta_cf_term(a: f64, b: f64, x: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    let front = math::exp(a * math::ln(x) + b * math::ln_1p(-x)) / a;
    let mut c = 1.0;
    let mut d = 1.0 - (a + b) * x / (a + 1.0);
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=BETACF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let even = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
        for coef in [even, -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0))] {
            d = 1.0 + coef * d;
            if d.abs() < TINY {
                d = TINY;
            }
            c = 1.0 + coef / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            h *= d * c;
        }
        if (d * c - 1.0).abs() < 1e-15 {
            return Ok(front * h);
        }
    }
    Err(Error::NotConverged {
        what: format!("incomplete beta continued fraction at x = {x}"),
        iterations: BETACF_MAX_ITER,
        residual: f64::NAN,
    })
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss-Kronrod (7/15) quadrature. Intervals are bisected until
/// their error estimate meets their share of the tolerance (relative to the
/// first whole-interval estimate when that exceeds 1), reaches rounding level,
/// or the depth or interval budget runs out. The summed error estimate must
/// then stay below `QUAD_ACCEPT * max(1, |value|)`.
pub(crate) fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    struct Ctx<'a, F> {
        f: &'a F,
        budget: usize,
    }
    fn rec<F: Fn(f64) -> f64>(ctx: &mut Ctx<'_, F>, a: f64, b: f64, whole: (f64, f64), tol: f64, depth: u32) -> (f64, f64) {
        let (val, err) = whole;
        if err <= tol || err <= 1e-15 * val.abs() || depth == 0 || ctx.budget == 0 || (b - a).abs() < 1e-15 {
            return (val, err);
        }
        ctx.budget -= 1;
        let m = 0.5 * (a + b);
        let left = gk15(ctx.f, a, m);
        let right = gk15(ctx.f, m, b);
        let (lv, le) = rec(ctx, a, m, left, 0.5 * tol, depth - 1);
        let (rv, re) = rec(ctx, m, b, right, 0.5 * tol, depth - 1);
        (lv + rv, le + re)
    }
    let whole = gk15(&f, a, b);
    let tol = QUAD_TOL * whole.0.abs().max(1.0);
    let mut ctx = Ctx { f: &f, budget: QUAD_MAX_INTERVALS };
    let (v, err) = rec(&mut ctx, a, b, whole, tol, QUAD_MAX_DEPTH);
    if !v.is_finite() {
        return Err(Error::Domain(format!("quadrature on [{a}, {b}] produced {v}")));
    }
    if err > QUAD_ACCEPT * v.abs().max(1.0) {
        return Err(Error::NotConverged {
            what: format!("quadrature on [{a}, {b}]"),
            iterations: QUAD_MAX_INTERVALS - ctx.budget,
            residual: err,
        });
    }
    Ok(v)
}

impl fmt::Display for ScoringRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Beta { alpha, beta } => write!(f, "beta({alpha},{beta})"),
            Self::Log => f.write_str("log"),
            Self::Quadratic => f.write_str("quadratic"),
            Self::Boosting => f.write_str("boosting"),
            Self::ZeroOne => f.write_str("zero_one"),
        }
    }
}

impl FromStr for ScoringRule {
    type Err = Error;

    /// Accepts `log`/`js`, `quadratic`/`ls`, `boosting`, `zero_one`/`tv`, `beta(a,b)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.to_ascii_lowercase().as_str() {
            "log" | "js" => return Ok(Self::Log),
            "quadratic" | "ls" => return Ok(Self::Quadratic),
            "boosting" => return Ok(Self::Boosting),
            "zero_one" | "tv" => return Ok(Self::ZeroOne),
            _ => {}
        }
        let bad = || Error::InvalidConfig(format!("unknown scoring rule {s:?}"));
        let inner = s
            .strip_prefix("beta(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(bad)?;
        let (a, b) = inner.split_once(',').ok_or_else(bad)?;
        let parse = |x: &str| x.trim().parse::<f64>().map_err(|_| bad());
        Self::beta(parse(a)?, parse(b)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn log_at_half() {
        let e = score(&ScoringRule::Log, 0.5).unwrap();
        assert!(close(e.s1, -core::f64::consts::LN_2, 1e-15));
        assert!(close(e.s0, -core::f64::consts::LN_2, 1e-15));
        assert_eq!((e.ds1, e.ds0), (2.0, -2.0));
    }

    #[test]
    fn continued_fraction_matches_quadrature() {
        for &(a, b) in &[(1.0, 0.5), (4.0, 4.0), (0.3, 2.5), (2.0, 0.1), (7.5, 0.9)] {
            for &t in &[1e-3, 0.2, 0.5, 0.77, 0.99] {
                let u = 1.0 - t;
                let q1 = tail_by_quadrature(b, a, u).unwrap();
                let q0 = tail_by_quadrature(a, b, t).unwrap();
                let c1 = lower_beta(b + 1.0, a, u).unwrap().unwrap();
                let c0 = lower_beta(a + 1.0, b, t).unwrap().unwrap();
                assert!(close(q1, c1, 1e-10 * q1.abs().max(1.0)), "{a} {b} {t}: {q1} {c1}");
                assert!(close(q0, c0, 1e-10 * q0.abs().max(1.0)), "{a} {b} {t}: {q0} {c0}");
            }
        }
    }

    #[test]
    fn quadrature_handles_steep_edges() {
        let r = ScoringRule::beta(-0.8963, -0.8617).unwrap();
        for t in [1e-4, 1e-3, 0.5, 0.999, 0.9999] {
            let (s1, s0) = r.values(t).unwrap();
            assert!(s1.is_finite() && s0.is_finite(), "{t}");
        }
        // Both pieces of the split against the continued fraction.
        let q = tail_by_quadrature(2.0, 0.5, 0.95).unwrap();
        let c = lower_beta(3.0, 0.5, 0.95).unwrap().unwrap();
        assert!(close(q, c, 1e-10), "{q} {c}");
    }

    #[test]
    fn quadratic_derivatives() {
        let rule = ScoringRule::beta(1.0, 1.0).unwrap();
        let e = rule.eval(0.3).unwrap();
        assert!(close(e.ds1, 0.7, 1e-15) && close(e.ds0, -0.3, 1e-15));
    }

    #[test]
    fn beta_half_one_matches_simpson() {
        // Simpson on 1e6 panels of -int_{0.4}^1 c^{-1/2}(1-c) dc.
        let n = 1_000_000usize;
        let (a, b) = (0.4f64, 1.0f64);
        let h = (b - a) / n as f64;
        let f = |c: f64| c.powf(-0.5) * (1.0 - c);
        let mut sum = f(a) + f(b);
        for i in 1..n {
            sum += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
        }
        let oracle = -sum * h / 3.0;
        let e = ScoringRule::beta(0.5, 1.0).unwrap().eval(0.4).unwrap();
        assert!(close(e.s1, oracle, 1e-8), "{} vs {}", e.s1, oracle);
    }

    #[test]
    fn general_beta_matches_closed_forms() {
        // Tiny perturbations away from the named members go through quadrature.
        for (a, b, rule) in [
            (0.0, 0.0, ScoringRule::Log),
            (1.0, 1.0, ScoringRule::Quadratic),
            (-0.5, -0.5, ScoringRule::Boosting),
        ] {
            for &t in &[0.05, 0.3, 0.5, 0.8, 0.97] {
                let exact = rule.values(t).unwrap();
                let quad = smooth_values(a + 1e-13, b - 1e-13, t).unwrap();
                assert!(close(exact.0, quad.0, 1e-9), "{rule} t={t}");
                assert!(close(exact.1, quad.1, 1e-9), "{rule} t={t}");
            }
        }
    }

    #[test]
    fn zero_one_values() {
        assert_eq!(score_value_zero_one(0.7), (2.0, 0.0));
        assert_eq!(score_value_zero_one(0.5), (2.0, 0.0));
        assert_eq!(score_value_zero_one(0.2), (0.0, 2.0));
        assert!(ScoringRule::ZeroOne.eval(0.5).is_err());
    }

    #[test]
    fn savage_values() {
        let g = savage_g(&ScoringRule::Log, 0.5).unwrap();
        assert!(close(g, -core::f64::consts::LN_2, 1e-15));
        assert!(close(savage_g(&ScoringRule::Quadratic, 0.5).unwrap(), -0.125, 1e-15));
        assert!(close(savage_g(&ScoringRule::Boosting, 0.5).unwrap(), -2.0, 1e-15));
        // Quadrature route for the quadratic member gives the same -1/8.
        let (s1, s0) = smooth_values(1.0 + 1e-13, 1.0, 0.5).unwrap();
        assert!(close(0.5 * s1 + 0.5 * s0, -0.125, 1e-9));
    }

    #[test]
    fn condition1_examples() {
        let c = condition1_margin(&ScoringRule::Log).unwrap();
        assert_eq!(c.margin, 8.0);
        assert!(c.satisfiable);
        assert!(ScoringRule::beta(1.0, 0.5).unwrap().condition1().unwrap().satisfiable);
        assert!(!ScoringRule::beta(2.0, 0.2).unwrap().condition1().unwrap().satisfiable);
        assert!(ScoringRule::ZeroOne.condition1().is_err());
    }

    #[test]
    fn domain_errors() {
        assert!(ScoringRule::Log.eval(0.0).is_err());
        assert!(ScoringRule::Log.eval(1.0).is_err());
        assert!(ScoringRule::Log.eval(f64::NAN).is_err());
        assert!(ScoringRule::beta(-1.0, 0.0).is_err());
    }

    #[test]
    fn parse_roundtrip() {
        for r in [
            ScoringRule::Log,
            ScoringRule::Quadratic,
            ScoringRule::Boosting,
            ScoringRule::ZeroOne,
            ScoringRule::beta(1.0, 0.5).unwrap(),
        ] {
            assert_eq!(r.to_string().parse::<ScoringRule>().unwrap(), r);
        }
        assert_eq!("JS".parse::<ScoringRule>().unwrap(), ScoringRule::Log);
        assert!("beta(1)".parse::<ScoringRule>().is_err());
    }

    #[test]
    fn symmetric_rules_mirror() {
        for rule in [
            ScoringRule::Log,
            ScoringRule::Quadratic,
            ScoringRule::Boosting,
            ScoringRule::beta(0.5, 0.5).unwrap(),
            ScoringRule::beta(2.0, 2.0).unwrap(),
        ] {
            for i in 1..100 {
                let t = i as f64 / 100.0;
                let a = rule.eval(t).unwrap();
                let b = rule.eval(1.0 - t).unwrap();
                assert!(close(a.s1, b.s0, 1e-9), "{rule} t={t}");
            }
        }
    }

    #[test]
    fn savage_g_is_convex() {
        for rule in [
            ScoringRule::Log,
            ScoringRule::Boosting,
            ScoringRule::beta(1.0, 0.5).unwrap(),
            ScoringRule::beta(4.0, 4.0).unwrap(),
        ] {
            let g: alloc::vec::Vec<f64> =
                (1..1000).map(|i| rule.savage_g(i as f64 * 1e-3).unwrap()).collect();
            for w in g.windows(3) {
                assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-9, "{rule}");
            }
        }
    }

    fn smooth_rule() -> impl Strategy<Value = ScoringRule> {
        (-0.9f64..4.0, -0.9f64..4.0).prop_map(|(a, b)| ScoringRule::beta(a, b).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn propriety(rule in smooth_rule(), k in 1usize..10) {
            let p = k as f64 / 10.0;
            let mut best = (f64::NEG_INFINITY, 0.0);
            for i in 1..1000 {
                let t = i as f64 * 1e-3;
                let (s1, s0) = rule.values(t).unwrap();
                let v = p * s1 + (1.0 - p) * s0;
                if v > best.0 {
                    best = (v, t);
                }
            }
            prop_assert!((best.1 - p).abs() <= 1e-3 + 1e-12, "argmax {} for p {}", best.1, p);
        }

        #[test]
        fn derivatives_match_finite_differences(rule in smooth_rule(), t in 0.05f64..0.95) {
            let h = 1e-5;
            let e = rule.eval(t).unwrap();
            let up = rule.values(t + h).unwrap();
            let dn = rule.values(t - h).unwrap();
            let fd1 = (up.0 - dn.0) / (2.0 * h);
            let fd0 = (up.1 - dn.1) / (2.0 * h);
            prop_assert!((fd1 - e.ds1).abs() <= 1e-5 * e.ds1.abs().max(1.0));
            prop_assert!((fd0 - e.ds0).abs() <= 1e-5 * e.ds0.abs().max(1.0));
            prop_assert!(e.ds1 >= 0.0 && e.ds0 <= 0.0);
        }
    }
}
