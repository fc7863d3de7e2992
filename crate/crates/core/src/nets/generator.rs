use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{ChiSquared, Distribution as _};

use super::{Activation, ForwardCache, Gradients, Layer, MlpNet};
use crate::distributions::fill_standard_normal;
use crate::linalg::{self, Matrix};
use crate::math;
use crate::rng::Rng;
use crate::{Error, Result};

/// Widths of the radial network `g: R^48 -> R`.
pub const XI_NET_WIDTHS: [usize; 5] = [48, 32, 24, 12, 1];

/// Draws used to set the initial scale of the radial network.
const XI_INIT_DRAWS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum GeneratorKind {
    /// `A Z`.
    G1,
    /// `g(z) A U`.
    G2,
    /// `theta + A Z`.
    G3,
    /// `theta + g(z) A U`.
    G4,
}

impl GeneratorKind {
    pub fn has_location(self) -> bool {
        matches!(self, Self::G3 | Self::G4)
    }

    pub fn is_radial(self) -> bool {
        matches!(self, Self::G2 | Self::G4)
    }
}

/// Law of `Z` for G1 and G3.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BaseNoise {
    Gaussian,
    StudentT { dof: f64 },
}

#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Generator {
    kind: GeneratorKind,
    /// `p x r` shape factor.
    pub a: Matrix,
    /// Location; held at zero for G1 and G2.
    pub theta: Vec<f64>,
    pub xi_net: Option<MlpNet>,
    pub base: BaseNoise,
    #[cfg_attr(feature = "serde", serde(skip))]
    version: u64,
}

/// Noise and radial activations of one [`Generator::generate`] call.
#[derive(Debug, Clone)]
pub struct GeneratorCache {
    version: u64,
    /// `Z` (G1, G3) or `U` (G2, G4), one row per draw.
    noise: Matrix,
    /// Raw radial network outputs and their forward cache.
    radial: Option<(Vec<f64>, ForwardCache)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorGrads {
    pub a: Matrix,
    pub theta: Option<Vec<f64>>,
    pub xi_net: Option<Gradients>,
}

fn xi_net_layers() -> Vec<Layer> {
    XI_NET_WIDTHS
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            let act = if k + 2 == XI_NET_WIDTHS.len() {
                Activation::Identity
            } else {
                Activation::LeakyRelu
            };
            Layer::new(w[0], w[1], true, act)
        })
        .collect()
}

impl Generator {
    /// Builds a generator with `theta = 0`. Radial kinds get a Xavier-initialized
    /// network whose output layer is rescaled so that the sample mean of
    /// `g(z)^2` equals `r`, the Gaussian value of `E ||Z||^2`.
    pub fn new(kind: GeneratorKind, a: Matrix, base: BaseNoise, rng: &mut Rng) -> Result<Self> {
        if a.rows() == 0 || a.cols() == 0 {
            return Err(Error::InvalidConfig("generator shape factor is empty".into()));
        }
        if let BaseNoise::StudentT { dof } = base {
            if dof.is_nan() || dof <= 0.0 {
                return Err(Error::InvalidConfig(format!("dof must be positive, got {dof}")));
            }
        }
        let xi_net = if kind.is_radial() {
            let mut net = MlpNet::new(xi_net_layers())?;
            net.initialize_xavier(rng);
            let z = gaussian_batch(rng, XI_INIT_DRAWS, XI_NET_WIDTHS[0]);
            let out = net.predict(&z)?;
            let ms = out.as_slice().iter().map(|v| v * v).sum::<f64>() / XI_INIT_DRAWS as f64;
            if ms > 0.0 {
                let c = math::sqrt(a.cols() as f64 / ms);
                let last = net.layers_mut().last_mut().expect("nonempty");
                last.weight.as_mut_slice().iter_mut().for_each(|w| *w *= c);
            }
            Some(net)
        } else {
            None
        };
        Ok(Self {
            kind,
            theta: vec![0.0; a.rows()],
            a,
            xi_net,
            base,
            version: 0,
        })
    }

    pub fn kind(&self) -> GeneratorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    pub fn set_theta(&mut self, theta: Vec<f64>) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "generator location".into(),
                expected: self.dim(),
                found: theta.len(),
            });
        }
        self.version += 1;
        self.theta = theta;
        Ok(())
    }

    pub fn set_a(&mut self, a: Matrix) -> Result<()> {
        if a.rows() != self.a.rows() || a.cols() != self.a.cols() {
            return Err(Error::DimensionMismatch {
                context: "generator shape factor".into(),
                expected: self.a.cols(),
                found: a.cols(),
            });
        }
        self.version += 1;
        self.a = a;
        Ok(())
    }

    /// Draws `n` samples.
    pub fn generate(&self, rng: &mut Rng, n: usize) -> Result<(Matrix, GeneratorCache)> {
        let p = self.dim();
        let r = self.a.cols();
        let (noise, radial) = if let Some(net) = &self.xi_net {
            let mut u = Matrix::zeros(n, r);
            for i in 0..n {
                let row = u.row_mut(i);
                loop {
                    fill_standard_normal(rng, row);
                    let nrm = linalg::norm2(row);
                    if nrm > 0.0 {
                        row.iter_mut().for_each(|x| *x /= nrm);
                        break;
                    }
                }
            }
            let z = gaussian_batch(rng, n, XI_NET_WIDTHS[0]);
            let cache = net.forward(&z)?;
            let raw = cache.output().as_slice().to_vec();
            (u, Some((raw, cache)))
        } else {
            let mut z = gaussian_batch(rng, n, r);
            if let BaseNoise::StudentT { dof } = self.base {
                let chi = ChiSquared::new(dof)
                    .map_err(|_| Error::Domain(format!("invalid degrees of freedom {dof}")))?;
                for i in 0..n {
                    let s = 1.0 / math::sqrt(chi.sample(rng) / dof);
                    z.row_mut(i).iter_mut().for_each(|x| *x *= s);
                }
            }
            (z, None)
        };
        let mut x = noise.matmul_t(&self.a);
        for i in 0..n {
            let s = radial.as_ref().map_or(1.0, |(raw, _)| raw[i].abs());
            for (xv, t) in x.row_mut(i).iter_mut().zip(&self.theta) {
                *xv = t + s * *xv;
            }
        }
        debug_assert_eq!(x.cols(), p);
        Ok((
            x,
            GeneratorCache {
                version: self.version,
                noise,
                radial,
            },
        ))
    }

    /// Chains `d(loss)/d(x)` (one row per generated sample) into parameter
    /// gradients.
    pub fn backward(&self, cache: &GeneratorCache, grad_x: &Matrix) -> Result<GeneratorGrads> {
        if cache.version != self.version {
            return Err(Error::StaleCache);
        }
        let n = cache.noise.rows();
        if grad_x.rows() != n || grad_x.cols() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "generator backward".into(),
                expected: self.dim(),
                found: grad_x.cols(),
            });
        }
        let theta = self.kind.has_location().then(|| grad_x.column_means().into_iter().map(|m| m * n as f64).collect());
        let (a, xi_net) = match (&cache.radial, &self.xi_net) {
            (Some((raw, fc)), Some(net)) => {
                let mut scaled = grad_x.clone();
                for (i, r) in raw.iter().enumerate() {
                    scaled.row_mut(i).iter_mut().for_each(|g| *g *= r.abs());
                }
                let ga = scaled.t_matmul(&cache.noise);
                // d/d raw_i = sign(raw_i) * grad_x_i . (A U_i)
                let au = cache.noise.matmul_t(&self.a);
                let up = Matrix::from_fn(n, 1, |i, _| {
                    let sign = if raw[i] > 0.0 {
                        1.0
                    } else if raw[i] < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    sign * linalg::dot(grad_x.row(i), au.row(i))
                });
                (ga, Some(net.backward(fc, &up)?))
            }
            (None, None) => (grad_x.t_matmul(&cache.noise), None),
            _ => return Err(Error::StaleCache),
        };
        Ok(GeneratorGrads { a, theta, xi_net })
    }

    /// `params += step * grads`.
    pub fn apply_gradients(&mut self, grads: &GeneratorGrads, step: f64) {
        self.version += 1;
        for (a, g) in self.a.as_mut_slice().iter_mut().zip(grads.a.as_slice()) {
            *a += step * g;
        }
        if let Some(gt) = &grads.theta {
            for (t, g) in self.theta.iter_mut().zip(gt) {
                *t += step * g;
            }
        }
        if let (Some(net), Some(g)) = (&mut self.xi_net, &grads.xi_net) {
            net.apply_gradients(g, step);
        }
    }
}

fn gaussian_batch(rng: &mut Rng, n: usize, d: usize) -> Matrix {
    let mut z = Matrix::zeros(n, d);
    fill_standard_normal(rng, z.as_mut_slice());
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};

    fn loss_grad(x: &Matrix, c: &Matrix) -> (f64, Matrix) {
        // loss = sum_ij c_ij x_ij^2 / 2, gradient c_ij x_ij
        let mut l = 0.0;
        let g = Matrix::from_fn(x.rows(), x.cols(), |i, j| {
            l += 0.5 * c[(i, j)] * x[(i, j)] * x[(i, j)];
            c[(i, j)] * x[(i, j)]
        });
        (l, g)
    }

    fn check_kind(kind: GeneratorKind) {
        let p = 3;
        let mut rng = substream(11, Stream::NetInit);
        let a = Matrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { 0.3 * (i as f64 - j as f64) });
        let mut g = Generator::new(kind, a, BaseNoise::Gaussian, &mut rng).unwrap();
        if kind.has_location() {
            g.set_theta(vec![0.5, -1.0, 0.25]).unwrap();
        }
        let c = Matrix::from_fn(4, p, |i, j| 1.0 + 0.1 * (i + j) as f64);
        let seed_noise = || substream(12, Stream::GeneratorNoise);
        let (x, cache) = g.generate(&mut seed_noise(), 4).unwrap();
        let (_, gx) = loss_grad(&x, &c);
        let grads = g.backward(&cache, &gx).unwrap();
        let h = 1e-6;
        let eval = |g: &Generator| loss_grad(&g.generate(&mut seed_noise(), 4).unwrap().0, &c).0;
        for k in 0..p * p {
            let mut gp = g.clone();
            gp.a.as_mut_slice()[k] += h;
            let mut gm = g.clone();
            gm.a.as_mut_slice()[k] -= h;
            let fd = (eval(&gp) - eval(&gm)) / (2.0 * h);
            let an = grads.a.as_slice()[k];
            assert!((fd - an).abs() <= 1e-5 * fd.abs().max(1.0), "{kind:?} A[{k}]: {fd} vs {an}");
        }
        if kind.has_location() {
            for k in 0..p {
                let mut gp = g.clone();
                gp.theta[k] += h;
                let mut gm = g.clone();
                gm.theta[k] -= h;
                let fd = (eval(&gp) - eval(&gm)) / (2.0 * h);
                let an = grads.theta.as_ref().unwrap()[k];
                assert!((fd - an).abs() <= 1e-5 * fd.abs().max(1.0));
            }
        } else {
            assert!(grads.theta.is_none());
        }
        if let Some(net) = &g.xi_net {
            let flat = grads.xi_net.as_ref().unwrap().flat();
            let base = net.params_flat();
            for k in (0..base.len()).step_by(97) {
                let mut gp = g.clone();
                let mut pp = base.clone();
                pp[k] += h;
                gp.xi_net.as_mut().unwrap().set_params_flat(&pp).unwrap();
                let mut gm = g.clone();
                pp[k] -= 2.0 * h;
                gm.xi_net.as_mut().unwrap().set_params_flat(&pp).unwrap();
                let fd = (eval(&gp) - eval(&gm)) / (2.0 * h);
                assert!((fd - flat[k]).abs() <= 1e-5 * fd.abs().max(1.0), "xi param {k}: {fd} vs {}", flat[k]);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for kind in [GeneratorKind::G1, GeneratorKind::G2, GeneratorKind::G3, GeneratorKind::G4] {
            check_kind(kind);
        }
    }

    #[test]
    fn g1_covariance_is_a_at() {
        let mut rng = substream(13, Stream::NetInit);
        let a = Matrix::from_rows(&[&[2.0, 0.0], &[1.0, 1.0]]).unwrap();
        let g = Generator::new(GeneratorKind::G1, a.clone(), BaseNoise::Gaussian, &mut rng).unwrap();
        let (x, _) = g.generate(&mut substream(14, Stream::GeneratorNoise), 200_000).unwrap();
        let cov = x.transpose().gram().scale(1.0 / 200_000.0);
        let target = a.matmul_t(&a);
        for i in 0..2 {
            for j in 0..2 {
                assert!((cov.as_matrix()[(i, j)] - target[(i, j)]).abs() < 0.05);
            }
        }
    }

    #[test]
    fn radial_outputs_are_nonnegative_scaled() {
        let mut rng = substream(15, Stream::NetInit);
        let g = Generator::new(GeneratorKind::G2, Matrix::identity(4), BaseNoise::Gaussian, &mut rng).unwrap();
        let (x, cache) = g.generate(&mut substream(16, Stream::GeneratorNoise), 5000).unwrap();
        let (raw, _) = cache.radial.as_ref().unwrap();
        for (row, r) in x.row_iter().zip(raw) {
            assert!((linalg::norm2(row) - r.abs()).abs() < 1e-9);
        }
        let ms = raw.iter().map(|v| v * v).sum::<f64>() / 5000.0;
        assert!((ms / 4.0 - 1.0).abs() < 0.15, "{ms}");
    }

    #[test]
    fn stale_generator_cache() {
        let mut rng = substream(17, Stream::NetInit);
        let mut g = Generator::new(GeneratorKind::G3, Matrix::identity(2), BaseNoise::Gaussian, &mut rng).unwrap();
        let (_, cache) = g.generate(&mut rng, 3).unwrap();
        g.set_theta(vec![1.0, 1.0]).unwrap();
        assert!(matches!(g.backward(&cache, &Matrix::zeros(3, 2)), Err(Error::StaleCache)));
    }
}
