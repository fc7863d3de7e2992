use scoregan_core::distributions::{
    ar_matrix, sample_contaminated, sample_elliptical, sample_gaussian, sample_mvt, standard_normal, ContaminationScenario,
    Distribution, EllipticalModel, XiSampler,
};
use scoregan_core::linalg::norm2;
use scoregan_core::rng::{substream, trial_seed, Stream};
use scoregan_core::{Matrix, SymMatrix};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
fn ks(mut v: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

fn shape_factor(seed: u64, p: usize, r: usize) -> Matrix {
    let mut rng = substream(seed, Stream::Aux);
    Matrix::from_fn(p, r, |_, _| standard_normal(&mut rng))
}

fn projections(x: &Matrix, theta: &[f64], u: &[f64]) -> Vec<f64> {
    x.row_iter().map(|r| r.iter().zip(theta).zip(u).map(|((a, t), b)| (a - t) * b).sum()).collect()
}

#[test]
fn gaussian_implied_projections_are_normal() {
    let (p, r, n) = (4, 3, 20_000);
    let model = EllipticalModel { location: vec![1.0, -2.0, 0.5, 0.0], shape: shape_factor(1, p, r), xi: XiSampler::GaussianImplied };
    let x = sample_elliptical(&mut substream(2, Stream::Data), &model, n).unwrap();
    let mut urng = substream(3, Stream::Aux);
    for _ in 0..5 {
        let u: Vec<f64> = (0..p).map(|_| standard_normal(&mut urng)).collect();
        let sd = norm2(&model.shape.transpose().mat_vec(&u));
        let law = Normal::new(0.0, sd).unwrap();
        let d = ks(projections(&x, &model.location, &u), |v| law.cdf(v));
        assert!(d < 0.02, "KS distance {d}");
    }
}

#[test]
fn t_implied_and_mvt_projections_are_student() {
    let (p, n, dof) = (3, 20_000, 3.0);
    let a = shape_factor(4, p, p);
    let model = EllipticalModel { location: vec![0.0; p], shape: a.clone(), xi: XiSampler::TImplied { dof } };
    let x = sample_elliptical(&mut substream(5, Stream::Data), &model, n).unwrap();
    let scatter = SymMatrix::symmetrize(&a.matmul_t(&a)).unwrap();
    let y = sample_mvt(&mut substream(6, Stream::Data), dof, &[0.0; 3], &scatter, n).unwrap();
    let law = StudentsT::new(0.0, 1.0, dof).unwrap();
    let mut urng = substream(7, Stream::Aux);
    for _ in 0..5 {
        let u: Vec<f64> = (0..p).map(|_| standard_normal(&mut urng)).collect();
        let sd = scatter.quad_form(&u).sqrt();
        for sample in [&x, &y] {
            let v: Vec<f64> = projections(sample, &[0.0; 3], &u).into_iter().map(|v| v / sd).collect();
            let d = ks(v, |t| law.cdf(t));
            assert!(d < 0.02, "KS distance {d}");
        }
    }
}

#[test]
fn gaussian_sampler_is_normal_per_coordinate() {
    let sigma = ar_matrix(3, 0.5);
    let x = sample_gaussian(&mut substream(8, Stream::Data), &[0.0, 3.0, -1.0], &sigma, 20_000).unwrap();
    for (j, mean) in [0.0, 3.0, -1.0].into_iter().enumerate() {
        let law = Normal::new(mean, 1.0).unwrap();
        let d = ks(x.row_iter().map(|r| r[j]).collect(), |v| law.cdf(v));
        assert!(d < 0.02, "coordinate {j}: KS distance {d}");
    }
}

#[test]
fn same_seed_same_bits() {
    let sc = ContaminationScenario {
        clean: Distribution::StudentT { dof: 2.5, loc: vec![0.0; 4], scatter: ar_matrix(4, 0.5) },
        contaminant: Distribution::Gaussian { mean: vec![5.0; 4], cov: SymMatrix::identity(4).scale(5.0) },
        epsilon: 0.2,
    };
    let seed = trial_seed(42, 3);
    let (a, la) = sample_contaminated(&mut substream(seed, Stream::Data), &sc, 500).unwrap();
    let (b, lb) = sample_contaminated(&mut substream(seed, Stream::Data), &sc, 500).unwrap();
    assert_eq!(la, lb);
    assert!(a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits()));
    let (c, _) = sample_contaminated(&mut substream(trial_seed(42, 4), Stream::Data), &sc, 500).unwrap();
    assert_ne!(a.as_slice(), c.as_slice());
}

#[test]
fn contamination_fraction_is_binomial() {
    let sc = ContaminationScenario {
        clean: Distribution::Gaussian { mean: vec![0.0; 2], cov: SymMatrix::identity(2) },
        contaminant: Distribution::Dirac(vec![5.0, 5.0]),
        epsilon: 0.2,
    };
    let n = 20_000;
    let (x, labels) = sample_contaminated(&mut substream(9, Stream::Data), &sc, n).unwrap();
    let bad = labels.iter().filter(|&&b| b).count() as f64;
    let sd = (n as f64 * 0.2 * 0.8).sqrt();
    assert!((bad - 0.2 * n as f64).abs() < 4.0 * sd);
    for (row, &l) in x.row_iter().zip(&labels) {
        assert_eq!(l, row == [5.0, 5.0]);
    }
}
