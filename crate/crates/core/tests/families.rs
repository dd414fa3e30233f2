mod common;

use ndarray::Array2;
use qvf_shrink::{
    make_family, sample_matrix, theoretical_moments, variance_function, FamilyKind, FamilySpec, MeanMatrix, TauMatrix,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DRAWS: usize = 100_000;

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, var)
}

/// One entry per family: spec, theta for a 1 x 2 row, tau, and lambda.
fn cases() -> Vec<(FamilySpec, [f64; 2], u32, f64)> {
    vec![
        (make_family(FamilyKind::Normal, None, None).unwrap(), [-1.5, 0.7], 3, 0.0),
        (make_family(FamilyKind::Poisson, None, None).unwrap(), [2.0, 0.4], 2, 0.0),
        (make_family(FamilyKind::Gamma, Some(2.0), None).unwrap(), [1.5, 3.0], 2, 2.0),
        (make_family(FamilyKind::Multinomial, None, Some(&[4])).unwrap(), [0.3, 0.45], 4, 0.0),
        (make_family(FamilyKind::NegMultinomial, None, Some(&[3])).unwrap(), [2.0, 0.5], 3, 0.0),
    ]
}

/// Draws `DRAWS` rows in blocks; returns column 0 samples.
fn draws(spec: &FamilySpec, theta: [f64; 2], tau: u32) -> Vec<f64> {
    let block = 1000;
    let t = MeanMatrix(Array2::from_shape_fn((block, 2), |(_, j)| theta[j]));
    let taus = TauMatrix(Array2::from_elem((block, 2), tau));
    let mut out = Vec::with_capacity(DRAWS);
    for s in 0..(DRAWS / block) as u64 {
        let d = sample_matrix(spec, &t, &taus, 77 + s).unwrap();
        out.extend(d.y.column(0).iter().copied());
    }
    out
}

#[test]
fn sample_moments_match_theory_for_every_family() {
    for (spec, theta, tau, _) in cases() {
        let ys = draws(&spec, theta, tau);
        let (mean, var) = mean_var(&ys);
        let (m0, v0) = theoretical_moments(&spec, theta[0], tau).unwrap();
        let se_mean = (v0 / DRAWS as f64).sqrt();
        assert!((mean - m0).abs() <= 4.0 * se_mean, "{:?}: mean {mean} vs {m0}", spec.kind());
        // SE of the sample variance from the sample fourth central moment.
        let m4 = ys.iter().map(|y| (y - mean).powi(4)).sum::<f64>() / DRAWS as f64;
        let se_var = ((m4 - var * var) / DRAWS as f64).sqrt();
        assert!((var - v0).abs() <= 4.0 * se_var, "{:?}: var {var} vs {v0}", spec.kind());
    }
}

#[test]
fn unbiased_variance_identity() {
    for (spec, theta, tau, lambda) in cases() {
        let ys = draws(&spec, theta, tau);
        let vals: Vec<f64> = ys.iter().map(|&y| common::unbiased_variance(spec.kind(), lambda, y, tau)).collect();
        let (m, v) = mean_var(&vals);
        let (_, target) = theoretical_moments(&spec, theta[0], tau).unwrap();
        // Normal V is constant, so the spread is pure rounding.
        let se = (v / DRAWS as f64).sqrt().max(1e-12 * target);
        assert!((m - target).abs() <= 4.0 * se, "{:?}: {m} vs {target}", spec.kind());
    }
}

#[test]
fn multinomial_support_and_row_sums() {
    let trials = [2u32, 3, 5, 7];
    let spec = make_family(FamilyKind::Multinomial, None, Some(&trials)).unwrap();
    let theta = MeanMatrix(Array2::from_elem((4, 3), 0.3));
    let tau = TauMatrix::from_trials(&trials, 3);
    for seed in 0..200 {
        let d = sample_matrix(&spec, &theta, &tau, seed).unwrap();
        for (i, row) in d.y.rows().into_iter().enumerate() {
            let n = f64::from(trials[i]);
            for &y in row {
                assert!((0.0..=1.0).contains(&y));
                assert_eq!((y * n).round(), y * n);
            }
            let counts: f64 = row.iter().map(|y| (y * n).round()).sum();
            assert!(counts <= n);
        }
    }
}

#[test]
fn variance_function_matches_moments_times_tau() {
    let mut r = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let tau: u32 = r.random_range(2..=50);
        let kind = FamilyKind::ALL[r.random_range(0..5)];
        let (spec, theta) = match kind {
            FamilyKind::Normal => (make_family(kind, None, None).unwrap(), r.random_range(-10.0..10.0)),
            FamilyKind::Poisson => (make_family(kind, None, None).unwrap(), r.random_range(0.01..10.0)),
            FamilyKind::Gamma => (make_family(kind, Some(r.random_range(0.5..5.0)), None).unwrap(), r.random_range(0.01..10.0)),
            FamilyKind::Multinomial => (make_family(kind, None, Some(&[tau])).unwrap(), r.random_range(0.01..0.99)),
            FamilyKind::NegMultinomial => (make_family(kind, None, Some(&[tau])).unwrap(), r.random_range(0.01..10.0)),
        };
        let (_, var) = theoretical_moments(&spec, theta, tau).unwrap();
        let v = variance_function(&spec, theta);
        assert!((var * f64::from(tau) - v).abs() <= 4.0 * f64::EPSILON * v.abs().max(1.0));
    }
}

#[test]
fn documented_values() {
    let poisson = make_family(FamilyKind::Poisson, None, None).unwrap();
    assert_eq!((poisson.nu0(), poisson.nu1(), poisson.nu2()), (0.0, 1.0, 0.0));
    let gamma = make_family(FamilyKind::Gamma, Some(2.0), None).unwrap();
    assert_eq!((gamma.nu0(), gamma.nu1(), gamma.nu2()), (0.0, 0.0, 0.5));
    assert!(make_family(FamilyKind::Multinomial, None, Some(&[1, 3])).is_err());
    let negm = make_family(FamilyKind::NegMultinomial, None, Some(&[4])).unwrap();
    assert_eq!(theoretical_moments(&negm, 2.0, 4).unwrap(), (2.0, 1.5));
    let mult = make_family(FamilyKind::Multinomial, None, Some(&[2])).unwrap();
    assert_eq!(theoretical_moments(&mult, 0.5, 2).unwrap(), (0.5, 0.125));
    let normal = make_family(FamilyKind::Normal, None, None).unwrap();
    assert_eq!(theoretical_moments(&normal, -3.0, 1).unwrap(), (-3.0, 1.0));
    assert_eq!(variance_function(&normal, 7.0), 1.0);
    assert_eq!(variance_function(&poisson, 3.0), 3.0);
    assert_eq!(variance_function(&gamma, 4.0), 8.0);
}

#[test]
fn poisson_sample_mean() {
    let spec = make_family(FamilyKind::Poisson, None, None).unwrap();
    let ys = draws(&spec, [2.0, 2.0], 1);
    let (mean, _) = mean_var(&ys);
    assert!((mean - 2.0).abs() <= 3.0 * (2.0f64 / DRAWS as f64).sqrt());
}
