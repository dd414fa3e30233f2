//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use ndarray::Array2;
use qvf_shrink::{make_family, sample_matrix, DataMatrix, FamilyKind, FamilySpec, MeanMatrix, TauMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Variance coefficients written out by hand, not read from the library.
pub fn coefficients(kind: FamilyKind, lambda: f64) -> (f64, f64, f64) {
    match kind {
        FamilyKind::Normal => (1.0, 0.0, 0.0),
        FamilyKind::Poisson => (0.0, 1.0, 0.0),
        FamilyKind::Gamma => (0.0, 0.0, 1.0 / lambda),
        FamilyKind::Multinomial => (0.0, 1.0, -1.0),
        FamilyKind::NegMultinomial => (0.0, 1.0, 1.0),
    }
}

/// `V(Y) / (tau + nu2)` entry by entry.
pub fn unbiased_variance(kind: FamilyKind, lambda: f64, y: f64, tau: u32) -> f64 {
    let (a, b, c) = coefficients(kind, lambda);
    (a + b * y + c * y * y) / (f64::from(tau) + c)
}

/// Term-by-term location risk estimate.
pub fn ure_direct(kind: FamilyKind, lambda: f64, data: &DataMatrix, b: &[f64], mu: &[f64]) -> f64 {
    let mut total = 0.0;
    for ((i, j), &y) in data.y.indexed_iter() {
        let d = y - mu[j];
        total += b[i] * b[i] * d * d + (1.0 - 2.0 * b[i]) * unbiased_variance(kind, lambda, y, data.tau.0[(i, j)]);
    }
    total / data.y.len() as f64
}

/// Term-by-term grand-mean risk estimate.
pub fn aure_direct(kind: FamilyKind, lambda: f64, data: &DataMatrix, b: &[f64]) -> f64 {
    let (n, p) = data.y.dim();
    let ybar: Vec<f64> = (0..p).map(|j| (0..n).map(|i| data.y[(i, j)]).sum::<f64>() / n as f64).collect();
    let factor = 1.0 - 1.0 / n as f64;
    let mut total = 0.0;
    for ((i, j), &y) in data.y.indexed_iter() {
        let d = y - ybar[j];
        total += b[i] * b[i] * d * d
            + (1.0 - 2.0 * factor * b[i]) * unbiased_variance(kind, lambda, y, data.tau.0[(i, j)]);
    }
    total / (n * p) as f64
}

pub fn squared_error(theta: &Array2<f64>, estimate: &Array2<f64>) -> f64 {
    theta.iter().zip(estimate).map(|(t, e)| (t - e) * (t - e)).sum::<f64>() / theta.len() as f64
}

/// Tie groups of rows, ordered by descending row total; `b` must be
/// nondecreasing from one group to the next and constant inside a group.
pub fn tie_groups(row_sums: &[u64]) -> Vec<Vec<usize>> {
    let mut distinct: Vec<u64> = row_sums.to_vec();
    distinct.sort_unstable_by(|a, b| b.cmp(a));
    distinct.dedup();
    distinct
        .iter()
        .map(|&s| (0..row_sums.len()).filter(|&i| row_sums[i] == s).collect())
        .collect()
}

pub fn is_feasible(b: &[f64], row_sums: &[u64]) -> bool {
    b.iter().all(|v| (0.0..=1.0).contains(v))
        && (0..b.len()).all(|i| (0..b.len()).all(|k| row_sums[i] < row_sums[k] || b[i] <= b[k]))
}

/// Minimizes `sum_g f_g(b_g)` over nondecreasing grid levels `k / steps`, one
/// level per group. `cost(g, b)` is the cost of group `g` at value `b`.
pub fn monotone_grid_dp(groups: usize, steps: usize, cost: impl Fn(usize, f64) -> f64) -> (Vec<f64>, f64) {
    let level = |k: usize| k as f64 / steps as f64;
    let mut best: Vec<f64> = (0..=steps).map(|k| cost(0, level(k))).collect();
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(groups);
    back.push(vec![0; steps + 1]);
    for g in 1..groups {
        let mut next = vec![0.0; steps + 1];
        let mut arg = vec![0; steps + 1];
        let (mut run, mut run_k) = (f64::INFINITY, 0);
        for k in 0..=steps {
            if best[k] < run {
                run = best[k];
                run_k = k;
            }
            next[k] = run + cost(g, level(k));
            arg[k] = run_k;
        }
        best = next;
        back.push(arg);
    }
    let mut k = (0..=steps).fold(0, |a, k| if best[k] < best[a] { k } else { a });
    let value = best[k];
    let mut levels = vec![0.0; groups];
    for g in (0..groups).rev() {
        levels[g] = level(k);
        k = back[g][k];
    }
    (levels, value)
}

/// Exact minimum of `sum_g (q_g b_g^2 - 2 l_g b_g)` over nondecreasing
/// `b_g in [0, 1]`, by enumerating every split of the groups into pooled
/// blocks. The optimum pools some consecutive runs and solves each run in
/// closed form, so one of the enumerated candidates is optimal.
pub fn exact_monotone_quadratic(q: &[f64], l: &[f64]) -> (Vec<f64>, f64) {
    let g = q.len();
    let mut best = (vec![], f64::INFINITY);
    for mask in 0u32..(1 << (g - 1)) {
        let mut values = vec![0.0; g];
        let mut start = 0;
        let mut ok = true;
        let mut prev = 0.0;
        for end in 0..g {
            let cut = end == g - 1 || mask & (1 << end) != 0;
            if !cut {
                continue;
            }
            let (qs, ls): (f64, f64) = (start..=end).fold((0.0, 0.0), |acc, k| (acc.0 + q[k], acc.1 + l[k]));
            let v = if qs > 0.0 {
                (ls / qs).clamp(0.0, 1.0)
            } else if ls > 0.0 {
                1.0
            } else if ls < 0.0 {
                0.0
            } else {
                prev
            };
            if v < prev {
                ok = false;
                break;
            }
            values[start..=end].fill(v);
            prev = v;
            start = end + 1;
        }
        if !ok {
            continue;
        }
        let value: f64 = (0..g).map(|k| q[k] * values[k] * values[k] - 2.0 * l[k] * values[k]).sum();
        if value < best.1 {
            best = (values, value);
        }
    }
    best
}

/// A seeded small instance of any family with distinct or tied row weights.
pub struct Instance {
    pub kind: FamilyKind,
    pub lambda: f64,
    pub spec: FamilySpec,
    pub theta: MeanMatrix,
    pub data: DataMatrix,
}

pub fn random_instance(seed: u64, n: usize, p: usize, kind: FamilyKind) -> Instance {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let lambda = 2.0;
    let (spec, tau) = match kind {
        FamilyKind::Multinomial | FamilyKind::NegMultinomial => {
            let trials: Vec<u32> = (0..n).map(|_| r.random_range(2..=5)).collect();
            let spec = make_family(kind, None, Some(&trials)).unwrap();
            (spec, TauMatrix::from_trials(&trials, p))
        }
        FamilyKind::Gamma => {
            let tau = TauMatrix(Array2::from_shape_simple_fn((n, p), || r.random_range(1..=3)));
            (make_family(kind, Some(lambda), None).unwrap(), tau)
        }
        _ => {
            let tau = TauMatrix(Array2::from_shape_simple_fn((n, p), || r.random_range(1..=3)));
            (make_family(kind, None, None).unwrap(), tau)
        }
    };
    let theta = Array2::from_shape_simple_fn((n, p), || match kind {
        FamilyKind::Normal => r.random_range(-2.0..2.0),
        FamilyKind::Poisson => r.random_range(0.5..4.0),
        FamilyKind::Gamma => r.random_range(0.5..3.0),
        FamilyKind::Multinomial => r.random_range(0.05..0.9 / p as f64),
        FamilyKind::NegMultinomial => r.random_range(0.2..2.0),
    });
    let theta = MeanMatrix(theta);
    let data = sample_matrix(&spec, &theta, &tau, r.random()).unwrap();
    Instance { kind, lambda, spec, theta, data }
}
