//! The five diagonal exponential families with quadratic variance, their
//! exact samplers and moment formulas.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Binomial, Distribution, Gamma, Normal, Poisson};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    Normal,
    Poisson,
    Gamma,
    Multinomial,
    NegMultinomial,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 5] = [
        FamilyKind::Normal,
        FamilyKind::Poisson,
        FamilyKind::Gamma,
        FamilyKind::Multinomial,
        FamilyKind::NegMultinomial,
    ];

    pub fn token(self) -> &'static str {
        match self {
            FamilyKind::Normal => "normal",
            FamilyKind::Poisson => "poisson",
            FamilyKind::Gamma => "gamma",
            FamilyKind::Multinomial => "multinomial",
            FamilyKind::NegMultinomial => "negmultinomial",
        }
    }

    /// Families whose `tau` is a per-row trial count `N_i`.
    pub fn uses_trials(self) -> bool {
        matches!(self, FamilyKind::Multinomial | FamilyKind::NegMultinomial)
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FamilyKind::ALL
            .into_iter()
            .find(|k| k.token() == s)
            .ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}

/// A family together with its variance coefficients `V(t) = nu0 + nu1 t + nu2 t^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilySpec {
    kind: FamilyKind,
    nu0: f64,
    nu1: f64,
    nu2: f64,
    shape: Option<f64>,
}

/// Builds a family, checking that the family-specific parameters are present
/// exactly when needed. `trials` are the per-row `N_i` of the (negative)
/// multinomial families.
pub fn make_family(kind: FamilyKind, shape: Option<f64>, trials: Option<&[u32]>) -> Result<FamilySpec> {
    match (kind, shape) {
        (FamilyKind::Gamma, None) => {
            return Err(Error::InvalidFamily("gamma requires a shape parameter".into()))
        }
        (FamilyKind::Gamma, Some(l)) if !(l > 0.0 && l.is_finite()) => {
            return Err(Error::InvalidFamily(format!("gamma shape must be positive, got {l}")))
        }
        (FamilyKind::Gamma, _) => {}
        (_, Some(_)) => {
            return Err(Error::InvalidFamily(format!("{kind} takes no shape parameter")))
        }
        _ => {}
    }
    match (kind.uses_trials(), trials) {
        (true, None) => {
            return Err(Error::InvalidFamily(format!("{kind} requires trial counts N")))
        }
        (true, Some(ns)) => {
            let min = if kind == FamilyKind::Multinomial { 2 } else { 1 };
            if let Some((i, &n)) = ns.iter().enumerate().find(|(_, &n)| n < min) {
                return Err(Error::InvalidFamily(format!(
                    "{kind} requires N_i >= {min}, row {i} has N = {n}"
                )));
            }
        }
        (false, Some(_)) => {
            return Err(Error::InvalidFamily(format!("{kind} takes no trial counts")))
        }
        (false, None) => {}
    }
    let (nu0, nu1, nu2) = match kind {
        FamilyKind::Normal => (1.0, 0.0, 0.0),
        FamilyKind::Poisson => (0.0, 1.0, 0.0),
        FamilyKind::Gamma => (0.0, 0.0, 1.0 / shape.unwrap()),
        FamilyKind::Multinomial => (0.0, 1.0, -1.0),
        FamilyKind::NegMultinomial => (0.0, 1.0, 1.0),
    };
    Ok(FamilySpec { kind, nu0, nu1, nu2, shape })
}

/// `V(t) = nu0 + nu1 t + nu2 t^2`, defined for every real `t`.
pub fn variance_function(spec: &FamilySpec, t: f64) -> f64 {
    spec.variance(t)
}

/// Mean and variance of a single coordinate with mean `theta` and weight `tau`.
pub fn theoretical_moments(spec: &FamilySpec, theta: f64, tau: u32) -> Result<(f64, f64)> {
    if !spec.in_domain(theta) {
        return Err(Error::MeanOutOfDomain { row: 0, col: 0, value: theta });
    }
    if tau < spec.min_tau() {
        return Err(Error::InvalidTau(format!("tau = {tau} below the family minimum")));
    }
    Ok((theta, spec.variance(theta) / f64::from(tau)))
}

impl FamilySpec {
    pub fn kind(&self) -> FamilyKind {
        self.kind
    }
    pub fn nu0(&self) -> f64 {
        self.nu0
    }
    pub fn nu1(&self) -> f64 {
        self.nu1
    }
    pub fn nu2(&self) -> f64 {
        self.nu2
    }
    /// Gamma shape `lambda`; `None` for the other families.
    pub fn shape(&self) -> Option<f64> {
        self.shape
    }

    #[inline]
    pub fn variance(&self, t: f64) -> f64 {
        self.nu0 + t * (self.nu1 + self.nu2 * t)
    }

    fn min_tau(&self) -> u32 {
        if self.kind == FamilyKind::Multinomial {
            2
        } else {
            1
        }
    }

    /// Whether `t` lies strictly inside the mean domain.
    pub fn in_domain(&self, t: f64) -> bool {
        match self.kind {
            FamilyKind::Normal => t.is_finite(),
            FamilyKind::Poisson | FamilyKind::Gamma | FamilyKind::NegMultinomial => {
                t > 0.0 && t.is_finite()
            }
            FamilyKind::Multinomial => t > 0.0 && t < 1.0,
        }
    }

    /// Domain check with the count families' degenerate zero mean admitted.
    fn in_sampling_domain(&self, t: f64) -> bool {
        match self.kind {
            FamilyKind::Poisson | FamilyKind::NegMultinomial => t >= 0.0 && t.is_finite(),
            FamilyKind::Multinomial => (0.0..1.0).contains(&t),
            _ => self.in_domain(t),
        }
    }

    pub fn validate_mean(&self, theta: &MeanMatrix) -> Result<()> {
        self.check_mean(theta, |t| self.in_domain(t))
    }

    fn check_mean(&self, theta: &MeanMatrix, ok: impl Fn(f64) -> bool) -> Result<()> {
        for ((row, col), &value) in theta.0.indexed_iter() {
            if !ok(value) {
                return Err(Error::MeanOutOfDomain { row, col, value });
            }
        }
        if self.kind == FamilyKind::Multinomial {
            for (row, r) in theta.0.rows().into_iter().enumerate() {
                let sum: f64 = r.sum();
                if sum >= 1.0 {
                    return Err(Error::RowSumTooLarge { row, sum });
                }
            }
        }
        Ok(())
    }

    pub fn validate_tau(&self, tau: &TauMatrix) -> Result<()> {
        let min = self.min_tau();
        if let Some(((i, j), &t)) = tau.0.indexed_iter().find(|(_, &t)| t < min) {
            return Err(Error::InvalidTau(format!(
                "tau[{i}, {j}] = {t} but {} requires at least {min}",
                self.kind
            )));
        }
        if self.kind.uses_trials() {
            for (i, row) in tau.0.rows().into_iter().enumerate() {
                if row.iter().any(|&t| t != row[0]) {
                    return Err(Error::InvalidTau(format!(
                        "{} requires a constant trial count per row; row {i} varies",
                        self.kind
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Mean parameters `theta_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanMatrix(pub Array2<f64>);

impl MeanMatrix {
    pub fn dim(&self) -> (usize, usize) {
        self.0.dim()
    }
}

/// Known positive integer weights `tau_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct TauMatrix(pub Array2<u32>);

impl TauMatrix {
    pub fn ones(n: usize, p: usize) -> Self {
        TauMatrix(Array2::ones((n, p)))
    }

    /// One trial count per row, repeated across the `p` columns.
    pub fn from_trials(trials: &[u32], p: usize) -> Self {
        TauMatrix(Array2::from_shape_fn((trials.len(), p), |(i, _)| trials[i]))
    }

    pub fn dim(&self) -> (usize, usize) {
        self.0.dim()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.0
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|&t| u64::from(t)).sum())
            .collect()
    }
}

/// Observations `Y` with their weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    pub y: Array2<f64>,
    pub tau: TauMatrix,
}

impl DataMatrix {
    pub fn new(y: Array2<f64>, tau: TauMatrix) -> Result<Self> {
        if y.dim() != tau.dim() {
            return Err(Error::DimensionMismatch(format!(
                "data is {:?} but tau is {:?}",
                y.dim(),
                tau.dim()
            )));
        }
        if y.nrows() == 0 || y.ncols() == 0 {
            return Err(Error::DimensionMismatch("empty data matrix".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("data contains non-finite values".into()));
        }
        if tau.0.iter().any(|&t| t == 0) {
            return Err(Error::InvalidTau("tau entries must be >= 1".into()));
        }
        Ok(DataMatrix { y, tau })
    }

    pub fn with_unit_tau(y: Array2<f64>) -> Result<Self> {
        let (n, p) = y.dim();
        Self::new(y, TauMatrix::ones(n, p))
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn p(&self) -> usize {
        self.y.ncols()
    }

    /// `max |Y_il|`, the bound on admissible shrinkage locations.
    pub fn data_range(&self) -> f64 {
        self.y.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Draws one observation matrix. Rows are independent; within a row the
/// (negative) multinomial coordinates carry their natural coupling.
pub fn sample_matrix(spec: &FamilySpec, theta: &MeanMatrix, tau: &TauMatrix, seed: u64) -> Result<DataMatrix> {
    if theta.dim() != tau.dim() {
        return Err(Error::DimensionMismatch(format!(
            "theta is {:?} but tau is {:?}",
            theta.dim(),
            tau.dim()
        )));
    }
    spec.check_mean(theta, |t| spec.in_sampling_domain(t))?;
    spec.validate_tau(tau)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, p) = theta.dim();
    let mut y = Array2::<f64>::zeros((n, p));
    for i in 0..n {
        let th = theta.0.row(i);
        let tr = tau.0.row(i);
        let mut out = y.row_mut(i);
        match spec.kind {
            FamilyKind::Normal => {
                for j in 0..p {
                    let sd = (1.0 / f64::from(tr[j])).sqrt();
                    out[j] = Normal::new(th[j], sd).map_err(param_err)?.sample(&mut rng);
                }
            }
            FamilyKind::Poisson => {
                for j in 0..p {
                    let t = f64::from(tr[j]);
                    out[j] = poisson(&mut rng, th[j] * t)? / t;
                }
            }
            FamilyKind::Gamma => {
                let lambda = spec.shape.expect("gamma spec carries a shape");
                for j in 0..p {
                    let k = lambda * f64::from(tr[j]);
                    out[j] = Gamma::new(k, th[j] / k).map_err(param_err)?.sample(&mut rng);
                }
            }
            FamilyKind::Multinomial => {
                let trials = tr[0];
                let mut remaining = u64::from(trials);
                let mut mass = 1.0;
                for j in 0..p {
                    let w = if remaining == 0 || th[j] == 0.0 {
                        0
                    } else {
                        let q = (th[j] / mass).clamp(0.0, 1.0);
                        Binomial::new(remaining, q).map_err(param_err)?.sample(&mut rng)
                    };
                    remaining -= w;
                    mass -= th[j];
                    out[j] = w as f64 / f64::from(trials);
                }
            }
            FamilyKind::NegMultinomial => {
                // Gamma mixing variable shared across the row.
                let trials = f64::from(tr[0]);
                let g = Gamma::new(trials, 1.0).map_err(param_err)?.sample(&mut rng);
                for j in 0..p {
                    out[j] = poisson(&mut rng, th[j] * g)? / trials;
                }
            }
        }
    }
    DataMatrix::new(y, tau.clone())
}

fn poisson(rng: &mut impl Rng, rate: f64) -> Result<f64> {
    if rate == 0.0 {
        return Ok(0.0);
    }
    Ok(Poisson::new(rate).map_err(param_err)?.sample(rng))
}

fn param_err(e: impl fmt::Display) -> Error {
    Error::InvalidFamily(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn spec(kind: FamilyKind) -> FamilySpec {
        match kind {
            FamilyKind::Gamma => make_family(kind, Some(2.0), None).unwrap(),
            k if k.uses_trials() => make_family(k, None, Some(&[4, 4])).unwrap(),
            k => make_family(k, None, None).unwrap(),
        }
    }

    #[test]
    fn coefficient_triples() {
        let p = spec(FamilyKind::Poisson);
        assert_eq!((p.nu0(), p.nu1(), p.nu2()), (0.0, 1.0, 0.0));
        let g = spec(FamilyKind::Gamma);
        assert_eq!((g.nu0(), g.nu1(), g.nu2()), (0.0, 0.0, 0.5));
        let n = spec(FamilyKind::Normal);
        assert_eq!((n.nu0(), n.nu1(), n.nu2()), (1.0, 0.0, 0.0));
        let m = spec(FamilyKind::Multinomial);
        assert_eq!((m.nu0(), m.nu1(), m.nu2()), (0.0, 1.0, -1.0));
        let nm = spec(FamilyKind::NegMultinomial);
        assert_eq!((nm.nu0(), nm.nu1(), nm.nu2()), (0.0, 1.0, 1.0));
    }

    #[test]
    fn parameter_validation() {
        assert!(make_family(FamilyKind::Multinomial, None, Some(&[1, 3])).is_err());
        assert!(make_family(FamilyKind::NegMultinomial, None, Some(&[0])).is_err());
        assert!(make_family(FamilyKind::NegMultinomial, None, Some(&[1])).is_ok());
        assert!(make_family(FamilyKind::Gamma, Some(0.0), None).is_err());
        assert!(make_family(FamilyKind::Gamma, Some(-1.0), None).is_err());
        assert!(make_family(FamilyKind::Gamma, None, None).is_err());
        assert!(make_family(FamilyKind::Poisson, Some(1.0), None).is_err());
        assert!(make_family(FamilyKind::Normal, None, Some(&[2])).is_err());
        assert!(make_family(FamilyKind::Multinomial, None, None).is_err());
    }

    #[test]
    fn tokens_round_trip() {
        for k in FamilyKind::ALL {
            assert_eq!(k.token().parse::<FamilyKind>().unwrap(), k);
        }
        match "binomial".parse::<FamilyKind>() {
            Err(Error::UnknownFamily(t)) => assert_eq!(t, "binomial"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn variance_function_values() {
        assert_eq!(variance_function(&spec(FamilyKind::Normal), 7.0), 1.0);
        assert_eq!(variance_function(&spec(FamilyKind::Poisson), 3.0), 3.0);
        assert_eq!(variance_function(&spec(FamilyKind::Gamma), 4.0), 8.0);
    }

    #[test]
    fn moments() {
        let (m, v) = theoretical_moments(&spec(FamilyKind::NegMultinomial), 2.0, 4).unwrap();
        assert_eq!((m, v), (2.0, 1.5));
        let (m, v) = theoretical_moments(&spec(FamilyKind::Multinomial), 0.5, 2).unwrap();
        assert_eq!((m, v), (0.5, 0.125));
        let (m, v) = theoretical_moments(&spec(FamilyKind::Normal), -3.0, 1).unwrap();
        assert_eq!((m, v), (-3.0, 1.0));
        assert!(theoretical_moments(&spec(FamilyKind::Poisson), 0.0, 1).is_err());
        assert!(theoretical_moments(&spec(FamilyKind::Multinomial), 1.0, 2).is_err());
        assert!(theoretical_moments(&spec(FamilyKind::Gamma), -1.0, 1).is_err());
    }

    #[test]
    fn zero_mean_poisson_row_is_degenerate() {
        let s = spec(FamilyKind::Poisson);
        let theta = MeanMatrix(array![[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]]);
        let d = sample_matrix(&s, &theta, &TauMatrix::ones(2, 3), 11).unwrap();
        assert!(d.y.row(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sampling_is_deterministic() {
        for kind in FamilyKind::ALL {
            let s = spec(kind);
            let theta = MeanMatrix(array![[0.2, 0.3], [0.1, 0.4]]);
            let tau = if kind.uses_trials() {
                TauMatrix::from_trials(&[4, 4], 2)
            } else {
                TauMatrix::ones(2, 2)
            };
            let a = sample_matrix(&s, &theta, &tau, 5).unwrap();
            let b = sample_matrix(&s, &theta, &tau, 5).unwrap();
            assert_eq!(a, b, "{kind}");
        }
    }

    #[test]
    fn sampling_rejects_bad_inputs() {
        let m = spec(FamilyKind::Multinomial);
        let theta = MeanMatrix(array![[0.6, 0.4]]);
        assert!(matches!(
            sample_matrix(&m, &theta, &TauMatrix::from_trials(&[4], 2), 1),
            Err(Error::RowSumTooLarge { .. })
        ));
        let g = spec(FamilyKind::Gamma);
        let theta = MeanMatrix(array![[0.0, 1.0]]);
        assert!(sample_matrix(&g, &theta, &TauMatrix::ones(1, 2), 1).is_err());
        let theta = MeanMatrix(array![[1.0, 1.0]]);
        assert!(sample_matrix(&g, &theta, &TauMatrix::ones(2, 2), 1).is_err());
        let uneven = TauMatrix(array![[4, 5]]);
        assert!(sample_matrix(&m, &MeanMatrix(array![[0.2, 0.2]]), &uneven, 1).is_err());
    }

    #[test]
    fn multinomial_support() {
        let s = spec(FamilyKind::Multinomial);
        let theta = MeanMatrix(Array2::from_elem((200, 4), 0.2));
        let trials: Vec<u32> = (0..200).map(|i| 2 + (i % 5) as u32).collect();
        let tau = TauMatrix::from_trials(&trials, 4);
        let d = sample_matrix(&s, &theta, &tau, 99).unwrap();
        for (i, row) in d.y.rows().into_iter().enumerate() {
            let n = f64::from(trials[i]);
            let mut counts = 0.0;
            for &v in row {
                let w = v * n;
                assert!((w - w.round()).abs() < 1e-12 && (0.0..=1.0).contains(&v));
                counts += w.round();
            }
            assert!(counts <= n);
        }
    }

    #[test]
    fn poisson_sample_mean() {
        let s = spec(FamilyKind::Poisson);
        let m = 100_000;
        let theta = MeanMatrix(Array2::from_elem((m, 1), 2.0));
        let d = sample_matrix(&s, &theta, &TauMatrix::ones(m, 1), 2024).unwrap();
        let mean = d.y.sum() / m as f64;
        assert!((mean - 2.0).abs() <= 3.0 * (2.0 / m as f64).sqrt(), "{mean}");
    }
}
