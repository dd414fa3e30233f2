//! Shrinkage estimators and the fixed competitors used in dominance experiments.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::families::{DataMatrix, FamilySpec, MeanMatrix};
use crate::optimize::{self, FitResult, OrderSpec, ShrinkageProblem, SolverOptions, Target};
use crate::risk::{self, LocationVector, ShrinkageWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    LocationShrinkage,
    GrandMeanShrinkage,
    NoShrinkage,
    FixedCompetitor,
    /// Uses the true means; only meaningful in simulation.
    OracleLoss,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateMatrix {
    pub theta_hat: Array2<f64>,
    pub provenance: Provenance,
}

fn shrink(y: &Array2<f64>, b: &[f64], target: &[f64]) -> Array2<f64> {
    Array2::from_shape_fn(y.dim(), |(i, j)| (1.0 - b[i]) * y[(i, j)] + b[i] * target[j])
}

fn check_shapes(data: &DataMatrix, b: &[f64], target: Option<&[f64]>) -> Result<()> {
    if b.len() != data.n() {
        return Err(Error::DimensionMismatch(format!("{} weights for {} rows", b.len(), data.n())));
    }
    if let Some(t) = target {
        if t.len() != data.p() {
            return Err(Error::DimensionMismatch(format!("target of length {} for {} columns", t.len(), data.p())));
        }
    }
    Ok(())
}

/// `(1 - b_i) Y_ij + b_i mu_j`, after checking `(b, mu)` against the data's
/// ordering and range.
pub fn shrink_to_location(data: &DataMatrix, b: &ShrinkageWeights, mu: &LocationVector) -> Result<EstimateMatrix> {
    check_shapes(data, b, Some(mu))?;
    if !OrderSpec::from_tau(&data.tau).is_monotone(b) {
        return Err(Error::Infeasible("b violates the tau ordering of this data".into()));
    }
    let m = data.data_range();
    if mu.iter().any(|v| v.abs() > m) {
        return Err(Error::Infeasible(format!("mu leaves the data range [-{m}, {m}]")));
    }
    Ok(EstimateMatrix { theta_hat: shrink(&data.y, b, mu), provenance: Provenance::LocationShrinkage })
}

/// `(1 - b_i) Y_ij + b_i Ybar_j`.
pub fn shrink_to_grand_mean(data: &DataMatrix, b: &[f64]) -> Result<EstimateMatrix> {
    check_shapes(data, b, None)?;
    let ybar = risk::grand_mean(&data.y);
    Ok(EstimateMatrix { theta_hat: shrink(&data.y, b, &ybar), provenance: Provenance::GrandMeanShrinkage })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    Location,
    GrandMean,
}

impl FromStr for FitMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "location" => Ok(FitMode::Location),
            "grand_mean" | "grand-mean" | "grandmean" => Ok(FitMode::GrandMean),
            other => Err(Error::InvalidArgument(format!("unknown mode `{other}`"))),
        }
    }
}

/// Minimizes the risk estimate for the chosen class and materializes the estimate.
pub fn fit(data: &DataMatrix, spec: &FamilySpec, mode: FitMode, opts: &SolverOptions) -> Result<(FitResult, EstimateMatrix)> {
    let result = match mode {
        FitMode::Location => optimize::minimize_ure(data, spec, opts)?,
        FitMode::GrandMean => optimize::minimize_aure(data, spec)?,
    };
    let estimate = match &result.target {
        Target::Location(mu) => shrink_to_location(data, &result.b, mu)?,
        Target::GrandMean(_) => shrink_to_grand_mean(data, &result.b)?,
    };
    Ok((result, estimate))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompetitorKind {
    NoShrinkage,
    HalfToZero,
    OracleLoss,
}

impl CompetitorKind {
    pub fn token(self) -> &'static str {
        match self {
            CompetitorKind::NoShrinkage => "no_shrinkage",
            CompetitorKind::HalfToZero => "half_to_zero",
            CompetitorKind::OracleLoss => "oracle_loss",
        }
    }
}

impl fmt::Display for CompetitorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for CompetitorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [CompetitorKind::NoShrinkage, CompetitorKind::HalfToZero, CompetitorKind::OracleLoss]
            .into_iter()
            .find(|k| k.token() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown competitor `{s}`")))
    }
}

/// A competitor together with the feasible `(b, mu)` that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct CompetitorFit {
    pub b: Vec<f64>,
    pub mu: Vec<f64>,
    pub estimate: EstimateMatrix,
    pub iterations: usize,
    pub converged: bool,
}

/// Fixed members of the location-shrinkage class, plus the loss-minimizing
/// member when the true means are supplied.
pub fn competitor(data: &DataMatrix, kind: CompetitorKind, theta: Option<&MeanMatrix>) -> Result<EstimateMatrix> {
    competitor_fit(data, kind, theta, &SolverOptions::default()).map(|c| c.estimate)
}

pub fn competitor_fit(
    data: &DataMatrix,
    kind: CompetitorKind,
    theta: Option<&MeanMatrix>,
    opts: &SolverOptions,
) -> Result<CompetitorFit> {
    let (n, p) = (data.n(), data.p());
    let m = data.data_range();
    let fixed = |b: f64, mu: f64, provenance| {
        let b = vec![b; n];
        let mu = vec![mu.clamp(-m, m); p];
        let theta_hat = shrink(&data.y, &b, &mu);
        CompetitorFit { b, mu, estimate: EstimateMatrix { theta_hat, provenance }, iterations: 0, converged: true }
    };
    match kind {
        CompetitorKind::NoShrinkage => Ok(fixed(0.0, 0.0, Provenance::NoShrinkage)),
        CompetitorKind::HalfToZero => Ok(fixed(0.5, 0.0, Provenance::FixedCompetitor)),
        CompetitorKind::OracleLoss => {
            let theta = theta.ok_or(Error::MissingTheta)?;
            if theta.dim() != data.y.dim() {
                return Err(Error::DimensionMismatch("theta does not match the data".into()));
            }
            opts.validate()?;
            let resid = &data.y - &theta.0;
            let order = OrderSpec::from_tau(&data.tau);
            let problem = ShrinkageProblem {
                y: &data.y,
                resid: Some(&resid),
                lin: vec![0.0; n],
                order: &order,
                bound: m,
                free_pref: 0.5,
            };
            let run = problem.solve(opts, |b, mu| {
                risk::loss(theta, &shrink(&data.y, b, mu)).expect("shapes checked")
            });
            let theta_hat = shrink(&data.y, &run.b, &run.mu);
            Ok(CompetitorFit {
                b: run.b,
                mu: run.mu,
                estimate: EstimateMatrix { theta_hat, provenance: Provenance::OracleLoss },
                iterations: run.iterations,
                converged: run.converged,
            })
        }
    }
}
