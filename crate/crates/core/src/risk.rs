//! Squared-error loss, the two unbiased risk estimates and the exact risk of
//! a fixed location-shrinkage estimator.

use std::ops::Deref;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::families::{FamilySpec, MeanMatrix, TauMatrix};
use crate::optimize::OrderSpec;
use crate::sum::{sum, NeumaierSum};

pub use crate::families::DataMatrix;

/// Per-row shrinkage weights `b`, checked against the box and the tau ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkageWeights(Vec<f64>);

impl ShrinkageWeights {
    pub fn new(b: Vec<f64>, order: &OrderSpec) -> Result<Self> {
        if b.len() != order.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} rows",
                b.len(),
                order.len()
            )));
        }
        if let Some((i, v)) = b.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Infeasible(format!("b[{i}] = {v} outside [0, 1]")));
        }
        if !order.is_monotone(&b) {
            return Err(Error::Infeasible(
                "b increases shrinkage for a row with larger total tau".into(),
            ));
        }
        Ok(ShrinkageWeights(b))
    }

    /// Same value for every row; feasible under any ordering.
    pub fn constant(n: usize, value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::Infeasible(format!("b = {value} outside [0, 1]")));
        }
        Ok(ShrinkageWeights(vec![value; n]))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ShrinkageWeights {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Shrinkage location `mu`, bounded coordinatewise by the data range.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationVector(Vec<f64>);

impl LocationVector {
    pub fn new(mu: Vec<f64>, data_range: f64) -> Result<Self> {
        if let Some((j, v)) = mu.iter().enumerate().find(|(_, v)| !(v.abs() <= data_range)) {
            return Err(Error::Infeasible(format!(
                "mu[{j}] = {v} outside the data range [-{data_range}, {data_range}]"
            )));
        }
        Ok(LocationVector(mu))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for LocationVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// `(1/np) sum (estimate - theta)^2`.
pub fn loss(theta: &MeanMatrix, estimate: &Array2<f64>) -> Result<f64> {
    if theta.dim() != estimate.dim() {
        return Err(Error::DimensionMismatch(format!(
            "theta is {:?} but estimate is {:?}",
            theta.dim(),
            estimate.dim()
        )));
    }
    let total = sum(theta.0.iter().zip(estimate).map(|(t, e)| (e - t) * (e - t)));
    Ok(total / theta.0.len() as f64)
}

/// Unbiased estimate of `Var(Y_ij)`: `V(Y_ij) / (tau_ij + nu2)` for every entry.
pub fn variance_terms(data: &DataMatrix, spec: &FamilySpec) -> Result<Array2<f64>> {
    let mut out = Array2::zeros(data.y.dim());
    for ((idx, &y), &t) in data.y.indexed_iter().zip(data.tau.0.iter()) {
        let denom = f64::from(t) + spec.nu2();
        if denom <= 0.0 {
            return Err(Error::DegenerateDenominator(denom));
        }
        out[idx] = spec.variance(y) / denom;
    }
    Ok(out)
}

fn check_lengths(data: &DataMatrix, b: &[f64], mu: Option<&[f64]>) -> Result<()> {
    if b.len() != data.n() {
        return Err(Error::DimensionMismatch(format!("{} weights for {} rows", b.len(), data.n())));
    }
    if let Some(mu) = mu {
        if mu.len() != data.p() {
            return Err(Error::DimensionMismatch(format!(
                "location of length {} for {} columns",
                mu.len(),
                data.p()
            )));
        }
    }
    Ok(())
}

/// Unbiased risk estimate of the location-shrinkage estimator at fixed `(b, mu)`.
///
/// Not clamped: the value can be negative.
pub fn ure(data: &DataMatrix, b: &[f64], mu: &[f64], spec: &FamilySpec) -> Result<f64> {
    check_lengths(data, b, Some(mu))?;
    let c = variance_terms(data, spec)?;
    Ok(ure_with_terms(data, &c, b, mu))
}

pub(crate) fn ure_with_terms(data: &DataMatrix, c: &Array2<f64>, b: &[f64], mu: &[f64]) -> f64 {
    let mut acc = NeumaierSum::default();
    for (i, (yr, cr)) in data.y.rows().into_iter().zip(c.rows()).enumerate() {
        let bi = b[i];
        for j in 0..yr.len() {
            let d = yr[j] - mu[j];
            acc.add(bi * bi * d * d + (1.0 - 2.0 * bi) * cr[j]);
        }
    }
    acc.value() / data.y.len() as f64
}

/// Unbiased risk estimate of the grand-mean shrinkage estimator at fixed `b`.
pub fn aure(data: &DataMatrix, b: &[f64], spec: &FamilySpec) -> Result<f64> {
    if data.n() < 2 {
        return Err(Error::TooFewRows { required: 2, got: data.n() });
    }
    check_lengths(data, b, None)?;
    let c = variance_terms(data, spec)?;
    Ok(aure_with_terms(data, &c, b))
}

pub(crate) fn aure_with_terms(data: &DataMatrix, c: &Array2<f64>, b: &[f64]) -> f64 {
    let ybar = grand_mean(&data.y);
    let factor = 1.0 - 1.0 / data.n() as f64;
    let mut acc = NeumaierSum::default();
    for (i, (yr, cr)) in data.y.rows().into_iter().zip(c.rows()).enumerate() {
        let bi = b[i];
        for j in 0..yr.len() {
            let d = yr[j] - ybar[j];
            acc.add(bi * bi * d * d + (1.0 - 2.0 * factor * bi) * cr[j]);
        }
    }
    acc.value() / data.y.len() as f64
}

/// Exact risk `(1/np) sum [b_i^2 (theta_ij - mu_j)^2 + (1 - b_i)^2 V(theta_ij) / tau_ij]`.
pub fn true_risk(theta: &MeanMatrix, b: &[f64], mu: &[f64], spec: &FamilySpec, tau: &TauMatrix) -> Result<f64> {
    let (n, p) = theta.dim();
    if tau.dim() != (n, p) {
        return Err(Error::DimensionMismatch(format!(
            "theta is {:?} but tau is {:?}",
            theta.dim(),
            tau.dim()
        )));
    }
    if b.len() != n || mu.len() != p {
        return Err(Error::DimensionMismatch("b or mu length does not match theta".into()));
    }
    spec.validate_mean(theta)?;
    let mut acc = NeumaierSum::default();
    for ((i, j), &t) in theta.0.indexed_iter() {
        let bi = b[i];
        let bias = t - mu[j];
        let var = spec.variance(t) / f64::from(tau.0[(i, j)]);
        acc.add(bi * bi * bias * bias + (1.0 - bi) * (1.0 - bi) * var);
    }
    Ok(acc.value() / (n * p) as f64)
}

/// Column means `Ybar_j`.
pub fn grand_mean(y: &Array2<f64>) -> Vec<f64> {
    let n = y.nrows() as f64;
    y.columns().into_iter().map(|c| sum(c.iter().copied()) / n).collect()
}
