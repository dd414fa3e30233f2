//! Minimization of the risk estimates over the feasible shrinkage parameters.

mod isotonic;
mod oracle;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::families::{DataMatrix, FamilySpec, TauMatrix};
use crate::risk::{self, LocationVector, ShrinkageWeights};

pub use isotonic::isotonic_box_projection;
pub(crate) use isotonic::solve_monotone_quadratic;
pub use oracle::{grid_oracle_aure, grid_oracle_ure, GridOptimum};

/// Rows sorted by descending total tau, with equal totals grouped.
///
/// A feasible `b` is nondecreasing along this permutation and constant within
/// each tie group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderSpec {
    perm: Vec<usize>,
    // Group boundaries into `perm`; group g is perm[bounds[g]..bounds[g + 1]].
    bounds: Vec<usize>,
}

impl OrderSpec {
    pub fn from_row_sums(sums: &[u64]) -> Self {
        let mut perm: Vec<usize> = (0..sums.len()).collect();
        perm.sort_by(|&a, &b| sums[b].cmp(&sums[a]));
        let mut bounds = vec![0];
        for k in 1..perm.len() {
            if sums[perm[k]] != sums[perm[k - 1]] {
                bounds.push(k);
            }
        }
        bounds.push(perm.len());
        if perm.is_empty() {
            bounds = vec![0];
        }
        OrderSpec { perm, bounds }
    }

    pub fn from_tau(tau: &TauMatrix) -> Self {
        Self::from_row_sums(&tau.row_sums())
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn num_groups(&self) -> usize {
        self.bounds.len() - 1
    }

    /// Tie groups, from largest to smallest total tau.
    pub fn groups(&self) -> impl Iterator<Item = &[usize]> + '_ {
        self.bounds.windows(2).map(move |w| &self.perm[w[0]..w[1]])
    }

    /// Exact check: constant within groups, nondecreasing across groups.
    pub fn is_monotone(&self, b: &[f64]) -> bool {
        if b.len() != self.len() {
            return false;
        }
        let mut prev = f64::NEG_INFINITY;
        for g in self.groups() {
            let v = b[g[0]];
            if g.iter().any(|&i| b[i] != v) || v < prev {
                return false;
            }
            prev = v;
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuUpdate {
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_outer_iterations: usize,
    /// Stop once an outer iteration lowers the objective by less than this.
    pub tolerance: f64,
    pub mu_update: MuUpdate,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { max_outer_iterations: 200, tolerance: 1e-10, mu_update: MuUpdate::ClosedForm }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer_iterations == 0 {
            return Err(Error::InvalidArgument("max_outer_iterations must be >= 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// The shrinkage target of a fit.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Location(LocationVector),
    /// Column means of the data.
    GrandMean(Vec<f64>),
}

impl Target {
    pub fn values(&self) -> &[f64] {
        match self {
            Target::Location(mu) => mu,
            Target::GrandMean(ybar) => ybar,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub b: ShrinkageWeights,
    pub target: Target,
    /// Risk estimate at `(b, target)`, recomputed from scratch.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every half step of the run that produced this fit.
    pub trace: Vec<f64>,
}

/// Exact minimizer of the grand-mean risk estimate over the feasible `b`.
///
/// The estimate is separable: row `i` contributes `A_i b_i^2 - 2 (1 - 1/n) S_i b_i`
/// with `A_i = sum_j (Y_ij - Ybar_j)^2` and `S_i = sum_j V(Y_ij) / (tau_ij + nu2)`.
pub fn minimize_aure(data: &DataMatrix, spec: &FamilySpec) -> Result<FitResult> {
    let n = data.n();
    if n < 2 {
        return Err(Error::TooFewRows { required: 2, got: n });
    }
    let c = risk::variance_terms(data, spec)?;
    let ybar = risk::grand_mean(&data.y);
    let factor = 1.0 - 1.0 / n as f64;
    let quad = row_sq_dist(&data.y, &ybar);
    let lin: Vec<f64> = c.rows().into_iter().map(|r| factor * r.sum()).collect();
    let order = OrderSpec::from_tau(&data.tau);
    let b = solve_monotone_quadratic(&quad, &lin, &vec![1.0; n], &order);
    let objective = risk::aure_with_terms(data, &c, &b);
    Ok(FitResult {
        b: ShrinkageWeights::new(b, &order)?,
        target: Target::GrandMean(ybar),
        objective,
        iterations: 1,
        converged: true,
        trace: vec![objective],
    })
}

/// Coordinate-descent minimization of the location risk estimate over `(b, mu)`.
///
/// Alternates an exact `b` step (monotone projection of the per-row quadratic)
/// with an exact `mu` step (clipped weighted column means). Several starting
/// points are tried; the lowest objective wins.
pub fn minimize_ure(data: &DataMatrix, spec: &FamilySpec, opts: &SolverOptions) -> Result<FitResult> {
    opts.validate()?;
    let c = risk::variance_terms(data, spec)?;
    let order = OrderSpec::from_tau(&data.tau);
    let problem = ShrinkageProblem {
        y: &data.y,
        resid: None,
        lin: c.rows().into_iter().map(|r| r.sum()).collect(),
        order: &order,
        bound: data.data_range(),
        free_pref: 0.5,
    };
    let run = problem.solve(opts, |b, mu| risk::ure_with_terms(data, &c, b, mu));
    finish(run, &order, data.data_range())
}

fn finish(run: CdRun, order: &OrderSpec, bound: f64) -> Result<FitResult> {
    Ok(FitResult {
        b: ShrinkageWeights::new(run.b, order)?,
        target: Target::Location(LocationVector::new(run.mu, bound)?),
        objective: run.objective,
        iterations: run.iterations,
        converged: run.converged,
        trace: run.trace,
    })
}

fn row_sq_dist(y: &Array2<f64>, mu: &[f64]) -> Vec<f64> {
    y.rows()
        .into_iter()
        .map(|r| r.iter().zip(mu).map(|(v, m)| (v - m) * (v - m)).sum())
        .collect()
}

#[derive(Debug, Clone)]
pub(crate) struct CdRun {
    pub b: Vec<f64>,
    pub mu: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
}

/// Objectives of the form
/// `sum_ij [b_i^2 (Y_ij - mu_j)^2 + 2 b_i (mu_j - Y_ij) r_ij] - 2 sum_i b_i S_i + const`
/// over the location-shrinkage feasible set.
///
/// The risk estimate has `r = 0`; the realized loss against known means has
/// `r = Y - theta` and `S = 0`.
pub(crate) struct ShrinkageProblem<'a> {
    pub y: &'a Array2<f64>,
    pub resid: Option<&'a Array2<f64>>,
    pub lin: Vec<f64>,
    pub order: &'a OrderSpec,
    pub bound: f64,
    /// Value preferred by rows on which the objective does not depend.
    pub free_pref: f64,
}

enum Start {
    Weights(f64),
    Location(Vec<f64>),
}

impl ShrinkageProblem<'_> {
    fn b_step(&self, mu: &[f64]) -> Vec<f64> {
        let quad = row_sq_dist(self.y, mu);
        let mut lin = self.lin.clone();
        if let Some(r) = self.resid {
            for (i, (yr, rr)) in self.y.rows().into_iter().zip(r.rows()).enumerate() {
                lin[i] += yr.iter().zip(rr).zip(mu).map(|((y, r), m)| r * (y - m)).sum::<f64>();
            }
        }
        let pref = vec![self.free_pref; quad.len()];
        solve_monotone_quadratic(&quad, &lin, &pref, self.order)
    }

    fn mu_step(&self, b: &[f64]) -> Vec<f64> {
        let w: f64 = b.iter().map(|v| v * v).sum();
        if w == 0.0 {
            return risk::grand_mean(self.y).into_iter().map(|m| m.clamp(-self.bound, self.bound)).collect();
        }
        let p = self.y.ncols();
        let mut num = vec![0.0; p];
        for (i, yr) in self.y.rows().into_iter().enumerate() {
            let b2 = b[i] * b[i];
            for j in 0..p {
                num[j] += b2 * yr[j];
            }
            if let Some(r) = self.resid {
                for j in 0..p {
                    num[j] -= b[i] * r[(i, j)];
                }
            }
        }
        num.into_iter().map(|s| (s / w).clamp(-self.bound, self.bound)).collect()
    }

    fn starts(&self) -> Vec<Start> {
        let mut starts = vec![Start::Weights(0.5), Start::Weights(0.0), Start::Weights(1.0)];
        starts.push(Start::Location(vec![0.0; self.y.ncols()]));
        // Small problems also start from every row; the joint objective is not convex.
        if self.y.nrows() <= SMALL_PROBLEM_ROWS {
            for r in self.y.rows() {
                starts.push(Start::Location(r.to_vec()));
            }
        }
        starts
    }

    pub fn solve(&self, opts: &SolverOptions, objective: impl Fn(&[f64], &[f64]) -> f64) -> CdRun {
        let mut best: Option<CdRun> = None;
        for start in self.starts() {
            let run = self.descend(start, opts, &objective);
            if best.as_ref().is_none_or(|b| run.objective < b.objective) {
                best = Some(run);
            }
        }
        best.expect("at least one start")
    }

    fn descend(&self, start: Start, opts: &SolverOptions, objective: &impl Fn(&[f64], &[f64]) -> f64) -> CdRun {
        let n = self.y.nrows();
        let (mut b, mut mu, mut prev) = match start {
            Start::Weights(v) => {
                let b = vec![v; n];
                let mu = self.mu_step(&b);
                let f = objective(&b, &mu);
                (b, mu, f)
            }
            Start::Location(mu) => (vec![0.0; n], mu, f64::INFINITY),
        };
        let mut trace = Vec::with_capacity(2 * opts.max_outer_iterations);
        let mut converged = false;
        let mut iterations = 0;
        let mut current = prev;
        while iterations < opts.max_outer_iterations {
            iterations += 1;
            b = self.b_step(&mu);
            let after_b = objective(&b, &mu);
            debug_assert_descent(current, after_b);
            trace.push(after_b);
            mu = self.mu_step(&b);
            current = objective(&b, &mu);
            debug_assert_descent(after_b, current);
            trace.push(current);
            if prev - current < opts.tolerance {
                converged = true;
                break;
            }
            prev = current;
        }
        CdRun { b, mu, objective: current, iterations, converged, trace }
    }
}

const SMALL_PROBLEM_ROWS: usize = 8;

#[inline]
fn debug_assert_descent(before: f64, after: f64) {
    debug_assert!(
        after <= before + 1e-10 * before.abs().max(1.0),
        "coordinate step increased the objective: {before} -> {after}"
    );
}
