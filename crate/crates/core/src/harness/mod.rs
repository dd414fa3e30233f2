//! Monte Carlo experiments: replicated fits, competitor losses, sup-gap
//! statistics and CSV reports.

mod cli;
mod config;
mod rates;
mod report;

use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{competitor_fit, fit, FitMode};
use crate::families::{sample_matrix, DataMatrix, FamilySpec, MeanMatrix};
use crate::optimize::OrderSpec;
use crate::risk::{self, variance_terms};
use crate::rng;

pub use cli::{run as run_cli, run_with_output};
pub use config::{ExperimentConfig, PRule, TauRule, ThetaRule, Trials};
pub use rates::{fit_rate, RateFit};
pub use report::{
    aggregate, read_report, rate_table, write_report, AggregateRow, Report, Statistic, YMetric,
};

/// One estimator's outcome in one replication; a row of the record CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRecord {
    pub rep: usize,
    pub n: usize,
    pub p: usize,
    pub estimator: String,
    pub loss: f64,
    pub risk_estimate: f64,
    pub sup_gap: Option<f64>,
    pub iters: usize,
    pub converged: bool,
}

/// Reads a headerless comma-separated numeric matrix.
pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let text = std::fs::read_to_string(path)?;
    parse_matrix(&text)
}

pub fn parse_matrix(text: &str) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(Error::Parse(format!("row {} has {} fields, expected {c}", rows + 1, record.len())))
            }
            _ => {}
        }
        for field in record.iter() {
            values.push(field.parse::<f64>().map_err(|_| Error::Parse(format!("not a number: `{field}`")))?);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Parse("empty matrix".into()))?;
    Array2::from_shape_vec((rows, cols), values).map_err(|e| Error::Parse(e.to_string()))
}

/// Formats with 17 significant digits, enough to round-trip any `f64`.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_matrix<W: std::io::Write + ?Sized>(m: &Array2<f64>, out: &mut W) -> std::io::Result<()> {
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|&v| format_f64(v)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

/// Uniform monotone `b`: one sorted uniform per tie group, assigned in order.
fn random_monotone(order: &OrderSpec, rng: &mut impl Rng) -> Vec<f64> {
    let mut draws: Vec<f64> = (0..order.num_groups()).map(|_| rng.random::<f64>()).collect();
    draws.sort_by(f64::total_cmp);
    let mut b = vec![0.0; order.len()];
    for (g, members) in order.groups().enumerate() {
        for &i in members {
            b[i] = draws[g];
        }
    }
    b
}

/// `|risk estimate - loss|` at one `(b, target)`, in one pass over the data.
fn gap_at(data: &DataMatrix, c: &Array2<f64>, theta: &MeanMatrix, b: &[f64], target: &[f64], factor: f64) -> f64 {
    let mut acc = 0.0;
    let mut comp = 0.0;
    for ((i, j), &y) in data.y.indexed_iter() {
        let bi = b[i];
        let d = y - target[j];
        let est = (1.0 - bi) * y + bi * target[j] - theta.0[(i, j)];
        let term = bi * bi * d * d + (1.0 - 2.0 * factor * bi) * c[(i, j)] - est * est;
        // Kahan step; terms have mixed signs.
        let t = term - comp;
        let s = acc + t;
        comp = (s - acc) - t;
        acc = s;
    }
    (acc / data.y.len() as f64).abs()
}

/// Lower bound on `sup |URE - loss|` over the location-shrinkage feasible set.
///
/// Evaluated at `b = 0`, at `b = 1` toward the clipped grand mean, at the
/// fitted point when given, and at `k` random feasible points. Point `i` is
/// drawn from its own stream, so a larger `k` probes a superset of points.
pub fn estimate_sup_gap(
    data: &DataMatrix,
    theta: &MeanMatrix,
    spec: &FamilySpec,
    fitted: Option<(&[f64], &[f64])>,
    k: usize,
    seed: u64,
) -> Result<f64> {
    if theta.dim() != data.y.dim() {
        return Err(Error::DimensionMismatch("theta does not match the data".into()));
    }
    let c = variance_terms(data, spec)?;
    let (n, p) = (data.n(), data.p());
    let m = data.data_range();
    let centre: Vec<f64> = risk::grand_mean(&data.y).into_iter().map(|v| v.clamp(-m, m)).collect();
    let mut gap = gap_at(data, &c, theta, &vec![0.0; n], &centre, 1.0);
    gap = gap.max(gap_at(data, &c, theta, &vec![1.0; n], &centre, 1.0));
    if let Some((b, mu)) = fitted {
        if b.len() != n || mu.len() != p {
            return Err(Error::DimensionMismatch("fitted point does not match the data".into()));
        }
        gap = gap.max(gap_at(data, &c, theta, b, mu, 1.0));
    }
    let order = OrderSpec::from_tau(&data.tau);
    for i in 0..k {
        let mut r = rng::stream(seed, &[i as u64]);
        let b = random_monotone(&order, &mut r);
        let mu: Vec<f64> = (0..p).map(|_| if m > 0.0 { r.random_range(-m..=m) } else { 0.0 }).collect();
        gap = gap.max(gap_at(data, &c, theta, &b, &mu, 1.0));
    }
    Ok(gap)
}

/// Lower bound on `sup |AURE - loss|` over the grand-mean feasible set.
pub fn estimate_sup_gap_grand_mean(
    data: &DataMatrix,
    theta: &MeanMatrix,
    spec: &FamilySpec,
    fitted: Option<&[f64]>,
    k: usize,
    seed: u64,
) -> Result<f64> {
    let n = data.n();
    if n < 2 {
        return Err(Error::TooFewRows { required: 2, got: n });
    }
    if theta.dim() != data.y.dim() {
        return Err(Error::DimensionMismatch("theta does not match the data".into()));
    }
    let c = variance_terms(data, spec)?;
    let ybar = risk::grand_mean(&data.y);
    let factor = 1.0 - 1.0 / n as f64;
    let mut gap = gap_at(data, &c, theta, &vec![0.0; n], &ybar, factor);
    gap = gap.max(gap_at(data, &c, theta, &vec![1.0; n], &ybar, factor));
    if let Some(b) = fitted {
        if b.len() != n {
            return Err(Error::DimensionMismatch("fitted weights do not match the data".into()));
        }
        gap = gap.max(gap_at(data, &c, theta, b, &ybar, factor));
    }
    let order = OrderSpec::from_tau(&data.tau);
    for i in 0..k {
        let mut r = rng::stream(seed, &[i as u64]);
        let b = random_monotone(&order, &mut r);
        gap = gap.max(gap_at(data, &c, theta, &b, &ybar, factor));
    }
    Ok(gap)
}

/// Estimator label of the fitted class in record files.
pub fn fitted_label(mode: FitMode) -> &'static str {
    match mode {
        FitMode::Location => "ure_fit",
        FitMode::GrandMean => "aure_fit",
    }
}

struct GridCell {
    n: usize,
    p: usize,
    spec: FamilySpec,
    theta: MeanMatrix,
    tau: crate::families::TauMatrix,
}

fn replicate(config: &ExperimentConfig, cell: &GridCell, rep: usize) -> Result<Vec<ReplicationRecord>> {
    let (n, p) = (cell.n, cell.p);
    let sample_seed = rng::derive_seed(config.seed, &[rng::PURPOSE_SAMPLE, n as u64, rep as u64]);
    let gap_seed = rng::derive_seed(config.seed, &[rng::PURPOSE_SUP_GAP, n as u64, rep as u64]);
    let data = sample_matrix(&cell.spec, &cell.theta, &cell.tau, sample_seed)?;
    let k = config.sup_gap_samples();

    let (fitted, estimate) = fit(&data, &cell.spec, config.mode, &config.solver)?;
    let sup_gap = match config.mode {
        FitMode::Location => estimate_sup_gap(
            &data,
            &cell.theta,
            &cell.spec,
            Some((&fitted.b, fitted.target.values())),
            k,
            gap_seed,
        )?,
        FitMode::GrandMean => {
            estimate_sup_gap_grand_mean(&data, &cell.theta, &cell.spec, Some(&fitted.b), k, gap_seed)?
        }
    };
    let mut records = Vec::with_capacity(1 + config.competitors.len());
    records.push(ReplicationRecord {
        rep,
        n,
        p,
        estimator: fitted_label(config.mode).to_string(),
        loss: risk::loss(&cell.theta, &estimate.theta_hat)?,
        risk_estimate: fitted.objective,
        sup_gap: Some(sup_gap),
        iters: fitted.iterations,
        converged: fitted.converged,
    });
    for &kind in &config.competitors {
        let comp = competitor_fit(&data, kind, Some(&cell.theta), &config.solver)?;
        records.push(ReplicationRecord {
            rep,
            n,
            p,
            estimator: kind.token().to_string(),
            loss: risk::loss(&cell.theta, &comp.estimate.theta_hat)?,
            risk_estimate: risk::ure(&data, &comp.b, &comp.mu, &cell.spec)?,
            sup_gap: None,
            iters: comp.iterations,
            converged: comp.converged,
        });
    }
    Ok(records)
}

/// Runs every replication at every grid size.
///
/// Replications run in parallel on `threads` workers (rayon's default when
/// `None`); each draws only from streams keyed by `(seed, purpose, n, rep)`,
/// and results are collected in `(n, rep)` order, so the output does not
/// depend on the degree of parallelism.
pub fn run_experiment(config: &ExperimentConfig, threads: Option<usize>) -> Result<Report> {
    let mut cells = Vec::with_capacity(config.n_grid.len());
    for &n in &config.n_grid {
        let p = config.p_rule.columns(n);
        let spec = config.family_spec(n)?;
        let tau = config.tau(n, p);
        spec.validate_tau(&tau)?;
        let theta = config.theta(n, p, &spec)?;
        cells.push(GridCell { n, p, spec, theta, tau });
    }
    let tasks: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..config.replications).map(move |r| (c, r)))
        .collect();
    let work = || -> Result<Vec<Vec<ReplicationRecord>>> {
        tasks.par_iter().map(|&(c, rep)| replicate(config, &cells[c], rep)).collect()
    };
    let nested = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    let records: Vec<ReplicationRecord> = nested.into_iter().flatten().collect();
    let aggregates = aggregate(&records);
    Ok(Report { records, aggregates })
}
