//! Command-line front end: `fit`, `simulate` and `rates`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::estimators::{fit, FitMode};
use crate::families::{make_family, DataMatrix, FamilyKind, TauMatrix};
use crate::harness::report::{aggregate, read_report, rate_table, write_report, YMetric};
use crate::harness::{fitted_label, format_f64, read_matrix, run_experiment, write_matrix, ExperimentConfig};
use crate::harness::fit_rate;
use crate::optimize::{SolverOptions, Target};

#[derive(Debug, Parser)]
#[command(name = "qvf-shrink", version, about = "Shrinkage estimation for exponential families with quadratic variance")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a shrinkage estimator to a data matrix.
    Fit {
        /// Headerless comma-separated data matrix.
        #[arg(long)]
        data: PathBuf,
        /// Optional integer weight matrix of the same shape (defaults to ones or N).
        #[arg(long)]
        tau: Option<PathBuf>,
        #[arg(long)]
        family: String,
        /// Gamma shape.
        #[arg(long)]
        lambda: Option<f64>,
        /// Trial counts: a single value for every row or one per row.
        #[arg(short = 'N', long = "trials", value_delimiter = ',')]
        trials: Option<Vec<u32>>,
        /// location | grand_mean
        #[arg(long, default_value = "location")]
        mode: String,
        /// Where to write the estimate matrix (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Run a Monte Carlo experiment and write the record CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads for replications.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Aggregate a record CSV and fit log-log rates.
    Rates {
        #[arg(long)]
        input: PathBuf,
        /// Estimator label; defaults to the fitted estimator in the file.
        #[arg(long)]
        estimator: Option<String>,
        /// mean_sup_gap | mean_excess_loss
        #[arg(long, default_value = "mean_sup_gap")]
        y: String,
    },
}

/// Runs the CLI with process stdout/stderr and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with_output(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with_output<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Fit { data, tau, family, lambda, trials, mode, out: dest, max_iter, tol } => {
            let kind = FamilyKind::from_str(&family)?;
            let mode = FitMode::from_str(&mode)?;
            let y = read_matrix(&data)?;
            let (n, p) = y.dim();
            let trials = trials.map(|t| if t.len() == 1 { vec![t[0]; n] } else { t });
            if let Some(t) = &trials {
                if t.len() != n {
                    return Err(Error::DimensionMismatch(format!("{} trial counts for {n} rows", t.len())));
                }
            }
            let spec = make_family(kind, lambda, trials.as_deref())?;
            let tau = match (tau, &trials) {
                (Some(path), _) => {
                    let m = read_matrix(&path)?;
                    if m.iter().any(|v| *v < 1.0 || v.fract() != 0.0 || *v > f64::from(u32::MAX)) {
                        return Err(Error::InvalidTau("tau entries must be positive integers".into()));
                    }
                    TauMatrix(m.mapv(|v| v as u32))
                }
                (None, Some(t)) => TauMatrix::from_trials(t, p),
                (None, None) => TauMatrix::ones(n, p),
            };
            spec.validate_tau(&tau)?;
            let data = DataMatrix::new(y, tau)?;
            let defaults = SolverOptions::default();
            let opts = SolverOptions {
                max_outer_iterations: max_iter.unwrap_or(defaults.max_outer_iterations),
                tolerance: tol.unwrap_or(defaults.tolerance),
                ..defaults
            };
            let (result, estimate) = fit(&data, &spec, mode, &opts)?;
            let join = |v: &[f64]| v.iter().map(|&x| format_f64(x)).collect::<Vec<_>>().join(",");
            writeln!(out, "family,{kind}")?;
            writeln!(out, "mode,{}", if mode == FitMode::Location { "location" } else { "grand_mean" })?;
            writeln!(out, "objective,{}", format_f64(result.objective))?;
            writeln!(out, "iterations,{}", result.iterations)?;
            writeln!(out, "converged,{}", result.converged)?;
            writeln!(out, "b,{}", join(&result.b))?;
            match &result.target {
                Target::Location(mu) => writeln!(out, "mu,{}", join(mu))?,
                Target::GrandMean(ybar) => writeln!(out, "grand_mean,{}", join(ybar))?,
            }
            match dest {
                Some(path) => {
                    let mut w = BufWriter::new(File::create(path)?);
                    write_matrix(&estimate.theta_hat, &mut w)?;
                    w.flush()?;
                }
                None => {
                    writeln!(out, "estimate")?;
                    write_matrix(&estimate.theta_hat, out)?;
                }
            }
        }
        Command::Simulate { config, seed, out: dest, threads } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let report = run_experiment(&cfg, threads)?;
            let mut w = BufWriter::new(File::create(&dest)?);
            write_report(&report, &mut w)?;
            w.flush()?;
            writeln!(
                out,
                "wrote {} records ({} grid sizes x {} replications) to {}",
                report.records.len(),
                cfg.n_grid.len(),
                cfg.replications,
                dest.display()
            )?;
        }
        Command::Rates { input, estimator, y } => {
            let metric = YMetric::from_str(&y)?;
            let report = read_report(BufReader::new(File::open(&input)?))?;
            let recomputed = aggregate(&report.records);
            if !report.aggregates.is_empty() {
                let drift = aggregate_drift(&report.aggregates, &recomputed)?;
                writeln!(out, "aggregate_check,max_abs_diff,{}", format_f64(drift))?;
                if drift > 1e-12 {
                    return Err(Error::Parse(format!("stored aggregates differ from records by {drift}")));
                }
            }
            let estimator = match estimator {
                Some(e) => e,
                None => [fitted_label(FitMode::Location), fitted_label(FitMode::GrandMean)]
                    .into_iter()
                    .find(|l| report.records.iter().any(|r| r.estimator == *l))
                    .ok_or_else(|| Error::InvalidArgument("no fitted-estimator records; pass --estimator".into()))?
                    .to_string(),
            };
            let table = rate_table(&report.records, &estimator, metric)?;
            writeln!(out, "n,{y},se")?;
            for (n, m, s) in &table {
                writeln!(out, "{n},{},{}", format_f64(*m), format_f64(*s))?;
            }
            let pts: Vec<(f64, f64)> = table.iter().map(|&(n, m, _)| (n as f64, m)).collect();
            let rate = fit_rate(&pts)?;
            writeln!(out, "slope,{}", format_f64(rate.slope))?;
            writeln!(out, "intercept,{}", format_f64(rate.intercept))?;
            writeln!(out, "slope_stderr,{}", format_f64(rate.stderr))?;
        }
    }
    Ok(())
}

fn aggregate_drift(
    stored: &[crate::harness::AggregateRow],
    recomputed: &[crate::harness::AggregateRow],
) -> Result<f64> {
    if stored.len() != recomputed.len() {
        return Err(Error::Parse(format!(
            "{} stored aggregate rows but records yield {}",
            stored.len(),
            recomputed.len()
        )));
    }
    let mut drift: f64 = 0.0;
    for (a, b) in stored.iter().zip(recomputed) {
        if a.n != b.n || a.estimator != b.estimator || a.stat != b.stat {
            return Err(Error::Parse("stored aggregate rows do not match the records".into()));
        }
        drift = drift.max((a.loss - b.loss).abs()).max((a.risk_estimate - b.risk_estimate).abs());
        match (a.sup_gap, b.sup_gap) {
            (Some(x), Some(y)) => drift = drift.max((x - y).abs()),
            (None, None) => {}
            _ => return Err(Error::Parse("sup_gap aggregate presence mismatch".into())),
        }
    }
    Ok(drift)
}
