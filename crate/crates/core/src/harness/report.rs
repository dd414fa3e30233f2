//! Record CSV: one row per (replication, estimator), followed by `mean` and
//! `se` rows per (n, estimator).

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::harness::{format_f64, ReplicationRecord};
use crate::sum::sum;

pub const HEADER: [&str; 9] = ["rep", "n", "p", "estimator", "loss", "risk_estimate", "sup_gap", "iters", "converged"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Mean,
    Se,
}

impl Statistic {
    fn token(self) -> &'static str {
        match self {
            Statistic::Mean => "mean",
            Statistic::Se => "se",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub n: usize,
    pub p: usize,
    pub estimator: String,
    pub stat: Statistic,
    pub loss: f64,
    pub risk_estimate: f64,
    pub sup_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub records: Vec<ReplicationRecord>,
    pub aggregates: Vec<AggregateRow>,
}

/// Sample mean and standard error of the mean (zero for fewer than two values).
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = sum(values.iter().copied()) / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = sum(values.iter().map(|v| (v - mean) * (v - mean))) / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// Means and standard errors per `(n, estimator)`, in order of first appearance.
pub fn aggregate(records: &[ReplicationRecord]) -> Vec<AggregateRow> {
    let mut keys: Vec<(usize, usize, &str)> = Vec::new();
    for r in records {
        if !keys.iter().any(|&(n, _, e)| n == r.n && e == r.estimator) {
            keys.push((r.n, r.p, &r.estimator));
        }
    }
    let mut out = Vec::with_capacity(2 * keys.len());
    for (n, p, est) in keys {
        let rows: Vec<&ReplicationRecord> = records.iter().filter(|r| r.n == n && r.estimator == est).collect();
        let losses: Vec<f64> = rows.iter().map(|r| r.loss).collect();
        let risks: Vec<f64> = rows.iter().map(|r| r.risk_estimate).collect();
        let gaps: Option<Vec<f64>> = rows.iter().map(|r| r.sup_gap).collect();
        let (lm, ls) = mean_se(&losses);
        let (rm, rs) = mean_se(&risks);
        let (gm, gs) = match gaps.as_deref() {
            Some(g) => {
                let (m, s) = mean_se(g);
                (Some(m), Some(s))
            }
            None => (None, None),
        };
        let row = |stat, loss, risk_estimate, sup_gap| AggregateRow {
            n,
            p,
            estimator: est.to_string(),
            stat,
            loss,
            risk_estimate,
            sup_gap,
        };
        out.push(row(Statistic::Mean, lm, rm, gm));
        out.push(row(Statistic::Se, ls, rs, gs));
    }
    out
}

pub fn write_report(report: &Report, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in &report.records {
        w.write_record([
            r.rep.to_string(),
            r.n.to_string(),
            r.p.to_string(),
            r.estimator.clone(),
            format_f64(r.loss),
            format_f64(r.risk_estimate),
            r.sup_gap.map(format_f64).unwrap_or_default(),
            r.iters.to_string(),
            r.converged.to_string(),
        ])?;
    }
    for a in &report.aggregates {
        w.write_record([
            a.stat.token().to_string(),
            a.n.to_string(),
            a.p.to_string(),
            a.estimator.clone(),
            format_f64(a.loss),
            format_f64(a.risk_estimate),
            a.sup_gap.map(format_f64).unwrap_or_default(),
            String::new(),
            String::new(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, line: usize) -> Result<T> {
    let raw = rec.get(idx).unwrap_or("");
    raw.parse()
        .map_err(|_| Error::Parse(format!("line {line}: cannot parse `{raw}` in column `{}`", HEADER[idx])))
}

fn optional(rec: &csv::StringRecord, idx: usize, line: usize) -> Result<Option<f64>> {
    match rec.get(idx) {
        None | Some("") => Ok(None),
        Some(_) => field(rec, idx, line).map(Some),
    }
}

pub fn read_report(input: impl Read) -> Result<Report> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(Error::Parse(format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut report = Report::default();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        let stat = match rec.get(0) {
            Some("mean") => Some(Statistic::Mean),
            Some("se") => Some(Statistic::Se),
            _ => None,
        };
        let n = field(&rec, 1, line)?;
        let p = field(&rec, 2, line)?;
        let estimator = rec.get(3).unwrap_or("").to_string();
        let loss = field(&rec, 4, line)?;
        let risk_estimate = field(&rec, 5, line)?;
        let sup_gap = optional(&rec, 6, line)?;
        match stat {
            Some(stat) => report.aggregates.push(AggregateRow { n, p, estimator, stat, loss, risk_estimate, sup_gap }),
            None => report.records.push(ReplicationRecord {
                rep: field(&rec, 0, line)?,
                n,
                p,
                estimator,
                loss,
                risk_estimate,
                sup_gap,
                iters: field(&rec, 7, line)?,
                converged: field(&rec, 8, line)?,
            }),
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YMetric {
    MeanSupGap,
    /// Mean over replications of `loss(estimator) - loss(oracle_loss)`.
    MeanExcessLoss,
}

impl std::str::FromStr for YMetric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean_sup_gap" => Ok(YMetric::MeanSupGap),
            "mean_excess_loss" => Ok(YMetric::MeanExcessLoss),
            other => Err(Error::InvalidArgument(format!("unknown metric `{other}`"))),
        }
    }
}

/// `(n, mean, se)` per grid size for one estimator.
pub fn rate_table(records: &[ReplicationRecord], estimator: &str, metric: YMetric) -> Result<Vec<(usize, f64, f64)>> {
    let mut ns: Vec<usize> = Vec::new();
    for r in records.iter().filter(|r| r.estimator == estimator) {
        if !ns.contains(&r.n) {
            ns.push(r.n);
        }
    }
    if ns.is_empty() {
        return Err(Error::InvalidArgument(format!("no records for estimator `{estimator}`")));
    }
    let mut table = Vec::with_capacity(ns.len());
    for n in ns {
        let rows = records.iter().filter(|r| r.n == n && r.estimator == estimator);
        let values: Vec<f64> = match metric {
            YMetric::MeanSupGap => rows
                .map(|r| r.sup_gap.ok_or_else(|| Error::InvalidArgument(format!("`{estimator}` has no sup_gap values"))))
                .collect::<Result<_>>()?,
            YMetric::MeanExcessLoss => rows
                .map(|r| {
                    records
                        .iter()
                        .find(|o| o.n == n && o.rep == r.rep && o.estimator == "oracle_loss")
                        .map(|o| r.loss - o.loss)
                        .ok_or_else(|| Error::InvalidArgument("excess loss needs oracle_loss records".into()))
                })
                .collect::<Result<_>>()?,
        };
        let (m, s) = mean_se(&values);
        table.push((n, m, s));
    }
    Ok(table)
}
