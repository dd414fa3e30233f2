//! Experiment configuration: a flat TOML table.
//!
//! ```toml
//! family = "poisson"          # normal | poisson | gamma | multinomial | negmultinomial
//! lambda = 2.0                # gamma shape
//! N = 4                       # trial count(s) for the (negative) multinomial, int or list
//! theta_rule = "uniform:0.5:4"   # uniform:LO:HI | constant:C | file:PATH
//! n_grid = [100, 200, 400]
//! p_rule = "power"            # fixed:P | power (p = floor(n^gamma))
//! gamma = 0.4
//! M = 200
//! seed = 7
//! mode = "location"           # location | grand_mean
//! competitors = ["no_shrinkage", "half_to_zero"]
//! K_grid = [64]
//! max_iter = 200
//! tol = 1e-10
//! tau_rule = "ones"           # ones | cycle:1,2,3 (per-row weights, non-trial families)
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::estimators::{CompetitorKind, FitMode};
use crate::families::{make_family, FamilyKind, FamilySpec, MeanMatrix, TauMatrix};
use crate::harness::read_matrix;
use crate::optimize::SolverOptions;
use crate::rng;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    family: String,
    lambda: Option<f64>,
    #[serde(rename = "N")]
    trials: Option<Trials>,
    theta_rule: String,
    n_grid: Vec<usize>,
    p_rule: String,
    gamma: Option<f64>,
    #[serde(rename = "M")]
    replications: usize,
    seed: u64,
    mode: Option<String>,
    competitors: Option<Vec<String>>,
    #[serde(rename = "K_grid")]
    k_grid: Option<Vec<usize>>,
    max_iter: Option<usize>,
    tol: Option<f64>,
    tau_rule: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Trials {
    Single(u32),
    /// Cycled over the rows.
    PerRow(Vec<u32>),
}

impl Trials {
    fn for_rows(&self, n: usize) -> Vec<u32> {
        match self {
            Trials::Single(t) => vec![*t; n],
            Trials::PerRow(ts) => (0..n).map(|i| ts[i % ts.len()]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ThetaRule {
    /// Independent uniform draws per entry, fixed per `n` across replications.
    Uniform { lo: f64, hi: f64 },
    Constant(f64),
    Fixed(Array2<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PRule {
    Fixed(usize),
    /// `p = floor(n^gamma)`.
    Power(f64),
}

impl PRule {
    pub fn columns(&self, n: usize) -> usize {
        match *self {
            PRule::Fixed(p) => p,
            // Guard against n^gamma landing a hair below an integer.
            PRule::Power(g) => ((n as f64).powf(g) + 1e-9).floor().max(1.0) as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TauRule {
    Ones,
    Cycle(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub family: FamilyKind,
    pub lambda: Option<f64>,
    pub trials: Option<Trials>,
    pub theta_rule: ThetaRule,
    pub n_grid: Vec<usize>,
    pub p_rule: PRule,
    pub replications: usize,
    pub seed: u64,
    pub mode: FitMode,
    pub competitors: Vec<CompetitorKind>,
    pub k_grid: Vec<usize>,
    pub solver: SolverOptions,
    pub tau_rule: TauRule,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| config_err(format!("{what}: cannot parse `{s}` as a number")))
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.parent())
    }

    /// Parses config text; relative `file:` paths resolve against `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        let family = FamilyKind::from_str(&raw.family)?;

        let theta_rule = match raw.theta_rule.split_once(':') {
            Some(("uniform", rest)) => {
                let (lo, hi) = rest
                    .split_once(':')
                    .ok_or_else(|| config_err("theta_rule uniform needs uniform:LO:HI"))?;
                let (lo, hi) = (parse_f64(lo, "theta_rule")?, parse_f64(hi, "theta_rule")?);
                if !(lo < hi) {
                    return Err(config_err("theta_rule uniform needs LO < HI"));
                }
                ThetaRule::Uniform { lo, hi }
            }
            Some(("constant", c)) => ThetaRule::Constant(parse_f64(c, "theta_rule")?),
            Some(("file", p)) => {
                let mut path = PathBuf::from(p.trim());
                if path.is_relative() {
                    if let Some(b) = base {
                        path = b.join(path);
                    }
                }
                ThetaRule::Fixed(read_matrix(&path)?)
            }
            _ => return Err(config_err(format!("unrecognized theta_rule `{}`", raw.theta_rule))),
        };

        let p_rule = match raw.p_rule.split_once(':') {
            Some(("fixed", p)) => {
                let p: usize = p.trim().parse().map_err(|_| config_err("p_rule fixed:P needs an integer"))?;
                if p == 0 {
                    return Err(config_err("p must be positive"));
                }
                PRule::Fixed(p)
            }
            None if raw.p_rule == "power" => {
                let g = raw.gamma.ok_or_else(|| config_err("p_rule power requires gamma"))?;
                if !(g > 0.0 && g < 1.0) {
                    return Err(config_err("gamma must lie in (0, 1)"));
                }
                PRule::Power(g)
            }
            _ => return Err(config_err(format!("unrecognized p_rule `{}`", raw.p_rule))),
        };

        if raw.n_grid.is_empty() {
            return Err(config_err("n_grid is empty"));
        }
        if raw.n_grid[0] < 2 || raw.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(config_err("n_grid entries must be >= 2 and strictly increasing"));
        }
        if raw.replications == 0 {
            return Err(config_err("M must be >= 1"));
        }
        if let ThetaRule::Fixed(m) = &theta_rule {
            if raw.n_grid != [m.nrows()] || p_rule != PRule::Fixed(m.ncols()) {
                return Err(config_err(format!(
                    "theta file is {}x{}; n_grid and p_rule must match it",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }

        let mode = raw.mode.as_deref().map(FitMode::from_str).transpose()?.unwrap_or(FitMode::Location);
        let competitors = raw
            .competitors
            .unwrap_or_default()
            .iter()
            .map(|s| CompetitorKind::from_str(s))
            .collect::<Result<Vec<_>>>()?;
        let k_grid = raw.k_grid.unwrap_or_else(|| vec![64]);
        if k_grid.is_empty() {
            return Err(config_err("K_grid is empty"));
        }
        let defaults = SolverOptions::default();
        let solver = SolverOptions {
            max_outer_iterations: raw.max_iter.unwrap_or(defaults.max_outer_iterations),
            tolerance: raw.tol.unwrap_or(defaults.tolerance),
            ..defaults
        };
        solver.validate()?;

        let tau_rule = match raw.tau_rule.as_deref() {
            None | Some("ones") => TauRule::Ones,
            Some(s) => match s.split_once(':') {
                Some(("cycle", list)) => {
                    let ts = list
                        .split(',')
                        .map(|t| t.trim().parse::<u32>().ok().filter(|&t| t >= 1))
                        .collect::<Option<Vec<_>>>()
                        .ok_or_else(|| config_err("tau_rule cycle needs positive integers"))?;
                    TauRule::Cycle(ts)
                }
                _ => return Err(config_err(format!("unrecognized tau_rule `{s}`"))),
            },
        };
        if family.uses_trials() && tau_rule != TauRule::Ones {
            return Err(config_err("tau_rule does not apply to trial-count families; use N"));
        }
        if let Some(Trials::PerRow(ts)) = &raw.trials {
            if ts.is_empty() {
                return Err(config_err("N list is empty"));
            }
        }

        let config = ExperimentConfig {
            family,
            lambda: raw.lambda,
            trials: raw.trials,
            theta_rule,
            n_grid: raw.n_grid,
            p_rule,
            replications: raw.replications,
            seed: raw.seed,
            mode,
            competitors,
            k_grid,
            solver,
            tau_rule,
        };
        // Surface family parameter errors at load time.
        config.family_spec(config.n_grid[0])?;
        Ok(config)
    }

    pub fn family_spec(&self, n: usize) -> Result<FamilySpec> {
        let trials = self.trials.as_ref().map(|t| t.for_rows(n));
        make_family(self.family, self.lambda, trials.as_deref())
    }

    pub fn sup_gap_samples(&self) -> usize {
        self.k_grid.iter().copied().max().unwrap_or(0)
    }

    pub fn tau(&self, n: usize, p: usize) -> TauMatrix {
        if let Some(trials) = &self.trials {
            return TauMatrix::from_trials(&trials.for_rows(n), p);
        }
        match &self.tau_rule {
            TauRule::Ones => TauMatrix::ones(n, p),
            TauRule::Cycle(ts) => TauMatrix(Array2::from_shape_fn((n, p), |(i, _)| ts[i % ts.len()])),
        }
    }

    /// Mean matrix for grid size `n`, shared by all replications at that size.
    pub fn theta(&self, n: usize, p: usize, spec: &FamilySpec) -> Result<MeanMatrix> {
        let theta = match &self.theta_rule {
            ThetaRule::Uniform { lo, hi } => {
                let mut r = rng::stream(self.seed, &[rng::PURPOSE_THETA, n as u64]);
                Array2::from_shape_simple_fn((n, p), || r.random_range(*lo..*hi))
            }
            ThetaRule::Constant(c) => Array2::from_elem((n, p), *c),
            ThetaRule::Fixed(m) => m.clone(),
        };
        let theta = MeanMatrix(theta);
        spec.validate_mean(&theta)
            .map_err(|e| config_err(format!("theta_rule produces means outside the family domain: {e}")))?;
        Ok(theta)
    }
}
