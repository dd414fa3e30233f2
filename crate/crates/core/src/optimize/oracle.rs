//! Exhaustive grid searches used to validate the solvers on small instances.

use crate::error::{Error, Result};
use crate::families::{DataMatrix, FamilySpec};
use crate::optimize::OrderSpec;
use crate::risk;

pub const ORACLE_MAX_ROWS: usize = 5;
pub const ORACLE_MAX_COLS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct GridOptimum {
    pub b: Vec<f64>,
    pub mu: Vec<f64>,
    pub value: f64,
}

/// Number of grid steps on `[0, 1]`.
fn unit_steps(resolution: f64) -> Result<usize> {
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::InvalidArgument(format!("grid resolution {resolution} not in (0, 1]")));
    }
    Ok(((1.0 / resolution).round() as usize).max(1))
}

/// Points `-M + k h` for `k = 0, 1, ...` up to `M`, with `M` itself appended.
struct LocationGrid {
    lo: f64,
    step: f64,
    last_regular: usize,
    hi: f64,
    with_endpoint: bool,
}

impl LocationGrid {
    fn new(bound: f64, step: f64) -> Self {
        let last_regular = (2.0 * bound / step).floor() as usize;
        let with_endpoint = -bound + last_regular as f64 * step < bound;
        LocationGrid { lo: -bound, step, last_regular, hi: bound, with_endpoint }
    }

    #[cfg(test)]
    fn len(&self) -> usize {
        self.last_regular + 1 + usize::from(self.with_endpoint)
    }

    fn point(&self, k: usize) -> f64 {
        if k <= self.last_regular {
            self.lo + k as f64 * self.step
        } else {
            self.hi
        }
    }

    /// Grid point nearest to `m`. A parabola restricted to the grid is
    /// minimized at the point nearest its vertex.
    fn nearest(&self, m: f64) -> f64 {
        if !(m > self.lo) {
            return self.lo;
        }
        if m >= self.hi {
            return self.hi;
        }
        let k = (((m - self.lo) / self.step).round() as usize).min(self.last_regular);
        let x = self.point(k);
        if self.with_endpoint && (self.hi - m).abs() < (x - m).abs() {
            self.hi
        } else {
            x
        }
    }
}

/// Grid minimum of the location risk estimate over monotone `b` and bounded `mu`.
///
/// Every monotone `b` on the grid `{0, h, ..., 1}` is enumerated. For fixed `b`
/// the estimate separates into one convex quadratic per column of `mu`, so the
/// minimum over the `mu` grid is the grid point nearest the column's
/// continuous minimizer.
pub fn grid_oracle_ure(data: &DataMatrix, spec: &FamilySpec, resolution: f64) -> Result<GridOptimum> {
    let (n, p) = (data.n(), data.p());
    if n > ORACLE_MAX_ROWS || p > ORACLE_MAX_COLS {
        return Err(Error::OracleTooLarge { max_n: ORACLE_MAX_ROWS, max_p: ORACLE_MAX_COLS });
    }
    let steps = unit_steps(resolution)?;
    let c = risk::variance_terms(data, spec)?;
    let s: Vec<f64> = c.rows().into_iter().map(|r| r.sum()).collect();
    let bound = data.data_range();
    let mu_grid = LocationGrid::new(bound, resolution);
    let order = OrderSpec::from_tau(&data.tau);
    let groups: Vec<Vec<usize>> = order.groups().map(|g| g.to_vec()).collect();

    // Per-group sums needed to evaluate the objective incrementally.
    let group_s: Vec<f64> = groups.iter().map(|g| g.iter().map(|&i| s[i]).sum()).collect();
    let group_y: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| (0..p).map(|j| g.iter().map(|&i| data.y[(i, j)]).sum()).collect())
        .collect();
    let group_y2: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| (0..p).map(|j| g.iter().map(|&i| data.y[(i, j)].powi(2)).sum()).collect())
        .collect();
    let group_size: Vec<f64> = groups.iter().map(|g| g.len() as f64).collect();

    let b: Vec<f64> = (0..=steps).map(|k| k as f64 / steps as f64).collect();
    let mut search = UreSearch {
        steps,
        b2: b.iter().map(|v| v * v).collect(),
        b,
        p,
        mu_grid: &mu_grid,
        group_s: &group_s,
        group_y: &group_y,
        group_y2: &group_y2,
        group_size: &group_size,
        levels: vec![0; groups.len()],
        best_value: f64::INFINITY,
        best_levels: vec![0; groups.len()],
        best_mu: vec![0.0; p],
    };
    search.recurse(0, 0, &Partial::zero(p));

    let mut b = vec![0.0; n];
    for (g, members) in groups.iter().enumerate() {
        for &i in members {
            b[i] = search.best_levels[g] as f64 / steps as f64;
        }
    }
    let value = risk::ure_with_terms(data, &c, &b, &search.best_mu);
    Ok(GridOptimum { b, mu: search.best_mu, value })
}

#[derive(Clone, Copy)]
struct Partial {
    w: [f64; ORACLE_MAX_COLS],
    s1: [f64; ORACLE_MAX_COLS],
    s2: [f64; ORACLE_MAX_COLS],
    lin: f64,
}

impl Partial {
    fn zero(_p: usize) -> Self {
        Partial { w: [0.0; ORACLE_MAX_COLS], s1: [0.0; ORACLE_MAX_COLS], s2: [0.0; ORACLE_MAX_COLS], lin: 0.0 }
    }
}

struct UreSearch<'a> {
    steps: usize,
    b: Vec<f64>,
    b2: Vec<f64>,
    p: usize,
    mu_grid: &'a LocationGrid,
    group_s: &'a [f64],
    group_y: &'a [Vec<f64>],
    group_y2: &'a [Vec<f64>],
    group_size: &'a [f64],
    levels: Vec<usize>,
    best_value: f64,
    best_levels: Vec<usize>,
    best_mu: Vec<f64>,
}

impl UreSearch<'_> {
    fn recurse(&mut self, g: usize, min_level: usize, acc: &Partial) {
        if g + 1 == self.levels.len() {
            self.last_group(g, min_level, acc);
            return;
        }
        for level in min_level..=self.steps {
            let (b, b2) = (self.b[level], self.b2[level]);
            let mut next = *acc;
            for j in 0..self.p {
                next.w[j] += b2 * self.group_size[g];
                next.s1[j] += b2 * self.group_y[g][j];
                next.s2[j] += b2 * self.group_y2[g][j];
            }
            next.lin += b * self.group_s[g];
            self.levels[g] = level;
            self.recurse(g + 1, level, &next);
        }
    }

    /// Innermost loop: every level of the last group, then the best `mu` per column.
    fn last_group(&mut self, g: usize, min_level: usize, acc: &Partial) {
        let (size, s_g) = (self.group_size[g], self.group_s[g]);
        let (gy, gy2) = (&self.group_y[g], &self.group_y2[g]);
        for level in min_level..=self.steps {
            let (b, b2) = (self.b[level], self.b2[level]);
            // Objective up to the constant sum_i S_i and the 1/np factor.
            let mut total = -2.0 * (acc.lin + b * s_g);
            let mut mu = [0.0; ORACLE_MAX_COLS];
            for j in 0..self.p {
                let w = acc.w[j] + b2 * size;
                let s1 = acc.s1[j] + b2 * gy[j];
                let s2 = acc.s2[j] + b2 * gy2[j];
                let m = self.mu_grid.nearest(if w > 0.0 { s1 / w } else { 0.0 });
                mu[j] = m;
                total += s2 - 2.0 * m * s1 + m * m * w;
            }
            if total < self.best_value {
                self.best_value = total;
                self.levels[g] = level;
                self.best_levels.clone_from(&self.levels);
                self.best_mu.copy_from_slice(&mu[..self.p]);
            }
        }
    }
}

/// Grid minimum of the grand-mean risk estimate over monotone `b`.
///
/// The estimate is a sum of one-dimensional functions of the tie-group values,
/// so a dynamic program over the groups (prefix minima over the level index)
/// gives the same minimum as enumerating every monotone grid vector.
pub fn grid_oracle_aure(data: &DataMatrix, spec: &FamilySpec, resolution: f64) -> Result<GridOptimum> {
    let n = data.n();
    if n < 2 {
        return Err(Error::TooFewRows { required: 2, got: n });
    }
    let steps = unit_steps(resolution)?;
    let c = risk::variance_terms(data, spec)?;
    let ybar = risk::grand_mean(&data.y);
    let factor = 1.0 - 1.0 / n as f64;
    let order = OrderSpec::from_tau(&data.tau);
    let groups: Vec<Vec<usize>> = order.groups().map(|g| g.to_vec()).collect();

    let row_cost = |i: usize, b: f64| -> f64 {
        let mut a = 0.0;
        let mut s = 0.0;
        for j in 0..data.p() {
            a += (data.y[(i, j)] - ybar[j]).powi(2);
            s += c[(i, j)];
        }
        a * b * b - 2.0 * factor * s * b
    };

    // best[k]: minimal cost of groups 0..=g with group g at level k.
    let mut choice: Vec<Vec<usize>> = Vec::with_capacity(groups.len());
    let mut best = vec![0.0; steps + 1];
    for (g, members) in groups.iter().enumerate() {
        let mut arg = vec![0usize; steps + 1];
        let mut next = vec![0.0; steps + 1];
        let (mut run_min, mut run_arg) = (f64::INFINITY, 0);
        for k in 0..=steps {
            if g > 0 && best[k] < run_min {
                run_min = best[k];
                run_arg = k;
            }
            let b = k as f64 / steps as f64;
            let own: f64 = members.iter().map(|&i| row_cost(i, b)).sum();
            next[k] = own + if g > 0 { run_min } else { 0.0 };
            arg[k] = run_arg;
        }
        best = next;
        choice.push(arg);
    }
    let mut level = (0..=steps).fold(0, |a, k| if best[k] < best[a] { k } else { a });
    let mut levels = vec![0; groups.len()];
    for g in (0..groups.len()).rev() {
        levels[g] = level;
        level = choice[g][level];
    }
    let mut b = vec![0.0; n];
    for (g, members) in groups.iter().enumerate() {
        for &i in members {
            b[i] = levels[g] as f64 / steps as f64;
        }
    }
    let value = risk::aure_with_terms(data, &c, &b);
    Ok(GridOptimum { b, mu: ybar, value })
}
