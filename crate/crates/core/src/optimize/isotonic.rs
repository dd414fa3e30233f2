//! Box-constrained monotone least squares along a tau ordering.

use crate::error::{Error, Result};
use crate::optimize::OrderSpec;

/// Weighted projection of `targets` onto `{b in [0,1]^n : b monotone along `order`}`.
///
/// Minimizes `sum w_i (b_i - t_i)^2`. Rows in the same tie group receive one
/// common value. A coordinate with zero weight takes the value forced by its
/// neighbours, or the feasible value closest to its clipped target when the
/// neighbours leave room.
pub fn isotonic_box_projection(targets: &[f64], weights: &[f64], order: &OrderSpec) -> Result<Vec<f64>> {
    let n = order.len();
    if targets.len() != n || weights.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} targets and {} weights for an order of length {n}",
            targets.len(),
            weights.len()
        )));
    }
    if let Some((index, &weight)) = weights.iter().enumerate().find(|(_, w)| !(**w >= 0.0) || !w.is_finite()) {
        return Err(Error::NegativeWeight { index, weight });
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument("targets must be finite".into()));
    }
    let lin: Vec<f64> = targets.iter().zip(weights).map(|(t, w)| t * w).collect();
    let pref: Vec<f64> = targets.iter().map(|t| t.clamp(0.0, 1.0)).collect();
    Ok(solve_monotone_quadratic(weights, &lin, &pref, order))
}

#[derive(Debug, Clone, Copy)]
struct Block {
    quad: f64,
    lin: f64,
    // Range of non-free items covered, inclusive.
    first: usize,
    last: usize,
}

impl Block {
    fn value(&self) -> f64 {
        block_minimizer(self.quad, self.lin)
    }
}

/// Minimizer of `q b^2 - 2 l b` over `[0, 1]` for `q >= 0`, `(q, l) != (0, 0)`.
#[inline]
fn block_minimizer(quad: f64, lin: f64) -> f64 {
    if quad > 0.0 {
        (lin / quad).clamp(0.0, 1.0)
    } else if lin > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Minimizes `sum_i quad_i b_i^2 - 2 lin_i b_i` over the monotone box.
///
/// Pool-adjacent-violators over tie groups, where each block's value is the
/// box-constrained minimizer of its pooled quadratic. Groups whose pooled
/// coefficients are both zero do not enter the pooling; they are placed at
/// `pref` (averaged over the group) clipped between their neighbours.
pub(crate) fn solve_monotone_quadratic(quad: &[f64], lin: &[f64], pref: &[f64], order: &OrderSpec) -> Vec<f64> {
    let groups: Vec<&[usize]> = order.groups().collect();
    let mut gq = Vec::with_capacity(groups.len());
    let mut gl = Vec::with_capacity(groups.len());
    for g in &groups {
        gq.push(g.iter().map(|&i| quad[i]).sum::<f64>());
        gl.push(g.iter().map(|&i| lin[i]).sum::<f64>());
    }

    let active: Vec<usize> = (0..groups.len()).filter(|&g| gq[g] != 0.0 || gl[g] != 0.0).collect();
    let mut stack: Vec<Block> = Vec::with_capacity(active.len());
    for (pos, &g) in active.iter().enumerate() {
        stack.push(Block { quad: gq[g], lin: gl[g], first: pos, last: pos });
        while stack.len() >= 2 {
            let top = stack[stack.len() - 1];
            let below = stack[stack.len() - 2];
            if below.value() <= top.value() {
                break;
            }
            stack.pop();
            let merged = stack.last_mut().unwrap();
            merged.quad += top.quad;
            merged.lin += top.lin;
            merged.last = top.last;
        }
    }

    let mut group_value = vec![f64::NAN; groups.len()];
    for block in &stack {
        let v = block.value();
        for &g in &active[block.first..=block.last] {
            group_value[g] = v;
        }
    }

    // Free groups sit between their nearest pooled neighbours.
    let mut lower = 0.0;
    for g in 0..groups.len() {
        if !group_value[g].is_nan() {
            lower = group_value[g];
            continue;
        }
        let upper = group_value[g + 1..]
            .iter()
            .find(|v| !v.is_nan())
            .copied()
            .unwrap_or(1.0);
        let members = groups[g];
        let p = members.iter().map(|&i| pref[i]).sum::<f64>() / members.len() as f64;
        group_value[g] = p.clamp(lower, upper);
        lower = group_value[g];
    }

    let mut b = vec![0.0; order.len()];
    for (g, members) in groups.iter().enumerate() {
        for &i in members.iter() {
            b[i] = group_value[g];
        }
    }
    b
}
