//! Exact transport references.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, BlobError, Result};
use crate::kernels::Mollifier;
use crate::points::{sq_dist, PointCloud};

/// Largest instance [`brute_force_assign`] accepts.
pub const BRUTE_FORCE_MAX: usize = 10;

/// A perfect matching `i -> permutation[i]` with its mean squared cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub permutation: Vec<usize>,
    pub mean_cost: f64,
}

fn cost_matrix(sources: &PointCloud, targets: &PointCloud) -> Result<Vec<Vec<f64>>> {
    check_dim(sources.dim(), targets.dim())?;
    if sources.len() != targets.len() {
        return Err(BlobError::arg(format!(
            "assignment needs equal counts, got {} sources and {} targets",
            sources.len(),
            targets.len()
        )));
    }
    if sources.is_empty() {
        return Err(BlobError::arg("assignment needs at least one point"));
    }
    Ok(sources
        .iter()
        .map(|z| targets.iter().map(|w| sq_dist(z, w)).collect())
        .collect())
}

fn permutation_cost(cost: &[Vec<f64>], perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(i, &j)| cost[i][j]).sum()
}

fn tie_tolerance(best: f64) -> f64 {
    1e-12 * best.abs().max(1.0)
}

/// Minimum-cost assignment of `rows` to `cols` (both index lists into
/// `cost`), by the O(n^3) shortest augmenting path method with potentials.
/// Returns the total cost.
fn hungarian_cost(cost: &[Vec<f64>], rows: &[usize], cols: &[usize]) -> f64 {
    let n = rows.len();
    if n == 0 {
        return 0.0;
    }
    let a = |i: usize, j: usize| cost[rows[i - 1]][cols[j - 1]];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    // p[j]: row matched to column j (1-based, 0 = none).
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = a(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| a(p[j], j)).sum()
}

/// Optimal assignment by the Hungarian method. Among optimal matchings the
/// lexicographically smallest permutation is returned.
pub fn hungarian_assign(sources: &PointCloud, targets: &PointCloud) -> Result<Assignment> {
    let cost = cost_matrix(sources, targets)?;
    let n = cost.len();
    let all: Vec<usize> = (0..n).collect();
    let best = hungarian_cost(&cost, &all, &all);
    let tol = tie_tolerance(best);

    // Fix rows one at a time to the smallest column that still admits an
    // optimal completion.
    let mut perm = Vec::with_capacity(n);
    let mut free: Vec<usize> = all.clone();
    let mut fixed = 0.0;
    for r in 0..n {
        let rest_rows: Vec<usize> = (r + 1..n).collect();
        let mut chosen = None;
        for (slot, &c) in free.iter().enumerate() {
            let rest_cols: Vec<usize> = free.iter().copied().filter(|&x| x != c).collect();
            let total = fixed + cost[r][c] + hungarian_cost(&cost, &rest_rows, &rest_cols);
            if total <= best + tol {
                chosen = Some(slot);
                break;
            }
        }
        // The optimal column always qualifies; fall back to the cheapest
        // completion only if rounding pushed every candidate over the bound.
        let slot = chosen.unwrap_or_else(|| {
            let mut best_slot = 0;
            let mut best_total = f64::INFINITY;
            for (slot, &c) in free.iter().enumerate() {
                let rest_cols: Vec<usize> = free.iter().copied().filter(|&x| x != c).collect();
                let t = cost[r][c] + hungarian_cost(&cost, &rest_rows, &rest_cols);
                if t < best_total {
                    best_total = t;
                    best_slot = slot;
                }
            }
            best_slot
        });
        let c = free.remove(slot);
        fixed += cost[r][c];
        perm.push(c);
    }
    let mean_cost = permutation_cost(&cost, &perm) / n as f64;
    Ok(Assignment {
        permutation: perm,
        mean_cost,
    })
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Exhaustive search over all permutations (test oracle), same tie-break as
/// [`hungarian_assign`].
pub fn brute_force_assign(sources: &PointCloud, targets: &PointCloud) -> Result<Assignment> {
    let cost = cost_matrix(sources, targets)?;
    let n = cost.len();
    if n > BRUTE_FORCE_MAX {
        return Err(BlobError::arg(format!(
            "brute force limited to {BRUTE_FORCE_MAX} points, got {n}"
        )));
    }
    let mut p: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    loop {
        best = best.min(permutation_cost(&cost, &p));
        if !next_permutation(&mut p) {
            break;
        }
    }
    let tol = tie_tolerance(best);
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        let c = permutation_cost(&cost, &p);
        if c <= best + tol {
            return Ok(Assignment {
                mean_cost: c / n as f64,
                permutation: p,
            });
        }
        if !next_permutation(&mut p) {
            unreachable!("the minimum is attained by some permutation");
        }
    }
}

/// Sorted matching on the real line.
pub fn monotone_map_1d(sources: &[f64], targets: &[f64]) -> Result<Assignment> {
    if sources.len() != targets.len() || sources.is_empty() {
        return Err(BlobError::arg(
            "monotone map needs two nonempty lists of equal length",
        ));
    }
    let order = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
        idx
    };
    let (os, ot) = (order(sources), order(targets));
    let mut perm = vec![0; sources.len()];
    for (s, t) in os.into_iter().zip(ot) {
        perm[s] = t;
    }
    let total: f64 = perm
        .iter()
        .enumerate()
        .map(|(i, &j)| (sources[i] - targets[j]).powi(2))
        .sum();
    Ok(Assignment {
        mean_cost: total / sources.len() as f64,
        permutation: perm,
    })
}

/// Displacement interpolation between the uniform measure on `[0, 1]` and
/// twice the uniform measure on `[2, 2.5]`.
pub fn continuum_geodesic(y: f64, t: f64) -> f64 {
    (1.0 - t) * y + t * (0.5 * y + 2.0)
}

/// `(1/eps) |k_delta * mu - k_delta * m1|^2` for isotropic Gaussians
/// `mu = N(mu_mean, mu_var I)` and `m1 = N(m1_mean, m1_var I)`.
pub fn gaussian_penalty_closed_form(
    mu_mean: &[f64],
    mu_var: f64,
    m1_mean: &[f64],
    m1_var: f64,
    mollifier: &Mollifier,
    epsilon: f64,
) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(BlobError::arg("epsilon must be positive"));
    }
    let aa = mollifier.gaussian_cross_term(mu_mean, mu_var, mu_mean, mu_var)?;
    let ab = mollifier.gaussian_cross_term(mu_mean, mu_var, m1_mean, m1_var)?;
    let bb = mollifier.gaussian_cross_term(m1_mean, m1_var, m1_mean, m1_var)?;
    Ok(((aa - 2.0 * ab + bb) / epsilon).max(0.0))
}
