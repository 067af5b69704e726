//! Optimal assignment and corpus-level scores built on it.

use crate::error::{Error, Result};
use crate::layout::Layout;
use crate::metrics::{doc_emd_matrix, docsim_matrix, DocEmdConfig};

/// Matched `(row, col)` pairs, one per row or column of the smaller side.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub pairs: Vec<(usize, usize)>,
    pub total_cost: f64,
}

/// Minimum-cost assignment for a rectangular `rows x cols` cost matrix
/// (row-major slice of rows).
///
/// Rectangular inputs are padded to square with a constant sentinel of ten
/// times the largest absolute entry; padded matches are dropped, so
/// `pairs.len() == min(rows, cols)`.
pub fn hungarian(cost: &[Vec<f64>]) -> Result<Assignment> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if cost.iter().any(|r| r.len() != cols) {
        return Err(Error::Validation("cost matrix rows differ in length".into()));
    }
    if let Some((i, j)) = cost
        .iter()
        .enumerate()
        .find_map(|(i, r)| r.iter().position(|v| !v.is_finite()).map(|j| (i, j)))
    {
        return Err(Error::Validation(format!("non-finite cost at ({i}, {j})")));
    }
    if rows == 0 || cols == 0 {
        return Ok(Assignment { pairs: Vec::new(), total_cost: 0.0 });
    }

    let n = rows.max(cols);
    let max_abs = cost.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let sentinel = 10.0 * max_abs.max(1.0);
    let at = |i: usize, j: usize| if i < rows && j < cols { cost[i][j] } else { sentinel };

    // Shortest augmenting path with potentials, 1-based with a virtual
    // column 0 (O(n^3)).
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = (1..=n)
        .filter(|&j| row_of[j] != 0)
        .map(|j| (row_of[j] - 1, j - 1))
        .filter(|&(i, j)| i < rows && j < cols)
        .collect();
    pairs.sort_unstable();
    let total_cost = pairs.iter().map(|&(i, j)| cost[i][j]).sum();
    Ok(Assignment { pairs, total_cost })
}

/// Mean matched Doc-EMD between two corpora (lower is better).
pub fn set_score_docemd(a: &[Layout], b: &[Layout], cfg: &DocEmdConfig) -> Result<f64> {
    Ok(set_match_docemd(a, b, cfg)?.1)
}

/// Like [`set_score_docemd`] but also returns the assignment.
pub fn set_match_docemd(a: &[Layout], b: &[Layout], cfg: &DocEmdConfig) -> Result<(Assignment, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Validation("set score needs two nonempty corpora".into()));
    }
    let m = doc_emd_matrix(a, b, cfg)?;
    let asg = hungarian(&m)?;
    let mean = asg.total_cost / asg.pairs.len() as f64;
    Ok((asg, mean))
}

/// Mean matched DocSim between two corpora (higher is better).
pub fn set_score_docsim(a: &[Layout], b: &[Layout]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Validation("set score needs two nonempty corpora".into()));
    }
    let sim = docsim_matrix(a, b)?;
    let neg: Vec<Vec<f64>> = sim.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
    let asg = hungarian(&neg)?;
    let total: f64 = asg.pairs.iter().map(|&(i, j)| sim[i][j]).sum();
    Ok(total / asg.pairs.len() as f64)
}
