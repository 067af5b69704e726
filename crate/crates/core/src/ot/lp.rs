//! Dense two-phase tableau simplex used as a validation oracle.
//!
//! Solves the transport LP in its inequality form
//!
//! ```text
//! min  sum_ij F_ij c_ij
//! s.t. sum_j F_ij <= a_i,  sum_i F_ij <= b_j,  sum_ij F_ij = sum_i a_i,  F >= 0
//! ```
//!
//! with Bland's rule throughout. Nothing here is shared with the network
//! simplex in [`super::network`].

use crate::error::{Error, Result};

/// Largest `n * m` the oracle accepts.
pub const ORACLE_LIMIT: usize = 10_000;

const PIVOT_EPS: f64 = 1e-12;

struct Tableau {
    rows: usize,
    cols: usize,
    /// `rows` constraint rows of `cols + 1` entries (rhs last).
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * (self.cols + 1) + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.cols + 1;
        let p = self.data[pr * w + pc];
        for c in 0..w {
            self.data[pr * w + c] /= p;
        }
        let pivot_row: Vec<f64> = self.data[pr * w..(pr + 1) * w].to_vec();
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.data[r * w + pc];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.data[r * w..(r + 1) * w];
            for (x, &pv) in row.iter_mut().zip(&pivot_row) {
                *x -= f * pv;
            }
            row[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    /// Minimizes `cost . x` over columns `< allowed`, starting from the
    /// current basis. Returns the objective value.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> Result<f64> {
        let max_iter = 50 * (self.rows + self.cols) + 10_000;
        for _ in 0..max_iter {
            // Bland: lowest-index column with negative reduced cost.
            let mut entering = None;
            for c in 0..allowed {
                if self.basis.contains(&c) {
                    continue;
                }
                let mut d = cost[c];
                for r in 0..self.rows {
                    let a = self.at(r, c);
                    if a != 0.0 {
                        d -= cost[self.basis[r]] * a;
                    }
                }
                if d < -1e-11 {
                    entering = Some(c);
                    break;
                }
            }
            let Some(pc) = entering else {
                return Ok((0..self.rows).map(|r| cost[self.basis[r]] * self.rhs(r)).sum());
            };
            let mut best: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_EPS {
                    let ratio = self.rhs(r) / a;
                    best = match best {
                        Some((br, bv))
                            if bv < ratio - 1e-15
                                || ((bv - ratio).abs() <= 1e-15 && self.basis[br] < self.basis[r]) =>
                        {
                            Some((br, bv))
                        }
                        _ => Some((r, ratio)),
                    };
                }
            }
            let Some((pr, _)) = best else {
                return Err(Error::Numerical("oracle LP is unbounded".into()));
            };
            self.pivot(pr, pc);
        }
        Err(Error::Numerical("oracle simplex exceeded its iteration budget".into()))
    }
}

/// Optimal transport cost by dense simplex. `cost` is row-major `n x m`.
pub fn lp_transport_oracle(a: &[f64], b: &[f64], cost: &[f64]) -> Result<f64> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return Err(Error::EmptySide);
    }
    if n * m > ORACLE_LIMIT {
        return Err(Error::SizeGuard { size: n * m, limit: ORACLE_LIMIT });
    }
    if cost.len() != n * m {
        return Err(Error::Validation("cost matrix shape mismatch".into()));
    }
    let total: f64 = a.iter().sum();
    let scale = total / b.iter().sum::<f64>();

    // Columns: F (n*m), row slacks (n), column slacks (m), one artificial.
    let nf = n * m;
    let cols = nf + n + m + 1;
    let art = cols - 1;
    let rows = n + m + 1;
    let mut t = Tableau { rows, cols, data: vec![0.0; rows * (cols + 1)], basis: vec![0; rows] };
    let w = cols + 1;
    for i in 0..n {
        for j in 0..m {
            t.data[i * w + i * m + j] = 1.0;
        }
        t.data[i * w + nf + i] = 1.0;
        t.data[i * w + cols] = a[i];
        t.basis[i] = nf + i;
    }
    for j in 0..m {
        let r = n + j;
        for i in 0..n {
            t.data[r * w + i * m + j] = 1.0;
        }
        t.data[r * w + nf + n + j] = 1.0;
        t.data[r * w + cols] = b[j] * scale;
        t.basis[r] = nf + n + j;
    }
    let r = n + m;
    for k in 0..nf {
        t.data[r * w + k] = 1.0;
    }
    t.data[r * w + art] = 1.0;
    t.data[r * w + cols] = total;
    t.basis[r] = art;

    let mut phase1 = vec![0.0; cols];
    phase1[art] = 1.0;
    let infeas = t.optimize(&phase1, art)?;
    if infeas > 1e-9 * total.max(1.0) {
        return Err(Error::Numerical(format!("oracle LP infeasible (residual {infeas:e})")));
    }

    // Drive a zero-level artificial out of the basis so phase 2 cannot grow it.
    if let Some(r) = t.basis.iter().position(|&c| c == art) {
        if let Some(c) = (0..art).find(|&c| !t.basis.contains(&c) && t.at(r, c).abs() > PIVOT_EPS) {
            t.pivot(r, c);
        }
    }

    let mut phase2 = vec![0.0; cols];
    phase2[..nf].copy_from_slice(cost);
    t.optimize(&phase2, art)
}
