//! Entropic approximation for large corpora. Never used where exactness is
//! being checked.

use crate::error::{Error, Result};

use super::FlowPlan;

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Log-domain Sinkhorn iterations. Returns the transport cost of the
/// entropic plan (without the entropy term). Flows below `1e-15` are dropped
/// from the sparse plan.
pub fn sinkhorn<C: Fn(usize, usize) -> f64>(
    a: &[f64],
    b: &[f64],
    cost: C,
    epsilon: f64,
    max_iter: usize,
    tol: f64,
) -> Result<FlowPlan> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return Err(Error::EmptySide);
    }
    if !(epsilon > 0.0) {
        return Err(Error::Validation(format!("sinkhorn epsilon must be > 0, got {epsilon}")));
    }
    let c: Vec<f64> = (0..n * m).map(|k| cost(k / m, k % m)).collect();
    let log_a: Vec<f64> = a.iter().map(|w| w.ln()).collect();
    let sb: f64 = b.iter().sum();
    let sa: f64 = a.iter().sum();
    let log_b: Vec<f64> = b.iter().map(|w| (w * sa / sb).ln()).collect();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];

    for _ in 0..max_iter {
        for i in 0..n {
            let row = (0..m).map(|j| (g[j] - c[i * m + j]) / epsilon);
            f[i] = epsilon * (log_a[i] - log_sum_exp(row));
        }
        let mut err = 0.0f64;
        for j in 0..m {
            let col = (0..n).map(|i| (f[i] - c[i * m + j]) / epsilon);
            let new = epsilon * (log_b[j] - log_sum_exp(col));
            err = err.max((new - g[j]).abs());
            g[j] = new;
        }
        if err < tol {
            break;
        }
    }

    let mut flows = Vec::new();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..m {
            let p = ((f[i] + g[j] - c[i * m + j]) / epsilon).exp();
            if !p.is_finite() {
                return Err(Error::Numerical("sinkhorn produced a non-finite plan".into()));
            }
            if p > 1e-15 {
                flows.push((i, j, p));
                total += p * c[i * m + j];
            }
        }
    }
    Ok(FlowPlan { flows, cost: total })
}
