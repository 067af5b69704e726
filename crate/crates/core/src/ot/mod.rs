//! Earth mover's distance between weighted 2-D point clouds.
//!
//! Boxes are turned into uniform densities by [`rasterize`]; [`emd`] solves
//! the balanced transport problem exactly under Euclidean ground cost in
//! normalized page coordinates. With uniform weights `1/|s|` the row/column
//! `<=` constraints plus unit total flow force every row and column to be
//! saturated, so the inequality form and the balanced form coincide.

mod lp;
mod network;
mod sinkhorn;

use std::collections::HashMap;

pub use lp::{lp_transport_oracle, ORACLE_LIMIT};
pub use network::transport;
pub use sinkhorn::sinkhorn;

use crate::error::{Error, Result};
use crate::layout::{LayoutElement, PageSize};

/// Tolerance on weight normalization and plan feasibility.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Weighted point cloud in `[0, 1]^2`; weights sum to one unless empty.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMass {
    points: Vec<[f64; 2]>,
    weights: Vec<f64>,
}

impl PointMass {
    pub fn new(points: Vec<[f64; 2]>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::Validation("points and weights differ in length".into()));
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Validation("non-finite point coordinate".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Validation("weights must be finite and nonnegative".into()));
        }
        if !points.is_empty() {
            let total: f64 = weights.iter().sum();
            if (total - 1.0).abs() > FEASIBILITY_TOL {
                return Err(Error::Validation(format!("weights sum to {total}, expected 1")));
            }
        }
        Ok(Self { points, weights })
    }

    /// Equal weights `1 / len`.
    pub fn uniform(points: Vec<[f64; 2]>) -> Result<Self> {
        let w = 1.0 / points.len().max(1) as f64;
        let n = points.len();
        Self::new(points, vec![w; n])
    }

    /// Normalizes arbitrary nonnegative weights.
    pub fn normalized(points: Vec<[f64; 2]>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if points.is_empty() {
            return Self::new(points, weights);
        }
        if !(total > 0.0) {
            return Err(Error::Validation("weights have no mass".into()));
        }
        Self::new(points, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn empty() -> Self {
        Self { points: Vec::new(), weights: Vec::new() }
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn translated(&self, du: f64, dv: f64) -> Self {
        Self {
            points: self.points.iter().map(|p| [p[0] + du, p[1] + dv]).collect(),
            weights: self.weights.clone(),
        }
    }
}

/// Sparse transport plan `(source, target, flow)` and its total cost.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowPlan {
    pub flows: Vec<(usize, usize, f64)>,
    pub cost: f64,
}

impl FlowPlan {
    pub fn total_flow(&self) -> f64 {
        self.flows.iter().map(|f| f.2).sum()
    }

    /// Checks nonnegativity, row/column capacity and total flow against
    /// the two weight vectors.
    pub fn check_feasible(&self, a: &[f64], b: &[f64], tol: f64) -> Result<()> {
        let mut rows = vec![0.0; a.len()];
        let mut cols = vec![0.0; b.len()];
        for &(i, j, f) in &self.flows {
            if f < 0.0 || i >= a.len() || j >= b.len() {
                return Err(Error::Numerical(format!("bad flow entry ({i}, {j}, {f})")));
            }
            rows[i] += f;
            cols[j] += f;
        }
        if let Some(i) = (0..a.len()).find(|&i| rows[i] > a[i] + tol) {
            return Err(Error::Numerical(format!("row {i} ships {} > {}", rows[i], a[i])));
        }
        if let Some(j) = (0..b.len()).find(|&j| cols[j] > b[j] + tol) {
            return Err(Error::Numerical(format!("column {j} receives {} > {}", cols[j], b[j])));
        }
        let total: f64 = a.iter().sum();
        if (self.total_flow() - total).abs() > tol {
            return Err(Error::Numerical(format!("total flow {} != {total}", self.total_flow())));
        }
        Ok(())
    }
}

/// Transport solver selection.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Solver {
    #[default]
    Exact,
    /// Entropic regularization with the given epsilon.
    Sinkhorn { epsilon: f64 },
}

/// Samples the union of `boxes` on a `grid x grid` lattice of cell centres
/// over the page. Points strictly inside at least one box get equal weight.
pub fn rasterize(boxes: &[LayoutElement], page: PageSize, grid: usize) -> Result<PointMass> {
    if grid < 2 {
        return Err(Error::Validation(format!("raster grid must be >= 2, got {grid}")));
    }
    let g = grid as u64;
    let mut inside = vec![false; grid * grid];
    let (pw, ph) = (page.width as u64, page.height as u64);
    for b in boxes {
        // Cell centre (k + 1/2) * extent / g lies strictly inside (lo, hi) iff
        // 2 * lo * g < (2k + 1) * extent < 2 * hi * g.
        let span = |lo: u64, hi: u64, extent: u64| {
            let first = (0..g).find(|&k| 2 * lo * g < (2 * k + 1) * extent);
            first.map(move |f| (f..g).take_while(move |&k| (2 * k + 1) * extent < 2 * hi * g))
        };
        let (Some(xs), Some(ys)) = (span(b.x as u64, b.right(), pw), span(b.y as u64, b.bottom(), ph)) else {
            continue;
        };
        let xs: Vec<u64> = xs.collect();
        for gy in ys {
            for &gx in &xs {
                inside[gy as usize * grid + gx as usize] = true;
            }
        }
    }
    let points: Vec<[f64; 2]> = inside
        .iter()
        .enumerate()
        .filter(|(_, &on)| on)
        .map(|(k, _)| {
            let (gx, gy) = (k % grid, k / grid);
            [(gx as f64 + 0.5) / grid as f64, (gy as f64 + 0.5) / grid as f64]
        })
        .collect();
    if points.is_empty() {
        return Ok(PointMass::empty());
    }
    PointMass::uniform(points)
}

fn euclid(p: [f64; 2], q: [f64; 2]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

/// Exact EMD under Euclidean ground cost.
///
/// Mass sitting on coincident points is matched in place before the solver
/// runs. For a metric ground cost the optimal value depends only on the
/// difference of the two measures, so this reduction is exact; it shrinks
/// lattice problems where two rasterized regions overlap.
pub fn emd(a: &PointMass, b: &PointMass) -> Result<(f64, FlowPlan)> {
    emd_with(a, b, Solver::Exact)
}

pub fn emd_with(a: &PointMass, b: &PointMass, solver: Solver) -> Result<(f64, FlowPlan)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySide);
    }
    let mut ra = a.weights.clone();
    let mut rb = b.weights.clone();
    let mut flows = Vec::new();

    if solver == Solver::Exact {
        let key = |p: &[f64; 2]| (p[0].to_bits(), p[1].to_bits());
        let mut at: HashMap<(u64, u64), Vec<usize>> = HashMap::new();
        for (i, p) in a.points.iter().enumerate() {
            at.entry(key(p)).or_default().push(i);
        }
        for (j, q) in b.points.iter().enumerate() {
            if let Some(list) = at.get(&key(q)) {
                for &i in list {
                    let f = ra[i].min(rb[j]);
                    if f > 0.0 {
                        flows.push((i, j, f));
                        ra[i] -= f;
                        rb[j] -= f;
                    }
                    if rb[j] <= 0.0 {
                        break;
                    }
                }
            }
        }
    }

    let cutoff = 1e-15;
    let mut rows: Vec<usize> = (0..ra.len()).filter(|&i| ra[i] > cutoff).collect();
    let mut cols: Vec<usize> = (0..rb.len()).filter(|&j| rb[j] > cutoff).collect();
    let rest_a: f64 = rows.iter().map(|&i| ra[i]).sum();
    let rest_b: f64 = cols.iter().map(|&j| rb[j]).sum();
    if !rows.is_empty() && !cols.is_empty() && rest_a.min(rest_b) > 1e-13 {
        // A diagonal sweep order makes the north-west corner start close to
        // a monotone coupling.
        let diag = |p: &[f64; 2]| p[0] + p[1];
        rows.sort_by(|&x, &y| diag(&a.points[x]).total_cmp(&diag(&a.points[y])));
        cols.sort_by(|&x, &y| diag(&b.points[x]).total_cmp(&diag(&b.points[y])));
        let sa: Vec<f64> = rows.iter().map(|&i| ra[i]).collect();
        let sb: Vec<f64> = cols.iter().map(|&j| rb[j]).collect();
        let pa: Vec<[f64; 2]> = rows.iter().map(|&i| a.points[i]).collect();
        let pb: Vec<[f64; 2]> = cols.iter().map(|&j| b.points[j]).collect();
        let plan = match solver {
            Solver::Exact => network::solve(&sa, &sb, &network::Euclid::new(pa, &pb))?,
            Solver::Sinkhorn { epsilon } => sinkhorn(&sa, &sb, |i, j| euclid(pa[i], pb[j]), epsilon, 2_000, 1e-10)?,
        };
        flows.extend(plan.flows.into_iter().map(|(i, j, f)| (rows[i], cols[j], f)));
    }

    let cost: f64 = flows.iter().map(|&(i, j, f)| f * euclid(a.points[i], b.points[j])).sum();
    flows.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
    Ok((cost, FlowPlan { flows, cost }))
}

/// Same quantity as [`emd`], solved by the dense LP oracle. Only for tests
/// and cross-checking; refuses problems with more than [`ORACLE_LIMIT`]
/// flow variables.
pub fn emd_lp_oracle(a: &PointMass, b: &PointMass) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySide);
    }
    let (n, m) = (a.len(), b.len());
    if n * m > ORACLE_LIMIT {
        return Err(Error::SizeGuard { size: n * m, limit: ORACLE_LIMIT });
    }
    let mut cost = Vec::with_capacity(n * m);
    for p in &a.points {
        for q in &b.points {
            cost.push(euclid(*p, *q));
        }
    }
    lp_transport_oracle(&a.weights, &b.weights, &cost)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_page_box_rasterizes_uniformly() {
        let pm = rasterize(&[LayoutElement::new(0, 0, 0, 300, 200)], PageSize::new(300, 200), 4).unwrap();
        assert_eq!(pm.len(), 16);
        assert!(pm.weights().iter().all(|&w| w == 1.0 / 16.0));
        assert_eq!(pm.points()[0], [0.125, 0.125]);
        assert_eq!(pm.points()[15], [0.875, 0.875]);
    }

    #[test]
    fn no_boxes_rasterize_to_empty() {
        assert!(rasterize(&[], PageSize::new(10, 10), 8).unwrap().is_empty());
    }

    #[test]
    fn overlapping_boxes_count_once() {
        let b = LayoutElement::new(0, 0, 0, 50, 100);
        let pm = rasterize(&[b, b], PageSize::new(100, 100), 4).unwrap();
        assert_eq!(pm.len(), 8);
    }

    #[test]
    fn rejects_unnormalized_weights() {
        assert!(PointMass::new(vec![[0.0, 0.0]], vec![0.5]).is_err());
        assert!(PointMass::new(vec![[f64::NAN, 0.0]], vec![1.0]).is_err());
    }

    #[test]
    fn single_point_translation() {
        let a = PointMass::uniform(vec![[0.25, 0.5]]).unwrap();
        let b = PointMass::uniform(vec![[0.75, 0.5]]).unwrap();
        let (d, plan) = emd(&a, &b).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
        assert_eq!(plan.flows, vec![(0, 0, 1.0)]);
        assert!((emd_lp_oracle(&a, &b).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn identical_clouds() {
        let a = PointMass::new(vec![[0.1, 0.2], [0.7, 0.3], [0.5, 0.9]], vec![0.2, 0.5, 0.3]).unwrap();
        let (d, plan) = emd(&a, &a).unwrap();
        assert_eq!(d, 0.0);
        plan.check_feasible(a.weights(), a.weights(), FEASIBILITY_TOL).unwrap();
        assert!(emd_lp_oracle(&a, &a).unwrap().abs() < 1e-12);
    }

    #[test]
    fn empty_side_is_an_error() {
        let a = PointMass::uniform(vec![[0.1, 0.2]]).unwrap();
        assert!(matches!(emd(&a, &PointMass::empty()), Err(Error::EmptySide)));
        assert!(matches!(emd(&PointMass::empty(), &a), Err(Error::EmptySide)));
    }

    #[test]
    fn partial_overlap_cancels_shared_mass() {
        // Two 2-point clouds share one location; only the other half moves.
        let a = PointMass::uniform(vec![[0.0, 0.0], [0.5, 0.5]]).unwrap();
        let b = PointMass::uniform(vec![[0.5, 0.5], [0.5, 1.0]]).unwrap();
        let (d, plan) = emd(&a, &b).unwrap();
        let oracle = emd_lp_oracle(&a, &b).unwrap();
        assert!((d - oracle).abs() < 1e-12, "{d} vs {oracle}");
        plan.check_feasible(a.weights(), b.weights(), FEASIBILITY_TOL).unwrap();
    }

    #[test]
    fn sinkhorn_solver_is_close() {
        let a = PointMass::uniform(vec![[0.1, 0.1], [0.9, 0.2], [0.4, 0.8]]).unwrap();
        let b = PointMass::uniform(vec![[0.2, 0.2], [0.6, 0.6]]).unwrap();
        let exact = emd(&a, &b).unwrap().0;
        let approx = emd_with(&a, &b, Solver::Sinkhorn { epsilon: 1e-3 }).unwrap().0;
        assert!((exact - approx).abs() < 1e-2, "{exact} vs {approx}");
    }
}
