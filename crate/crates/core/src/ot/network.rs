//! Exact balanced transportation solver (primal network simplex on the
//! bipartite supply/demand graph).
//!
//! The basis is a spanning tree with `n + m - 1` arcs, degenerate zero-flow
//! arcs included. Each iteration refreshes potentials in the subtree that
//! moved, prices arcs block by block, and pivots the entering arc around the unique
//! tree cycle it closes.

use crate::error::{Error, Result};

use super::FlowPlan;

#[derive(Debug, Clone, Copy)]
struct BasicArc {
    row: usize,
    col: usize,
    flow: f64,
}

struct Tree {
    parent: Vec<usize>,
    parent_arc: Vec<usize>,
    depth: Vec<usize>,
    potential: Vec<f64>,
    queue: Vec<usize>,
}

const NONE: usize = usize::MAX;

pub(crate) trait Costs {
    fn at(&self, i: usize, j: usize) -> f64;

    /// `out[k] = at(i, j0 + k)`.
    fn row(&self, i: usize, j0: usize, out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.at(i, j0 + k);
        }
    }
}

impl<F: Fn(usize, usize) -> f64> Costs for F {
    fn at(&self, i: usize, j: usize) -> f64 {
        self(i, j)
    }
}

/// Euclidean distances between two point lists, columns stored as separate
/// coordinate arrays so a row segment is a straight vector loop.
pub(crate) struct Euclid {
    rows: Vec<[f64; 2]>,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Euclid {
    pub(crate) fn new(rows: Vec<[f64; 2]>, cols: &[[f64; 2]]) -> Self {
        Self { rows, xs: cols.iter().map(|p| p[0]).collect(), ys: cols.iter().map(|p| p[1]).collect() }
    }
}

impl Costs for Euclid {
    fn at(&self, i: usize, j: usize) -> f64 {
        let [x, y] = self.rows[i];
        ((x - self.xs[j]).powi(2) + (y - self.ys[j]).powi(2)).sqrt()
    }

    fn row(&self, i: usize, j0: usize, out: &mut [f64]) {
        let [x, y] = self.rows[i];
        let xs = &self.xs[j0..j0 + out.len()];
        let ys = &self.ys[j0..j0 + out.len()];
        for ((o, &cx), &cy) in out.iter_mut().zip(xs).zip(ys) {
            let (dx, dy) = (x - cx, y - cy);
            *o = (dx * dx + dy * dy).sqrt();
        }
    }
}

impl Tree {
    fn new(nodes: usize) -> Self {
        Self {
            parent: vec![NONE; nodes],
            parent_arc: vec![NONE; nodes],
            depth: vec![0; nodes],
            potential: vec![0.0; nodes],
            queue: Vec::with_capacity(nodes),
        }
    }

    /// Rows are nodes `0..n`, columns `n..n+m`; row potentials `u`, column
    /// potentials `v` with `u_i + v_j = c_ij` on every basic arc.
    fn rebuild<C: Costs>(
        &mut self,
        n: usize,
        arcs: &[BasicArc],
        adj: &[Vec<usize>],
        cost: &C,
    ) -> Result<()> {
        self.parent.fill(NONE);
        self.queue.clear();
        self.queue.push(0);
        self.parent[0] = 0;
        self.parent_arc[0] = NONE;
        self.depth[0] = 0;
        self.potential[0] = 0.0;
        let mut head = 0;
        while head < self.queue.len() {
            let node = self.queue[head];
            head += 1;
            for &a in &adj[node] {
                let arc = arcs[a];
                let other = if node < n { n + arc.col } else { arc.row };
                if self.parent[other] != NONE {
                    continue;
                }
                self.parent[other] = node;
                self.parent_arc[other] = a;
                self.depth[other] = self.depth[node] + 1;
                let c = cost.at(arc.row, arc.col);
                self.potential[other] = c - self.potential[node];
                self.queue.push(other);
            }
        }
        if self.queue.len() != self.parent.len() {
            return Err(Error::Numerical("transport basis is not a spanning tree".into()));
        }
        Ok(())
    }

    /// Hangs the subtree containing `x` (already cut loose) below `y` through
    /// basic arc `via`, refreshing parents, depths and potentials inside it.
    fn reattach<C: Costs>(
        &mut self,
        n: usize,
        arcs: &[BasicArc],
        adj: &[Vec<usize>],
        cost: &C,
        (x, y, via): (usize, usize, usize),
    ) {
        self.parent[x] = y;
        self.parent_arc[x] = via;
        self.depth[x] = self.depth[y] + 1;
        let a = arcs[via];
        self.potential[x] = cost.at(a.row, a.col) - self.potential[y];
        self.queue.clear();
        self.queue.push(x);
        let mut head = 0;
        while head < self.queue.len() {
            let node = self.queue[head];
            head += 1;
            for &k in &adj[node] {
                if k == self.parent_arc[node] {
                    continue;
                }
                let arc = arcs[k];
                let other = if node < n { n + arc.col } else { arc.row };
                self.parent[other] = node;
                self.parent_arc[other] = k;
                self.depth[other] = self.depth[node] + 1;
                self.potential[other] = cost.at(arc.row, arc.col) - self.potential[node];
                self.queue.push(other);
            }
        }
    }
}

/// Minimum-cost transport of `supply` onto `demand` under `cost(i, j)`.
///
/// `demand` is rescaled to the supply total, so the problem is always
/// balanced. Weights must be finite and nonnegative with positive totals.
pub fn transport<C: Fn(usize, usize) -> f64>(supply: &[f64], demand: &[f64], cost: C) -> Result<FlowPlan> {
    solve(supply, demand, &cost)
}

pub(crate) fn solve<C: Costs>(supply: &[f64], demand: &[f64], cost: &C) -> Result<FlowPlan> {
    let n = supply.len();
    let m = demand.len();
    if n == 0 || m == 0 {
        return Err(Error::EmptySide);
    }
    for &w in supply.iter().chain(demand) {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::Validation(format!("invalid transport weight {w}")));
        }
    }
    let total_a: f64 = supply.iter().sum();
    let total_b: f64 = demand.iter().sum();
    if total_a <= 0.0 || total_b <= 0.0 {
        return Err(Error::EmptySide);
    }
    let scale = total_a / total_b;
    let demand: Vec<f64> = demand.iter().map(|w| w * scale).collect();

    let mut arcs = north_west(supply, &demand);
    debug_assert_eq!(arcs.len(), n + m - 1);

    let nodes = n + m;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    for (k, a) in arcs.iter().enumerate() {
        adj[a.row].push(k);
        adj[n + a.col].push(k);
    }

    let mut cost_scale = 1.0f64;
    for a in &arcs {
        let c = cost.at(a.row, a.col);
        if !c.is_finite() {
            return Err(Error::Numerical(format!("non-finite cost at ({}, {})", a.row, a.col)));
        }
        cost_scale = cost_scale.max(c.abs());
    }
    let eps = 1e-12 * cost_scale;

    let total_arcs = n * m;
    let block = ((total_arcs as f64).sqrt().ceil() as usize).max(32).min(total_arcs);
    let mut cursor = 0usize;
    let mut row_buf = vec![0.0; m];
    let mut tree = Tree::new(nodes);
    let max_iter = 200 * (n + m) * ((n + m) as f64).log2().ceil().max(1.0) as usize + 10_000;

    let mut path_a = Vec::new();
    let mut path_b = Vec::new();
    let mut cycle = Vec::new();

    tree.rebuild(n, &arcs, &adj, cost)?;
    for _iter in 0..max_iter {
        // Block pricing: most negative reduced cost within the first block
        // that contains any candidate.
        let mut best = (NONE, NONE, -eps);
        let mut scanned = 0;
        let (mut r, mut c) = (cursor / m, cursor % m);
        while scanned < total_arcs {
            let end = (scanned + block).min(total_arcs);
            let mut left = end - scanned;
            while left > 0 {
                let take = left.min(m - c);
                let ur = tree.potential[r];
                let buf = &mut row_buf[..take];
                cost.row(r, c, buf);
                for (k, (rc, &v)) in buf.iter().zip(&tree.potential[n + c..n + c + take]).enumerate() {
                    let rc = rc - ur - v;
                    if rc < best.2 {
                        best = (r, c + k, rc);
                    }
                }
                left -= take;
                c += take;
                if c == m {
                    c = 0;
                    r = if r + 1 == n { 0 } else { r + 1 };
                }
            }
            scanned = end;
            if best.0 != NONE {
                break;
            }
        }
        cursor = r * m + c;
        if best.0 == NONE {
            return Ok(finish(&arcs, cost));
        }
        if !best.2.is_finite() {
            return Err(Error::Numerical("non-finite reduced cost".into()));
        }
        let (er, ec) = (best.0, best.1);

        // Tree paths from the row node and the column node up to their LCA.
        path_a.clear();
        path_b.clear();
        let (mut u, mut v) = (er, n + ec);
        while tree.depth[u] > tree.depth[v] {
            path_a.push(tree.parent_arc[u]);
            u = tree.parent[u];
        }
        while tree.depth[v] > tree.depth[u] {
            path_b.push(tree.parent_arc[v]);
            v = tree.parent[v];
        }
        while u != v {
            path_a.push(tree.parent_arc[u]);
            u = tree.parent[u];
            path_b.push(tree.parent_arc[v]);
            v = tree.parent[v];
        }
        // Cycle order: entering arc, then column node back to row node.
        // Arcs alternate -, +, -, ... starting at the column side.
        cycle.clear();
        cycle.extend(path_b.iter().copied());
        cycle.extend(path_a.iter().rev().copied());
        debug_assert!(cycle.len() % 2 == 1);

        let mut theta = f64::INFINITY;
        let mut leaving = NONE;
        for (k, &a) in cycle.iter().enumerate() {
            if k % 2 == 0 && arcs[a].flow <= theta {
                theta = arcs[a].flow;
                leaving = a;
            }
        }
        for (k, &a) in cycle.iter().enumerate() {
            if a == leaving {
                continue;
            }
            if k % 2 == 0 {
                arcs[a].flow = (arcs[a].flow - theta).max(0.0);
            } else {
                arcs[a].flow += theta;
            }
        }

        // The endpoint of the entering arc on the leaving arc's side of the
        // cycle is cut off from the root; hang it from the other endpoint.
        let hang = if path_a.contains(&leaving) { (er, n + ec, leaving) } else { (n + ec, er, leaving) };
        let old = arcs[leaving];
        adj[old.row].retain(|&k| k != leaving);
        adj[n + old.col].retain(|&k| k != leaving);
        arcs[leaving] = BasicArc { row: er, col: ec, flow: theta };
        adj[er].push(leaving);
        adj[n + ec].push(leaving);
        tree.reattach(n, &arcs, &adj, cost, hang);
    }
    Err(Error::Numerical(format!("network simplex did not converge on a {n}x{m} problem")))
}

/// North-west corner start: exactly n + m - 1 arcs forming a tree.
fn north_west(supply: &[f64], demand: &[f64]) -> Vec<BasicArc> {
    let (n, m) = (supply.len(), demand.len());
    let mut arcs = Vec::with_capacity(n + m - 1);
    let mut ra = supply.to_vec();
    let mut rb = demand.to_vec();
    let (mut i, mut j) = (0, 0);
    loop {
        let f = ra[i].min(rb[j]);
        arcs.push(BasicArc { row: i, col: j, flow: f });
        ra[i] -= f;
        rb[j] -= f;
        if i == n - 1 && j == m - 1 {
            break;
        }
        if i == n - 1 {
            j += 1;
        } else if j == m - 1 || ra[i] <= rb[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    arcs
}

fn finish<C: Costs>(arcs: &[BasicArc], cost: &C) -> FlowPlan {
    let mut flows: Vec<(usize, usize, f64)> = arcs
        .iter()
        .filter(|a| a.flow > 0.0)
        .map(|a| (a.row, a.col, a.flow))
        .collect();
    flows.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
    let cost = flows.iter().map(|&(i, j, f)| f * cost.at(i, j)).sum();
    FlowPlan { flows, cost }
}
