#![allow(dead_code)]

use std::sync::Arc;

use doclayout::layout::{ClassSchema, Layout, LayoutElement, PageSize};
use doclayout::ot::PointMass;
use proptest::prelude::*;
use rand::Rng;

pub fn layout(schema: &Arc<ClassSchema>, page: (u32, u32), els: &[(usize, u32, u32, u32, u32)]) -> Layout {
    let els = els.iter().map(|&(c, x, y, w, h)| LayoutElement::new(c, x, y, w, h)).collect();
    Layout::new(els, PageSize::new(page.0, page.1), schema.clone()).unwrap()
}

pub fn element_in(page: PageSize, classes: usize) -> impl Strategy<Value = LayoutElement> {
    (0..classes, 1..=page.width, 1..=page.height)
        .prop_flat_map(move |(c, w, h)| (Just(c), 0..=page.width - w, 0..=page.height - h, Just(w), Just(h)))
        .prop_map(|(c, x, y, w, h)| LayoutElement::new(c, x, y, w, h))
}

pub fn layout_strategy(schema: Arc<ClassSchema>, max_boxes: usize) -> impl Strategy<Value = Layout> {
    (50u32..=1000, 50u32..=1000).prop_flat_map(move |(w, h)| {
        let page = PageSize::new(w, h);
        let schema = schema.clone();
        prop::collection::vec(element_in(page, schema.len()), 0..=max_boxes)
            .prop_map(move |els| Layout::new(els, page, schema.clone()).unwrap())
    })
}

pub fn random_cloud<R: Rng>(n: usize, rng: &mut R) -> PointMass {
    let pts = (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
    let w = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    PointMass::normalized(pts, w).unwrap()
}

pub fn euclid(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Dense row-major Euclidean cost matrix between two clouds.
pub fn cost_matrix(a: &PointMass, b: &PointMass) -> Vec<f64> {
    a.points().iter().flat_map(|p| b.points().iter().map(move |q| euclid(*p, *q))).collect()
}

/// Every permutation of `0..n` (Heap's algorithm).
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, p: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(p.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, p, out);
            let j = if k % 2 == 0 { i } else { 0 };
            p.swap(j, k - 1);
        }
    }
    let mut p: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    heap(n, &mut p, &mut out);
    out
}

/// Minimum of `sum_i m[i][perm[i]]` over all permutations.
pub fn brute_force_min(m: &[Vec<f64>]) -> f64 {
    permutations(m.len())
        .iter()
        .map(|p| p.iter().enumerate().map(|(i, &j)| m[i][j]).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}
