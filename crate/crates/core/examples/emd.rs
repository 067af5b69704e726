//! Exact earth mover's distance between point clouds, checked against the
//! dense LP.

use doclayout::layout::{LayoutElement, PageSize};
use doclayout::ot::{emd, emd_lp_oracle, emd_with, rasterize, PointMass, Solver};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> doclayout::Result<()> {
    let a = PointMass::uniform(vec![[0.25, 0.5]])?;
    let b = PointMass::uniform(vec![[0.75, 0.5]])?;
    println!("one mass moved by 0.5: {}", emd(&a, &b)?.0);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut cloud = |n: usize| {
        let pts = (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
        let w = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        PointMass::normalized(pts, w)
    };
    let (p, q) = (cloud(6)?, cloud(7)?);
    let (d, plan) = emd(&p, &q)?;
    println!("6 vs 7 points: network simplex {d:.9}, LP {:.9}", emd_lp_oracle(&p, &q)?);
    for (i, j, f) in &plan.flows {
        println!("  {i} -> {j}  {f:.4}");
    }

    let page = PageSize::new(600, 800);
    let left = rasterize(&[LayoutElement::new(0, 0, 0, 300, 800)], page, 64)?;
    let right = rasterize(&[LayoutElement::new(0, 300, 0, 300, 800)], page, 64)?;
    println!("half-page boxes, {} lattice points each: {:.6}", left.len(), emd(&left, &right)?.0);
    let approx = emd_with(&left, &right, Solver::Sinkhorn { epsilon: 0.01 })?.0;
    println!("entropic approximation: {approx:.6}");
    Ok(())
}
