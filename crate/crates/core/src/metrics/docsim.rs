use rayon::prelude::*;

use crate::error::Result;
use crate::layout::{check_shared_schema, Layout, LayoutElement, PageSize};
use crate::matching::hungarian;

/// Similarity weight of two boxes. Zero across classes.
///
/// `sqrt(min(a1, a2)) * 2^(-dc - 2 ds)` with areas, centre distance `dc` and
/// size difference `ds = |dw| + |dh|` all measured in page-normalized units.
pub fn box_weight(b1: &LayoutElement, p1: PageSize, b2: &LayoutElement, p2: PageSize) -> f64 {
    if b1.class_id != b2.class_id {
        return 0.0;
    }
    let n = |e: &LayoutElement, p: PageSize| {
        let (pw, ph) = (p.width as f64, p.height as f64);
        (e.x as f64 / pw, e.y as f64 / ph, e.w as f64 / pw, e.h as f64 / ph)
    };
    let (x1, y1, w1, h1) = n(b1, p1);
    let (x2, y2, w2, h2) = n(b2, p2);
    let dc = ((x1 + w1 / 2.0 - x2 - w2 / 2.0).powi(2) + (y1 + h1 / 2.0 - y2 - h2 / 2.0).powi(2)).sqrt();
    let ds = (w1 - w2).abs() + (h1 - h2).abs();
    (w1 * h1).min(w2 * h2).sqrt() * (-dc - 2.0 * ds).exp2()
}

/// Size-weighted geometric similarity in `[0, 1]`; higher is more similar.
/// Boxes are matched one-to-one to maximize the summed weight, normalized by
/// the larger box count.
pub fn docsim(s: &Layout, t: &Layout) -> Result<f64> {
    check_shared_schema([s, t])?;
    docsim_unchecked(s, t)
}

fn docsim_unchecked(s: &Layout, t: &Layout) -> Result<f64> {
    if s.is_empty() || t.is_empty() {
        return Ok(0.0);
    }
    let w: Vec<Vec<f64>> = s
        .elements()
        .iter()
        .map(|a| t.elements().iter().map(|b| box_weight(a, s.page(), b, t.page())).collect())
        .collect();
    let neg: Vec<Vec<f64>> = w.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
    let asg = hungarian(&neg)?;
    let total: f64 = asg.pairs.iter().map(|&(i, j)| w[i][j]).sum();
    Ok(total / s.len().max(t.len()) as f64)
}

/// `|a| x |b|` DocSim matrix, computed in parallel over rows.
pub fn docsim_matrix(a: &[Layout], b: &[Layout]) -> Result<Vec<Vec<f64>>> {
    check_shared_schema(a.iter().chain(b))?;
    a.par_iter()
        .map(|s| b.iter().map(|t| docsim_unchecked(s, t)).collect())
        .collect()
}
