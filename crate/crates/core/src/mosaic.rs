//! Nearest-box plans for pasting real crops into generated layouts. Only
//! the plan is produced; no pixels are touched.

use serde::Serialize;

use crate::error::Result;
use crate::layout::{check_shared_schema, Layout, LayoutElement, PageSize};

/// Weights of the aspect-ratio and relative-area terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MosaicWeights {
    pub aspect: f64,
    pub area: f64,
}

impl Default for MosaicWeights {
    fn default() -> Self {
        Self { aspect: 1.0, area: 1.0 }
    }
}

/// `aspect * |ln(ar_g / ar_r)| + area * |ln(A_g / A_r)|`, areas relative to
/// each box's page. Classes are not compared here.
pub fn box_cost(g: &LayoutElement, gp: PageSize, r: &LayoutElement, rp: PageSize, w: MosaicWeights) -> f64 {
    let ar = |e: &LayoutElement| e.w as f64 / e.h as f64;
    let rel = |e: &LayoutElement, p: PageSize| e.area() as f64 / p.area();
    w.aspect * (ar(g) / ar(r)).ln().abs() + w.area * (rel(g, gp) / rel(r, rp)).ln().abs()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MosaicEntry {
    /// Index of the generated layout and of the box within it.
    pub layout: usize,
    pub element: usize,
    pub class: String,
    /// `[x, y, w, h]` in the generated layout.
    pub target_bbox: [u32; 4],
    pub matched: bool,
    pub source_image: Option<String>,
    pub source_bbox: Option<[u32; 4]>,
    pub cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MosaicPlan {
    pub weights: MosaicWeights,
    pub unmatched: usize,
    pub entries: Vec<MosaicEntry>,
}

fn bbox(e: &LayoutElement) -> [u32; 4] {
    [e.x, e.y, e.w, e.h]
}

/// For every generated box, the real box of the same class with the lowest
/// [`box_cost`] (first one on ties). Real layouts without an id are named
/// `real-{index}`.
pub fn mosaic_plan(generated: &[Layout], real: &[Layout], weights: MosaicWeights) -> Result<MosaicPlan> {
    check_shared_schema(generated.iter().chain(real))?;
    let k = generated.iter().chain(real).next().map_or(0, Layout::num_classes);
    let mut pool: Vec<Vec<(usize, &LayoutElement)>> = vec![Vec::new(); k];
    for (i, l) in real.iter().enumerate() {
        for e in l.elements() {
            pool[e.class_id].push((i, e));
        }
    }
    let mut entries = Vec::new();
    let mut unmatched = 0;
    for (li, g) in generated.iter().enumerate() {
        for (ei, e) in g.elements().iter().enumerate() {
            let mut best: Option<(f64, usize, &LayoutElement)> = None;
            for &(ri, r) in &pool[e.class_id] {
                let c = box_cost(e, g.page(), r, real[ri].page(), weights);
                if best.is_none_or(|b| c < b.0) {
                    best = Some((c, ri, r));
                }
            }
            if best.is_none() {
                unmatched += 1;
            }
            entries.push(MosaicEntry {
                layout: li,
                element: ei,
                class: g.schema().name(e.class_id).unwrap_or("?").to_owned(),
                target_bbox: bbox(e),
                matched: best.is_some(),
                source_image: best.map(|b| real[b.1].id().map_or_else(|| format!("real-{}", b.1), str::to_owned)),
                source_bbox: best.map(|b| bbox(b.2)),
                cost: best.map(|b| b.0),
            });
        }
    }
    Ok(MosaicPlan { weights, unmatched, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::ClassSchema;
    use std::sync::Arc;

    fn layout(els: &[(usize, u32, u32, u32, u32)]) -> Layout {
        let els = els.iter().map(|&(c, x, y, w, h)| LayoutElement::new(c, x, y, w, h)).collect();
        Layout::new(els, PageSize::new(100, 100), Arc::new(ClassSchema::toy())).unwrap()
    }

    #[test]
    fn exact_box_is_a_zero_cost_match() {
        let g = [layout(&[(0, 5, 5, 20, 10)])];
        let r = [layout(&[(0, 50, 50, 40, 40), (0, 70, 70, 20, 10)]).with_id("img-7")];
        let plan = mosaic_plan(&g, &r, MosaicWeights::default()).unwrap();
        let e = &plan.entries[0];
        assert_eq!(e.cost, Some(0.0));
        assert_eq!(e.source_image.as_deref(), Some("img-7"));
        assert_eq!(e.source_bbox, Some([70, 70, 20, 10]));
    }

    #[test]
    fn missing_class_is_flagged() {
        let g = [layout(&[(2, 5, 5, 20, 10)])];
        let r = [layout(&[(0, 5, 5, 20, 10)])];
        let plan = mosaic_plan(&g, &r, MosaicWeights::default()).unwrap();
        assert_eq!(plan.unmatched, 1);
        assert!(!plan.entries[0].matched);
        assert_eq!(plan.entries[0].source_bbox, None);
    }
}
