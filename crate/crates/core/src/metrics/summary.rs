use serde::Serialize;

use super::area::{coverage_pct, overlap_pct, OverlapMode};
use crate::layout::Layout;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusSummary {
    pub layouts: usize,
    pub mean_overlap: f64,
    pub mean_coverage: f64,
    /// `(class name, box count)` in schema order.
    pub class_histogram: Vec<(String, usize)>,
    pub boxes_total: usize,
    pub boxes_mean: f64,
    pub boxes_min: usize,
    pub boxes_max: usize,
}

/// Mean overlap and coverage plus class and box-count statistics. An empty
/// corpus yields all zeros and an empty histogram.
pub fn corpus_summary(corpus: &[Layout], mode: OverlapMode) -> CorpusSummary {
    let n = corpus.len();
    let mut class_histogram: Vec<(String, usize)> = corpus
        .first()
        .map(|l| l.schema().names().iter().map(|s| (s.clone(), 0)).collect())
        .unwrap_or_default();
    let (mut ov, mut cov) = (0.0, 0.0);
    for l in corpus {
        ov += overlap_pct(l, mode);
        cov += coverage_pct(l);
        for e in l.elements() {
            class_histogram[e.class_id].1 += 1;
        }
    }
    let counts = corpus.iter().map(Layout::len);
    let boxes_total: usize = counts.clone().sum();
    let div = n.max(1) as f64;
    CorpusSummary {
        layouts: n,
        mean_overlap: ov / div,
        mean_coverage: cov / div,
        class_histogram,
        boxes_total,
        boxes_mean: boxes_total as f64 / div,
        boxes_min: counts.clone().min().unwrap_or(0),
        boxes_max: counts.max().unwrap_or(0),
    }
}
