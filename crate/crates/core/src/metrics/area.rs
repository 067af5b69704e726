use crate::layout::Layout;

/// How overlap area is accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OverlapMode {
    /// Area covered by two or more boxes, counted once.
    #[default]
    Union,
    /// Sum of intersection areas over all unordered box pairs; may exceed 100.
    PairwiseSum,
}

impl std::str::FromStr for OverlapMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "union" => Ok(Self::Union),
            "pairwise-sum" => Ok(Self::PairwiseSum),
            _ => Err(crate::Error::Validation(format!(
                "unknown overlap mode '{s}' (expected union or pairwise-sum)"
            ))),
        }
    }
}

/// Exact area (in pixels^2) covered by at least `k` boxes, by coordinate
/// compression.
fn area_covered_at_least(layout: &Layout, k: usize) -> u64 {
    let els = layout.elements();
    if els.len() < k || els.is_empty() {
        return 0;
    }
    let mut xs: Vec<u64> = els.iter().flat_map(|e| [e.x as u64, e.right()]).collect();
    let mut ys: Vec<u64> = els.iter().flat_map(|e| [e.y as u64, e.bottom()]).collect();
    xs.sort_unstable();
    xs.dedup();
    ys.sort_unstable();
    ys.dedup();
    let mut total = 0u64;
    for xw in xs.windows(2) {
        let column: Vec<_> = els.iter().filter(|e| e.x as u64 <= xw[0] && e.right() >= xw[1]).collect();
        if column.len() < k {
            continue;
        }
        for yw in ys.windows(2) {
            let n = column.iter().filter(|e| e.y as u64 <= yw[0] && e.bottom() >= yw[1]).count();
            if n >= k {
                total += (xw[1] - xw[0]) * (yw[1] - yw[0]);
            }
        }
    }
    total
}

/// Percentage of the page covered by the union of boxes.
pub fn coverage_pct(layout: &Layout) -> f64 {
    100.0 * area_covered_at_least(layout, 1) as f64 / layout.page().area()
}

/// Percentage of the page where boxes overlap.
pub fn overlap_pct(layout: &Layout, mode: OverlapMode) -> f64 {
    let area = match mode {
        OverlapMode::Union => area_covered_at_least(layout, 2),
        OverlapMode::PairwiseSum => {
            let els = layout.elements();
            let mut sum = 0u64;
            for (i, a) in els.iter().enumerate() {
                for b in &els[i + 1..] {
                    let w = a.right().min(b.right()).saturating_sub((a.x).max(b.x) as u64);
                    let h = a.bottom().min(b.bottom()).saturating_sub((a.y).max(b.y) as u64);
                    sum += w * h;
                }
            }
            sum
        }
    };
    100.0 * area as f64 / layout.page().area()
}
