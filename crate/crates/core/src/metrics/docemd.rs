use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::layout::{check_shared_schema, Layout, LayoutElement};
use crate::ot::{emd_with, rasterize, PointMass, Solver};

pub const DEFAULT_RASTER_GRID: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DocEmdConfig {
    /// Penalty per class present in exactly one layout.
    pub lambda: f64,
    /// Lattice resolution used to rasterize each class union.
    pub grid: usize,
    pub solver: Solver,
}

impl Default for DocEmdConfig {
    fn default() -> Self {
        Self { lambda: 1.0, grid: DEFAULT_RASTER_GRID, solver: Solver::Exact }
    }
}

impl DocEmdConfig {
    pub fn with_grid(mut self, grid: usize) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Validation(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.grid < 2 {
            return Err(Error::Validation(format!("raster grid must be >= 2, got {}", self.grid)));
        }
        Ok(())
    }
}

/// Doc-EMD of one layout pair, broken down by class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub total: f64,
    /// `(class_id, emd)` for every class rasterizing nonempty on both sides.
    pub per_class: Vec<(usize, f64)>,
    /// Classes charged `lambda`: present on exactly one side, or present on
    /// both but rasterizing to nothing on one of them.
    pub penalty_classes: Vec<usize>,
    /// Subset of `penalty_classes` that was present on both sides.
    pub empty_raster_classes: Vec<usize>,
    pub lambda: f64,
}

impl MetricReport {
    pub fn breakdown_sum(&self) -> f64 {
        self.per_class.iter().map(|c| c.1).sum::<f64>() + self.lambda * self.penalty_classes.len() as f64
    }

    pub fn csv_header(class_names: &[String]) -> String {
        let mut cols = vec!["a".to_owned(), "b".to_owned(), "total".to_owned()];
        cols.extend(class_names.iter().map(|n| format!("emd_{n}")));
        cols.push("penalty_classes".into());
        cols.join(",")
    }

    /// One CSV row; classes without an EMD term are left blank and penalty
    /// classes are `;`-separated names.
    pub fn csv_row(&self, a: &str, b: &str, class_names: &[String]) -> String {
        let mut cols = vec![a.to_owned(), b.to_owned(), format!("{}", self.total)];
        for c in 0..class_names.len() {
            let v = self.per_class.iter().find(|t| t.0 == c).map(|t| format!("{}", t.1));
            cols.push(v.unwrap_or_default());
        }
        let pen: Vec<&str> = self.penalty_classes.iter().map(|&c| class_names[c].as_str()).collect();
        cols.push(pen.join(";"));
        cols.join(",")
    }
}

/// Per-class rasterized densities of one layout.
pub(crate) struct Rasters {
    present: Vec<bool>,
    masses: Vec<PointMass>,
}

impl Rasters {
    pub(crate) fn new(layout: &Layout, grid: usize) -> Result<Self> {
        let k = layout.num_classes();
        let mut by_class: Vec<Vec<LayoutElement>> = vec![Vec::new(); k];
        for e in layout.elements() {
            by_class[e.class_id].push(*e);
        }
        let present = by_class.iter().map(|b| !b.is_empty()).collect();
        let masses = by_class
            .iter()
            .map(|b| rasterize(b, layout.page(), grid))
            .collect::<Result<_>>()?;
        Ok(Self { present, masses })
    }
}

pub(crate) fn doc_emd_rasters(s: &Rasters, t: &Rasters, cfg: &DocEmdConfig) -> Result<MetricReport> {
    let mut per_class = Vec::new();
    let mut penalty_classes = Vec::new();
    let mut empty_raster_classes = Vec::new();
    for c in 0..s.present.len() {
        match (s.present[c], t.present[c]) {
            (false, false) => {}
            (true, false) | (false, true) => penalty_classes.push(c),
            (true, true) => {
                let (a, b) = (&s.masses[c], &t.masses[c]);
                if a.is_empty() || b.is_empty() {
                    if a.is_empty() && b.is_empty() {
                        // Both sides degenerate: the class is absent from both.
                        continue;
                    }
                    penalty_classes.push(c);
                    empty_raster_classes.push(c);
                } else {
                    per_class.push((c, emd_with(a, b, cfg.solver)?.0));
                }
            }
        }
    }
    let mut report =
        MetricReport { total: 0.0, per_class, penalty_classes, empty_raster_classes, lambda: cfg.lambda };
    report.total = report.breakdown_sum();
    Ok(report)
}

/// Sum of per-class EMDs between class unions plus `lambda` for every class
/// found in only one of the two layouts.
pub fn doc_emd(s: &Layout, t: &Layout, cfg: &DocEmdConfig) -> Result<MetricReport> {
    cfg.validate()?;
    check_shared_schema([s, t])?;
    doc_emd_rasters(&Rasters::new(s, cfg.grid)?, &Rasters::new(t, cfg.grid)?, cfg)
}

/// `|a| x |b|` matrix of Doc-EMD totals, computed in parallel over rows.
pub fn doc_emd_matrix(a: &[Layout], b: &[Layout], cfg: &DocEmdConfig) -> Result<Vec<Vec<f64>>> {
    Ok(doc_emd_reports(a, b, cfg)?
        .into_iter()
        .map(|row| row.into_iter().map(|r| r.total).collect())
        .collect())
}

/// Full reports for every pair of `a x b`.
pub fn doc_emd_reports(a: &[Layout], b: &[Layout], cfg: &DocEmdConfig) -> Result<Vec<Vec<MetricReport>>> {
    cfg.validate()?;
    check_shared_schema(a.iter().chain(b))?;
    let ra: Vec<Rasters> = a.par_iter().map(|l| Rasters::new(l, cfg.grid)).collect::<Result<_>>()?;
    let rb: Vec<Rasters> = b.par_iter().map(|l| Rasters::new(l, cfg.grid)).collect::<Result<_>>()?;
    ra.par_iter()
        .map(|s| rb.iter().map(|t| doc_emd_rasters(s, t, cfg)).collect::<Result<Vec<_>>>())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{ClassSchema, PageSize};
    use std::sync::Arc;

    fn layout(els: &[(usize, u32, u32, u32, u32)]) -> Layout {
        let s = Arc::new(ClassSchema::publaynet());
        let els = els.iter().map(|&(c, x, y, w, h)| LayoutElement::new(c, x, y, w, h)).collect();
        Layout::new(els, PageSize::new(200, 200), s).unwrap()
    }

    #[test]
    fn reflexive_zero() {
        let s = layout(&[(0, 10, 10, 50, 30), (1, 100, 120, 40, 40), (0, 20, 150, 60, 20)]);
        let r = doc_emd(&s, &s, &DocEmdConfig::default()).unwrap();
        assert_eq!(r.total, 0.0);
        assert!(r.penalty_classes.is_empty());
    }

    #[test]
    fn disjoint_classes_cost_two_penalties() {
        let s = layout(&[(0, 10, 10, 50, 30)]);
        let t = layout(&[(1, 10, 10, 50, 30)]);
        let r = doc_emd(&s, &t, &DocEmdConfig::default()).unwrap();
        assert_eq!(r.total, 2.0);
        assert_eq!(r.penalty_classes, vec![0, 1]);
        assert!(r.per_class.is_empty());
    }

    #[test]
    fn degenerate_raster_is_penalized() {
        // A 1-pixel box falls between lattice centres at grid 4.
        let s = layout(&[(0, 0, 0, 1, 1)]);
        let t = layout(&[(0, 0, 0, 100, 100)]);
        let r = doc_emd(&s, &t, &DocEmdConfig::default().with_grid(4)).unwrap();
        assert_eq!(r.penalty_classes, vec![0]);
        assert_eq!(r.empty_raster_classes, vec![0]);
        assert_eq!(r.total, 1.0);
    }

    #[test]
    fn schema_mismatch() {
        let s = layout(&[]);
        let t = Layout::empty(PageSize::new(10, 10), Arc::new(ClassSchema::toy())).unwrap();
        assert!(matches!(doc_emd(&s, &t, &DocEmdConfig::default()), Err(Error::Validation(_))));
    }

    #[test]
    fn csv_row_layout() {
        let s = layout(&[(0, 0, 0, 100, 100), (2, 0, 0, 10, 10)]);
        let t = layout(&[(0, 100, 0, 100, 100)]);
        let r = doc_emd(&s, &t, &DocEmdConfig::default().with_grid(2)).unwrap();
        let names = ClassSchema::publaynet().names().to_vec();
        assert_eq!(
            MetricReport::csv_header(&names),
            "a,b,total,emd_text,emd_title,emd_list,emd_figure,emd_table,penalty_classes"
        );
        assert_eq!(r.csv_row("s", "t", &names), "s,t,1.5,0.5,,,,,list");
    }
}
