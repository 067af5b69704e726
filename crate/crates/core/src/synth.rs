//! Seeded synthetic corpora: a two-column article grammar and uniformly
//! random layouts.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::layout::{ClassSchema, Layout, LayoutElement, PageSize};

const TEXT: usize = 0;
const TITLE: usize = 1;
const FIGURE: usize = 2;

/// Title on top, two columns of 2 or 3 text blocks, and an optional figure at
/// the bottom of the right column. Uses the `toy` schema.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyGrammar {
    pub page: PageSize,
    pub figure_prob: f64,
}

impl Default for ToyGrammar {
    fn default() -> Self {
        Self { page: PageSize::new(612, 792), figure_prob: 0.5 }
    }
}

impl ToyGrammar {
    pub const MAX_BOXES: usize = 8;

    /// Token length of the longest layout, framing included.
    pub fn max_len() -> usize {
        5 * Self::MAX_BOXES + 2
    }

    /// Expected share of `[text, title, figure]` among all boxes.
    pub fn class_frequencies(&self) -> [f64; 3] {
        let (text, title, fig) = (5.0, 1.0, self.figure_prob);
        let n = text + title + fig;
        [text / n, title / n, fig / n]
    }

    /// Layout in reading order: title, left column, right column, figure.
    pub fn sample<R: Rng + ?Sized>(&self, schema: &Arc<ClassSchema>, rng: &mut R) -> Layout {
        let (pw, ph) = (self.page.width as f64, self.page.height as f64);
        let margin = (0.07 * pw).round();
        let gutter = (0.04 * pw).round();
        let col_w = ((pw - 2.0 * margin - gutter) / 2.0).floor();
        let bottom = ph - margin;
        let gap = (0.015 * ph).round();

        let mut els = Vec::with_capacity(Self::MAX_BOXES);
        let title_y = margin + rng.random_range(0.0..0.02 * ph);
        let title_h = rng.random_range(0.04 * ph..0.065 * ph);
        let title_w = (pw - 2.0 * margin) * rng.random_range(0.6..1.0);
        els.push(element(TITLE, margin, title_y, title_w, title_h));

        let body_top = title_y + title_h + gap + rng.random_range(0.0..gap);
        let left = column(rng.random_range(2..=3), body_top, bottom, gap, rng);
        for (y, h) in left {
            els.push(element(TEXT, margin, y, col_w, h));
        }
        let right_x = margin + col_w + gutter;
        let figure = rng.random_bool(self.figure_prob);
        let mut right_bottom = bottom;
        let mut fig_box = None;
        if figure {
            let fh = rng.random_range(0.2 * ph..0.32 * ph);
            fig_box = Some(element(FIGURE, right_x, bottom - fh, col_w, fh));
            right_bottom = bottom - fh - gap;
        }
        for (y, h) in column(rng.random_range(2..=3), body_top, right_bottom, gap, rng) {
            els.push(element(TEXT, right_x, y, col_w, h));
        }
        els.extend(fig_box);
        Layout::new(els, self.page, schema.clone()).expect("grammar boxes fit the page")
    }

    pub fn corpus(&self, count: usize, seed: u64) -> Vec<Layout> {
        let schema = Arc::new(ClassSchema::toy());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|i| self.sample(&schema, &mut rng).with_id(format!("toy-{i}"))).collect()
    }
}

fn element(class_id: usize, x: f64, y: f64, w: f64, h: f64) -> LayoutElement {
    LayoutElement::new(class_id, x.round() as u32, y.round() as u32, w.round().max(1.0) as u32, h.round().max(1.0) as u32)
}

/// Splits `[top, bottom]` into `n` stacked blocks of random relative height.
fn column<R: Rng + ?Sized>(n: usize, top: f64, bottom: f64, gap: f64, rng: &mut R) -> Vec<(f64, f64)> {
    let avail = bottom - top - gap * (n - 1) as f64;
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = weights.iter().sum();
    let mut y = top;
    weights
        .iter()
        .map(|w| {
            let h = avail * w / total;
            let block = (y, h.floor());
            y += h + gap;
            block
        })
        .collect()
}

/// Between 1 and `max_boxes` boxes with uniform classes and uniform valid
/// geometry.
pub fn random_layout<R: Rng + ?Sized>(
    schema: &Arc<ClassSchema>,
    page: PageSize,
    max_boxes: usize,
    rng: &mut R,
) -> Layout {
    let n = rng.random_range(1..=max_boxes.max(1));
    let els = (0..n)
        .map(|_| {
            let w = rng.random_range(1..=page.width);
            let h = rng.random_range(1..=page.height);
            let x = rng.random_range(0..=page.width - w);
            let y = rng.random_range(0..=page.height - h);
            LayoutElement::new(rng.random_range(0..schema.len()), x, y, w, h)
        })
        .collect();
    Layout::new(els, page, schema.clone()).expect("random boxes fit the page")
}

pub fn random_corpus(
    count: usize,
    schema: &Arc<ClassSchema>,
    page: PageSize,
    max_boxes: usize,
    seed: u64,
) -> Vec<Layout> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|i| random_layout(schema, page, max_boxes, &mut rng).with_id(format!("random-{i}"))).collect()
}
