use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::layout::{check_shared_schema, Layout};
use crate::ot::transport;

/// Pooled boxes beyond this count are subsampled before the exact solve.
pub const EXACT_POOL_LIMIT: usize = 2000;
pub const DEFAULT_SUBSAMPLE_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeqWasserstein {
    /// W1 between class frequency vectors under 0/1 cost.
    pub class_w: f64,
    /// W2 between pooled normalized `(x, y, w, h)` samples. `None` when only
    /// one corpus has any boxes.
    pub bbox_w: Option<f64>,
}

/// Class frequency vector over all boxes of a corpus; `None` if there are no
/// boxes at all.
pub fn class_frequencies(corpus: &[Layout], k: usize) -> Option<Vec<f64>> {
    let mut counts = vec![0usize; k];
    for e in corpus.iter().flat_map(|l| l.elements()) {
        counts[e.class_id] += 1;
    }
    let n: usize = counts.iter().sum();
    (n > 0).then(|| counts.iter().map(|&c| c as f64 / n as f64).collect())
}

/// Normalized `[x, y, w, h]` of every box in the corpus, in corpus order.
pub fn pooled_boxes(corpus: &[Layout]) -> Vec<[f64; 4]> {
    corpus
        .iter()
        .flat_map(|l| {
            let (pw, ph) = (l.page().width as f64, l.page().height as f64);
            l.elements().iter().map(move |e| [e.x as f64 / pw, e.y as f64 / ph, e.w as f64 / pw, e.h as f64 / ph])
        })
        .collect()
}

/// Exact 2-Wasserstein distance between two uniform 4-d samples.
pub fn w2_uniform(a: &[[f64; 4]], b: &[[f64; 4]]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySide);
    }
    let wa = vec![1.0 / a.len() as f64; a.len()];
    let wb = vec![1.0 / b.len() as f64; b.len()];
    let plan = transport(&wa, &wb, |i, j| sq_dist(&a[i], &b[j]))?;
    Ok(plan.cost.max(0.0).sqrt())
}

pub(crate) fn sq_dist(p: &[f64; 4], q: &[f64; 4]) -> f64 {
    p.iter().zip(q).map(|(u, v)| (u - v) * (u - v)).sum()
}

fn subsample(points: Vec<[f64; 4]>, limit: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 4]> {
    if points.len() <= limit {
        return points;
    }
    let mut idx = sample(rng, points.len(), limit).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| points[i]).collect()
}

/// Sequence Wasserstein distance split into a class part and a box part.
pub fn wasserstein_seq(a: &[Layout], b: &[Layout]) -> Result<SeqWasserstein> {
    wasserstein_seq_with(a, b, EXACT_POOL_LIMIT, DEFAULT_SUBSAMPLE_SEED)
}

pub fn wasserstein_seq_with(a: &[Layout], b: &[Layout], pool_limit: usize, seed: u64) -> Result<SeqWasserstein> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Validation("wasserstein_seq needs two nonempty corpora".into()));
    }
    if pool_limit == 0 {
        return Err(Error::Validation("pool limit must be positive".into()));
    }
    check_shared_schema(a.iter().chain(b))?;
    let k = a[0].num_classes();
    let class_w = match (class_frequencies(a, k), class_frequencies(b, k)) {
        (Some(p), Some(q)) => 0.5 * p.iter().zip(&q).map(|(x, y)| (x - y).abs()).sum::<f64>(),
        (None, None) => 0.0,
        _ => 1.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pa = subsample(pooled_boxes(a), pool_limit, &mut rng);
    let pb = subsample(pooled_boxes(b), pool_limit, &mut rng);
    let bbox_w = match (pa.is_empty(), pb.is_empty()) {
        (true, true) => Some(0.0),
        (false, false) => Some(w2_uniform(&pa, &pb)?),
        _ => None,
    };
    Ok(SeqWasserstein { class_w, bbox_w })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{ClassSchema, LayoutElement, PageSize};
    use std::sync::Arc;

    fn layout(els: &[(usize, u32, u32, u32, u32)]) -> Layout {
        let els = els.iter().map(|&(c, x, y, w, h)| LayoutElement::new(c, x, y, w, h)).collect();
        Layout::new(els, PageSize::new(100, 100), Arc::new(ClassSchema::toy())).unwrap()
    }

    #[test]
    fn identical_corpora() {
        let a = vec![layout(&[(0, 1, 2, 3, 4), (1, 10, 10, 50, 20)]), layout(&[(2, 0, 0, 100, 100)])];
        let r = wasserstein_seq(&a, &a).unwrap();
        assert_eq!(r.class_w, 0.0);
        assert!(r.bbox_w.unwrap().abs() < 1e-12);
    }

    #[test]
    fn disjoint_class_support() {
        let a = vec![layout(&[(0, 0, 0, 10, 10)])];
        let b = vec![layout(&[(1, 0, 0, 10, 10)])];
        let r = wasserstein_seq(&a, &b).unwrap();
        assert_eq!(r.class_w, 1.0);
        assert_eq!(r.bbox_w, Some(0.0));
    }

    #[test]
    fn single_box_shift() {
        let a = vec![layout(&[(0, 0, 0, 10, 10)])];
        let b = vec![layout(&[(0, 30, 40, 10, 10)])];
        assert!((wasserstein_seq(&a, &b).unwrap().bbox_w.unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_corpus_is_rejected() {
        assert!(wasserstein_seq(&[], &[layout(&[])]).is_err());
    }
}
