use std::sync::Arc;

use ndarray::{s, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::model::DenoiserParams;
use super::schedule::NoiseSchedule;
use super::train::TrainConfig;
use crate::error::Result;
use crate::layout::{ClassSchema, Layout, PageSize};
use crate::tokens::{dequantize, DecodeMode, TokenSequence, Vocabulary};

/// A trained denoiser together with everything needed to decode samples.
#[derive(Debug, Clone)]
pub struct LayoutModel {
    pub params: DenoiserParams<f32>,
    pub schedule: NoiseSchedule,
    pub vocab: Vocabulary,
    pub schema: Arc<ClassSchema>,
    pub page: PageSize,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleOptions {
    /// Sequences denoised together per forward pass.
    pub batch: usize,
    /// Snap every `x0` prediction to its nearest embedding row.
    pub clamp: bool,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self { batch: 64, clamp: false }
    }
}

#[derive(Debug, Clone)]
pub struct SampleOutput {
    pub layouts: Vec<Layout>,
    pub sequences: Vec<Vec<u32>>,
    /// Sequences that decoded in strict mode without any repair.
    pub valid: usize,
    pub dropped_groups: usize,
}

impl SampleOutput {
    pub fn validity_rate(&self) -> f64 {
        if self.sequences.is_empty() {
            return 0.0;
        }
        self.valid as f64 / self.sequences.len() as f64
    }
}

/// Random stream of sequence `index` under a master seed.
pub fn sequence_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn fill_normal(mut rows: ndarray::ArrayViewMut2<f32>, rng: &mut ChaCha8Rng) {
    rows.iter_mut().for_each(|v| *v = rng.sample::<f64, _>(StandardNormal) as f32);
}

/// Runs the reverse chain for sequences `first..first + n` and returns the
/// rounded tokens of each.
fn denoise_chunk(model: &LayoutModel, seed: u64, first: usize, n: usize, clamp: bool) -> Result<Vec<Vec<u32>>> {
    let p = &model.params;
    let (l, d) = (p.cfg.max_len, p.cfg.d);
    let mut rngs: Vec<ChaCha8Rng> = (first..first + n).map(|i| sequence_rng(seed, i)).collect();
    let mut x = Array2::<f32>::zeros((n * l, d));
    for (b, rng) in rngs.iter_mut().enumerate() {
        fill_normal(x.slice_mut(s![b * l..(b + 1) * l, ..]), rng);
    }
    let sched = &model.schedule;
    for t in (1..=sched.steps()).rev() {
        let (mut pred, _) = p.forward(&x.view(), &vec![t; n])?;
        if clamp {
            let nearest = p.round(&pred.view());
            for (mut row, tok) in pred.rows_mut().into_iter().zip(nearest) {
                row.assign(&p.embedding.row(tok as usize));
            }
        }
        if t == 1 {
            x = pred;
            break;
        }
        let (c0, ct) = sched.posterior_coeffs_unchecked(t);
        let sigma = sched.posterior_variance(t)?.sqrt() as f32;
        x = pred * c0 as f32 + &(&x * ct as f32);
        let mut z = Array2::<f32>::zeros((n * l, d));
        for (b, rng) in rngs.iter_mut().enumerate() {
            fill_normal(z.slice_mut(s![b * l..(b + 1) * l, ..]), rng);
        }
        x.scaled_add(sigma, &z);
    }
    let tokens = p.round(&x.view());
    Ok(tokens.chunks(l).map(<[u32]>::to_vec).collect())
}

impl LayoutModel {
    /// Draws `count` layouts. Sequence `i` uses its own stream of `seed`, so
    /// output does not depend on batching.
    pub fn sample(&self, count: usize, seed: u64, opts: SampleOptions) -> Result<SampleOutput> {
        let batch = opts.batch.max(1);
        let starts: Vec<usize> = (0..count).step_by(batch).collect();
        let chunks: Vec<Vec<Vec<u32>>> = starts
            .par_iter()
            .map(|&first| denoise_chunk(self, seed, first, batch.min(count - first), opts.clamp))
            .collect::<Result<_>>()?;
        let sequences: Vec<Vec<u32>> = chunks.into_iter().flatten().collect();
        let mut out = SampleOutput { layouts: Vec::with_capacity(count), sequences: Vec::new(), valid: 0, dropped_groups: 0 };
        for (i, seq) in sequences.iter().enumerate() {
            let ts = TokenSequence { tokens: seq.clone(), page: self.page };
            let strict = dequantize(&ts, &self.vocab, &self.schema, DecodeMode::Strict);
            if matches!(&strict, Ok((_, r)) if r.is_well_formed()) {
                out.valid += 1;
            }
            let (layout, report) = dequantize(&ts, &self.vocab, &self.schema, DecodeMode::Repair)?;
            out.dropped_groups += report.dropped_groups;
            out.layouts.push(layout.with_id(format!("sample-{i}")));
        }
        out.sequences = sequences;
        Ok(out)
    }
}
