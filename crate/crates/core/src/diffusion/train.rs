use std::io::Write;

use ndarray::{Array2, NdFloat, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{DenoiserConfig, DenoiserParams};
use super::nn::cst;
use super::objective::{loss_and_grad, LossTerms};
use super::schedule::{NoiseSchedule, ScheduleKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_steps: usize,
    pub seed: u64,
    /// Diffusion step count `T`.
    pub diffusion_steps: usize,
    pub schedule: ScheduleKind,
    pub d: usize,
    pub width: usize,
    pub layers: usize,
    pub heads: usize,
    pub max_len: usize,
    pub weight_decay: f64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub grad_clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            batch_size: 64,
            max_steps: 2000,
            seed: 0,
            diffusion_steps: 2000,
            schedule: ScheduleKind::Sqrt,
            d: 32,
            width: 128,
            layers: 4,
            heads: 4,
            max_len: 130,
            weight_decay: 0.0,
            grad_clip: Some(1.0),
        }
    }
}

impl TrainConfig {
    pub fn model_config(&self, vocab: usize) -> DenoiserConfig {
        DenoiserConfig {
            vocab,
            d: self.d,
            width: self.width,
            layers: self.layers,
            heads: self.heads,
            max_len: self.max_len,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::Validation(format!("learning rate must be > 0, got {}", self.lr)));
        }
        if self.diffusion_steps == 0 {
            return Err(Error::Validation("T must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Validation("batch size must be >= 1".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Validation("weight decay must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossRow {
    pub step: usize,
    pub loss: f64,
    pub mse_term: f64,
    pub round_term: f64,
}

pub const LOSS_LOG_HEADER: &str = "step,loss,mse_term,round_term";

pub fn write_loss_log<W: Write>(rows: &[LossRow], mut out: W) -> Result<()> {
    writeln!(out, "{LOSS_LOG_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.step, r.loss, r.mse_term, r.round_term)?;
    }
    Ok(())
}

pub struct AdamW<F> {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    step: i32,
    m: Vec<Array2<F>>,
    v: Vec<Array2<F>>,
}

impl<F: NdFloat> AdamW<F> {
    pub fn new(params: &DenoiserParams<F>, lr: f64, weight_decay: f64) -> Self {
        let zeros = || params.tensors().iter().map(|(_, t)| Array2::zeros(t.raw_dim())).collect();
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay, step: 0, m: zeros(), v: zeros() }
    }

    pub fn update(&mut self, params: &mut DenoiserParams<F>, grads: &DenoiserParams<F>) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        let (b1, b2) = (cst::<F>(self.beta1), cst::<F>(self.beta2));
        let (one_b1, one_b2) = (cst::<F>(1.0 - self.beta1), cst::<F>(1.0 - self.beta2));
        let step_size = cst::<F>(self.lr / bc1);
        let bc2_sqrt = cst::<F>(bc2.sqrt());
        let eps = cst::<F>(self.eps);
        let decay = cst::<F>(1.0 - self.lr * self.weight_decay);
        let grads = grads.tensors();
        for (((p, (_, g)), m), v) in params.tensors_mut().into_iter().zip(&grads).zip(&mut self.m).zip(&mut self.v) {
            Zip::from(p).and(*g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = b1 * *m + one_b1 * g;
                *v = b2 * *v + one_b2 * g * g;
                *p = *p * decay - step_size * *m / ((*v).sqrt() / bc2_sqrt + eps);
            });
        }
    }
}

fn grad_norm<F: NdFloat>(g: &DenoiserParams<F>) -> f64 {
    g.tensors()
        .iter()
        .flat_map(|(_, t)| t.iter())
        .map(|v| v.to_f64().unwrap().powi(2))
        .sum::<f64>()
        .sqrt()
}

pub struct TrainOutput {
    pub params: DenoiserParams<f32>,
    pub schedule: NoiseSchedule,
    pub log: Vec<LossRow>,
}

/// Trains a denoiser on padded token sequences. Deterministic for a fixed
/// config; aborts with a numerical error as soon as the loss is not finite.
pub fn train(corpus: &[Vec<u32>], vocab: usize, cfg: &TrainConfig) -> Result<TrainOutput> {
    train_with(corpus, vocab, cfg, |_| {})
}

/// Like [`train`], calling `on_step` after every step.
pub fn train_with(
    corpus: &[Vec<u32>],
    vocab: usize,
    cfg: &TrainConfig,
    mut on_step: impl FnMut(&LossRow),
) -> Result<TrainOutput> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::Validation("training corpus is empty".into()));
    }
    let schedule = NoiseSchedule::new(cfg.schedule, cfg.diffusion_steps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = DenoiserParams::<f32>::init(cfg.model_config(vocab), &mut rng)?;
    for (i, seq) in corpus.iter().enumerate() {
        if seq.len() != cfg.max_len {
            return Err(Error::Validation(format!(
                "sequence {i} has length {}, expected {}",
                seq.len(),
                cfg.max_len
            )));
        }
    }
    let mut opt = AdamW::new(&params, cfg.lr, cfg.weight_decay);
    let mut log = Vec::with_capacity(cfg.max_steps);
    for step in 1..=cfg.max_steps {
        let batch: Vec<Vec<u32>> =
            (0..cfg.batch_size).map(|_| corpus[rng.random_range(0..corpus.len())].clone()).collect();
        let (LossTerms { loss, mse_term, round_term }, mut grads) =
            loss_and_grad(&params, &batch, &schedule, &mut rng)?;
        if !loss.is_finite() {
            return Err(Error::Numerical(format!(
                "loss diverged at step {step}: loss={loss}, mse_term={mse_term}, round_term={round_term}, \
                 last finite loss={:?}",
                log.last().map(|r: &LossRow| r.loss)
            )));
        }
        if let Some(clip) = cfg.grad_clip {
            let norm = grad_norm(&grads);
            if norm > clip {
                let f = (clip / norm) as f32;
                for t in grads.tensors_mut() {
                    *t *= f;
                }
            }
        }
        opt.update(&mut params, &grads);
        let row = LossRow { step, loss, mse_term, round_term };
        on_step(&row);
        log.push(row);
    }
    if !params.is_finite() {
        return Err(Error::Numerical("parameters became non-finite during training".into()));
    }
    Ok(TrainOutput { params, schedule, log })
}
