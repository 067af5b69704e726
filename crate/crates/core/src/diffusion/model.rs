use ndarray::{s, Array2, ArrayView2, Axis, NdFloat};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::nn::{
    cst, gelu, gelu_backward, normal_matrix, position_features, silu, silu_backward, timestep_features, Attention, Linear, LayerNorm,
    LnCache,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenoiserConfig {
    pub vocab: usize,
    /// Embedding dimension.
    pub d: usize,
    pub width: usize,
    pub layers: usize,
    pub heads: usize,
    /// Fixed (padded) sequence length.
    pub max_len: usize,
}

impl DenoiserConfig {
    pub fn new(vocab: usize) -> Self {
        Self { vocab, d: 32, width: 128, layers: 4, heads: 4, max_len: 130 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 8 {
            return Err(Error::Validation(format!("embedding dimension must be >= 8, got {}", self.d)));
        }
        if self.heads == 0 || self.width % self.heads != 0 || self.width % 2 != 0 {
            return Err(Error::Validation(format!(
                "width {} must be even and divisible by heads {}",
                self.width, self.heads
            )));
        }
        if self.vocab == 0 || self.max_len == 0 {
            return Err(Error::Validation("vocabulary and sequence length must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block<F> {
    pub ln1: LayerNorm<F>,
    pub qkv: Linear<F>,
    pub proj: Linear<F>,
    pub ln2: LayerNorm<F>,
    pub fc1: Linear<F>,
    pub fc2: Linear<F>,
}

impl<F: NdFloat> Block<F> {
    fn init<R: Rng + ?Sized>(w: usize, rng: &mut R) -> Self {
        Self {
            ln1: LayerNorm::new(w),
            qkv: Linear::init(w, 3 * w, rng),
            proj: Linear::init(w, w, rng),
            ln2: LayerNorm::new(w),
            fc1: Linear::init(w, 4 * w, rng),
            fc2: Linear::init(4 * w, w, rng),
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            ln1: self.ln1.zeros_like(),
            qkv: self.qkv.zeros_like(),
            proj: self.proj.zeros_like(),
            ln2: self.ln2.zeros_like(),
            fc1: self.fc1.zeros_like(),
            fc2: self.fc2.zeros_like(),
        }
    }
}

/// Embedding table, rounding bias and denoiser weights.
///
/// Rounding logits are `-|x - E_j|^2 + bias_j`, so the rounding head is
/// tied to the embedding table.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserParams<F> {
    pub cfg: DenoiserConfig,
    pub embedding: Array2<F>,
    pub round_bias: Array2<F>,
    pub input: Linear<F>,
    pub pos: Array2<F>,
    pub time1: Linear<F>,
    pub time2: Linear<F>,
    pub blocks: Vec<Block<F>>,
    pub ln_f: LayerNorm<F>,
    pub output: Linear<F>,
}

struct BlockTape<F> {
    ln1: LnCache<F>,
    h1: Array2<F>,
    qkv: Array2<F>,
    probs: Vec<Array2<F>>,
    att: Array2<F>,
    ln2: LnCache<F>,
    h2: Array2<F>,
    u: Array2<F>,
    a: Array2<F>,
}

/// Intermediate activations kept for the backward pass.
pub struct Tape<F> {
    batch: usize,
    x_t: Array2<F>,
    tfeat: Array2<F>,
    a1: Array2<F>,
    blocks: Vec<BlockTape<F>>,
    ln_f: LnCache<F>,
    hf: Array2<F>,
}

impl<F: NdFloat> DenoiserParams<F> {
    pub fn init<R: Rng + ?Sized>(cfg: DenoiserConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let w = cfg.width;
        Ok(Self {
            cfg,
            embedding: normal_matrix(cfg.vocab, cfg.d, 1.0, rng),
            round_bias: Array2::zeros((1, cfg.vocab)),
            input: Linear::init(cfg.d, w, rng),
            pos: position_features(cfg.max_len, w),
            time1: Linear::init(w, w, rng),
            time2: Linear::init(w, w, rng),
            blocks: (0..cfg.layers).map(|_| Block::init(w, rng)).collect(),
            ln_f: LayerNorm::new(w),
            output: Linear::init(w, cfg.d, rng),
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            cfg: self.cfg,
            embedding: Array2::zeros(self.embedding.raw_dim()),
            round_bias: Array2::zeros(self.round_bias.raw_dim()),
            input: self.input.zeros_like(),
            pos: Array2::zeros(self.pos.raw_dim()),
            time1: self.time1.zeros_like(),
            time2: self.time2.zeros_like(),
            blocks: self.blocks.iter().map(Block::zeros_like).collect(),
            ln_f: self.ln_f.zeros_like(),
            output: self.output.zeros_like(),
        }
    }

    /// Every parameter tensor with a stable name, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &Array2<F>)> {
        let mut out = vec![
            ("embedding".to_owned(), &self.embedding),
            ("round_bias".to_owned(), &self.round_bias),
        ];
        self.input.tensors("input", &mut out);
        out.push(("pos".to_owned(), &self.pos));
        self.time1.tensors("time1", &mut out);
        self.time2.tensors("time2", &mut out);
        for (i, b) in self.blocks.iter().enumerate() {
            b.ln1.tensors(&format!("blocks.{i}.ln1"), &mut out);
            b.qkv.tensors(&format!("blocks.{i}.qkv"), &mut out);
            b.proj.tensors(&format!("blocks.{i}.proj"), &mut out);
            b.ln2.tensors(&format!("blocks.{i}.ln2"), &mut out);
            b.fc1.tensors(&format!("blocks.{i}.fc1"), &mut out);
            b.fc2.tensors(&format!("blocks.{i}.fc2"), &mut out);
        }
        self.ln_f.tensors("ln_f", &mut out);
        self.output.tensors("output", &mut out);
        out
    }

    /// Mutable tensors in the same order as [`Self::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<F>> {
        let mut out = vec![&mut self.embedding, &mut self.round_bias];
        self.input.tensors_mut(&mut out);
        out.push(&mut self.pos);
        self.time1.tensors_mut(&mut out);
        self.time2.tensors_mut(&mut out);
        for b in &mut self.blocks {
            b.ln1.tensors_mut(&mut out);
            b.qkv.tensors_mut(&mut out);
            b.proj.tensors_mut(&mut out);
            b.ln2.tensors_mut(&mut out);
            b.fc1.tensors_mut(&mut out);
            b.fc2.tensors_mut(&mut out);
        }
        self.ln_f.tensors_mut(&mut out);
        self.output.tensors_mut(&mut out);
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.1.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    /// Embedding rows of a token batch, `(batch * max_len, d)`.
    pub fn embed(&self, tokens: &[Vec<u32>]) -> Result<Array2<F>> {
        let (l, d) = (self.cfg.max_len, self.cfg.d);
        let mut out = Array2::zeros((tokens.len() * l, d));
        for (b, seq) in tokens.iter().enumerate() {
            if seq.len() != l {
                return Err(Error::Validation(format!(
                    "sequence {b} has length {}, expected {l}",
                    seq.len()
                )));
            }
            for (i, &tok) in seq.iter().enumerate() {
                if tok as usize >= self.cfg.vocab {
                    return Err(Error::Validation(format!("token {tok} outside the vocabulary")));
                }
                out.row_mut(b * l + i).assign(&self.embedding.row(tok as usize));
            }
        }
        Ok(out)
    }

    /// Rounding logits `-|x_i - E_j|^2 + bias_j`, `(rows, vocab)`.
    pub fn round_logits(&self, x: &ArrayView2<F>) -> Array2<F> {
        let two = cst::<F>(2.0);
        let mut logits = x.dot(&self.embedding.t());
        logits *= two;
        let e_sq = self.embedding.map_axis(Axis(1), |r| r.dot(&r));
        for (mut row, xr) in logits.rows_mut().into_iter().zip(x.rows()) {
            let x_sq = xr.dot(&xr);
            for ((v, &es), &bias) in row.iter_mut().zip(&e_sq).zip(&self.round_bias) {
                *v = *v - es - x_sq + bias;
            }
        }
        logits
    }

    /// Argmax rounding of each row to a token id.
    pub fn round(&self, x: &ArrayView2<F>) -> Vec<u32> {
        self.round_logits(x)
            .rows()
            .into_iter()
            .map(|r| {
                let mut best = 0;
                for (j, &v) in r.iter().enumerate() {
                    if v > r[best] {
                        best = j;
                    }
                }
                best as u32
            })
            .collect()
    }

    /// Predicts `x0` from `x_t`, `(batch * max_len, d)`, one step per sequence.
    pub fn forward(&self, x_t: &ArrayView2<F>, t: &[usize]) -> Result<(Array2<F>, Tape<F>)> {
        let (l, w) = (self.cfg.max_len, self.cfg.width);
        let batch = t.len();
        if x_t.nrows() != batch * l || x_t.ncols() != self.cfg.d {
            return Err(Error::Validation(format!(
                "latent shape {:?} does not match {batch} sequences of {l} x {}",
                x_t.shape(),
                self.cfg.d
            )));
        }
        let tfeat = timestep_features::<F>(t, w);
        let a1 = self.time1.forward(&tfeat.view());
        let temb = self.time2.forward(&silu(&a1).view());
        let mut h = self.input.forward(x_t);
        for b in 0..batch {
            let mut rows = h.slice_mut(s![b * l..(b + 1) * l, ..]);
            rows += &self.pos;
            rows += &temb.row(b);
        }
        let att = Attention { batch, len: l, heads: self.cfg.heads };
        let mut tapes = Vec::with_capacity(self.blocks.len());
        for blk in &self.blocks {
            let (h1, ln1) = blk.ln1.forward(&h.view());
            let qkv = blk.qkv.forward(&h1.view());
            let (o, probs) = att.forward(&qkv.view());
            let x_mid = &h + &blk.proj.forward(&o.view());
            let (h2, ln2) = blk.ln2.forward(&x_mid.view());
            let u = blk.fc1.forward(&h2.view());
            let a = gelu(&u);
            h = &x_mid + &blk.fc2.forward(&a.view());
            tapes.push(BlockTape { ln1, h1, qkv, probs, att: o, ln2, h2, u, a });
        }
        let (hf, ln_f) = self.ln_f.forward(&h.view());
        let y = self.output.forward(&hf.view());
        Ok((y, Tape { batch, x_t: x_t.to_owned(), tfeat, a1, blocks: tapes, ln_f, hf }))
    }

    /// Backpropagates `dy = dL/dy` through the network, accumulating into
    /// `g`. Returns `dL/dx_t`.
    pub fn backward(&self, tape: &Tape<F>, dy: &ArrayView2<F>, g: &mut Self) -> Array2<F> {
        let l = self.cfg.max_len;
        let dhf = self.output.backward(&tape.hf.view(), dy, &mut g.output);
        let mut dh = self.ln_f.backward(&tape.ln_f, &dhf.view(), &mut g.ln_f);
        let att = Attention { batch: tape.batch, len: l, heads: self.cfg.heads };
        for ((blk, gb), bt) in self.blocks.iter().zip(g.blocks.iter_mut()).zip(&tape.blocks).rev() {
            let da = blk.fc2.backward(&bt.a.view(), &dh.view(), &mut gb.fc2);
            let du = gelu_backward(&bt.u, &da.view());
            let dh2 = blk.fc1.backward(&bt.h2.view(), &du.view(), &mut gb.fc1);
            let mut dx_mid = blk.ln2.backward(&bt.ln2, &dh2.view(), &mut gb.ln2);
            dx_mid += &dh;
            let d_o = blk.proj.backward(&bt.att.view(), &dx_mid.view(), &mut gb.proj);
            let dqkv = att.backward(&bt.qkv.view(), &bt.probs, &d_o.view());
            let dh1 = blk.qkv.backward(&bt.h1.view(), &dqkv.view(), &mut gb.qkv);
            let mut dx = blk.ln1.backward(&bt.ln1, &dh1.view(), &mut gb.ln1);
            dx += &dx_mid;
            dh = dx;
        }
        let mut dtemb = Array2::zeros((tape.batch, self.cfg.width));
        for b in 0..tape.batch {
            let rows = dh.slice(s![b * l..(b + 1) * l, ..]);
            g.pos += &rows;
            dtemb.row_mut(b).assign(&rows.sum_axis(Axis(0)));
        }
        let s1 = silu(&tape.a1);
        let ds1 = self.time2.backward(&s1.view(), &dtemb.view(), &mut g.time2);
        let da1 = silu_backward(&tape.a1, &ds1.view());
        self.time1.accumulate(&tape.tfeat.view(), &da1.view(), &mut g.time1);
        self.input.backward(&tape.x_t.view(), &dh.view(), &mut g.input)
    }
}
