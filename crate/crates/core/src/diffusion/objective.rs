use ndarray::{s, Array2, ArrayView2, Axis, NdFloat};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::model::DenoiserParams;
use super::nn::cst;
use super::schedule::NoiseSchedule;
use crate::error::{Error, Result};

/// Components of the training objective, averaged over the batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossTerms {
    pub loss: f64,
    /// Denoising MSE plus the prior term at `t = T`.
    pub mse_term: f64,
    /// Rounding cross-entropy of `x0` against the clean tokens.
    pub round_term: f64,
}

/// A noised training batch: `x0 = E(s) + sqrt(beta_1) eps0` and
/// `x_t ~ q(x_t | x0)` with one uniformly drawn step per sequence.
pub struct NoisedBatch<F> {
    pub tokens: Vec<u32>,
    pub embedded: Array2<F>,
    pub x0: Array2<F>,
    pub t: Vec<usize>,
    pub x_t: Array2<F>,
}

impl<F: NdFloat> NoisedBatch<F> {
    /// Regression target per row: `E(s)` for sequences at `t = 1`, else `x0`.
    pub fn target(&self, len: usize) -> Array2<F> {
        let mut out = self.x0.clone();
        for (b, &t) in self.t.iter().enumerate() {
            if t == 1 {
                out.slice_mut(s![b * len..(b + 1) * len, ..]).assign(&self.embedded.slice(s![b * len..(b + 1) * len, ..]));
            }
        }
        out
    }
}

fn normal<F: NdFloat, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<F> {
    Array2::from_shape_simple_fn((rows, cols), || cst(rng.sample::<f64, _>(StandardNormal)))
}

pub fn noise_batch<F: NdFloat, R: Rng + ?Sized>(
    params: &DenoiserParams<F>,
    tokens: &[Vec<u32>],
    schedule: &NoiseSchedule,
    rng: &mut R,
) -> Result<NoisedBatch<F>> {
    if tokens.is_empty() {
        return Err(Error::Validation("empty training batch".into()));
    }
    let (l, d) = (params.cfg.max_len, params.cfg.d);
    let embedded = params.embed(tokens)?;
    let t: Vec<usize> = tokens.iter().map(|_| rng.random_range(1..=schedule.steps())).collect();
    let x0 = &embedded + &(normal::<F, _>(embedded.nrows(), d, rng) * cst::<F>(schedule.beta(1).sqrt()));
    let eps = normal::<F, _>(embedded.nrows(), d, rng);
    let mut x_t = Array2::zeros(x0.raw_dim());
    for (b, &step) in t.iter().enumerate() {
        let (a, sd) = (cst::<F>(schedule.alpha_bar(step).sqrt()), cst::<F>((1.0 - schedule.alpha_bar(step)).sqrt()));
        let r = s![b * l..(b + 1) * l, ..];
        x_t.slice_mut(r).assign(&(&x0.slice(r) * a + &eps.slice(r) * sd));
    }
    Ok(NoisedBatch { tokens: tokens.concat(), embedded, x0, t, x_t })
}

/// Loss terms for a given `x0` prediction, with gradients with respect to
/// the prediction, `x0`, `E(s)` and the rounding parameters.
struct TermGrads<F> {
    terms: LossTerms,
    d_pred: Array2<F>,
    d_x0: Array2<F>,
    d_embedded: Array2<F>,
    d_embedding: Array2<F>,
    d_bias: Array2<F>,
}

fn terms_and_grads<F: NdFloat>(
    params: &DenoiserParams<F>,
    nb: &NoisedBatch<F>,
    pred: &ArrayView2<F>,
    schedule: &NoiseSchedule,
) -> TermGrads<F> {
    let l = params.cfg.max_len;
    let rows = nb.x0.nrows();
    let n_el = (rows * params.cfg.d) as f64;
    let target = nb.target(l);
    let diff = pred - &target;
    let mse = diff.iter().map(|v| v.to_f64().unwrap().powi(2)).sum::<f64>() / n_el;
    let d_pred = &diff * cst::<F>(2.0 / n_el);
    let mut d_x0 = Array2::zeros(nb.x0.raw_dim());
    let mut d_embedded = Array2::zeros(nb.x0.raw_dim());
    for (b, &t) in nb.t.iter().enumerate() {
        let r = s![b * l..(b + 1) * l, ..];
        if t == 1 {
            d_embedded.slice_mut(r).assign(&d_pred.slice(r).mapv(|v| -v));
        } else {
            d_x0.slice_mut(r).assign(&d_pred.slice(r).mapv(|v| -v));
        }
    }

    let ab_t = schedule.alpha_bar(schedule.steps());
    let prior = ab_t * nb.x0.iter().map(|v| v.to_f64().unwrap().powi(2)).sum::<f64>() / n_el;
    d_x0.scaled_add(cst(2.0 * ab_t / n_el), &nb.x0);

    let mut logits = params.round_logits(&nb.x0.view());
    let mut ce = 0.0;
    for (mut row, &tok) in logits.rows_mut().into_iter().zip(&nb.tokens) {
        let m = row.fold(F::neg_infinity(), |a, &v| a.max(v));
        row.mapv_inplace(|v| (v - m).exp());
        let z = row.sum();
        row.mapv_inplace(|v| v / z);
        ce -= row[tok as usize].to_f64().unwrap().max(f64::MIN_POSITIVE).ln();
        row[tok as usize] -= F::one();
    }
    ce /= rows as f64;
    let dl = logits * cst::<F>(1.0 / rows as f64);
    let two = cst::<F>(2.0);
    let row_sum = dl.sum_axis(Axis(1)).insert_axis(Axis(1));
    let col_sum = dl.sum_axis(Axis(0));
    d_x0 += &(dl.dot(&params.embedding) * two);
    d_x0 -= &(&nb.x0 * &row_sum * two);
    let mut d_embedding = dl.t().dot(&nb.x0) * two;
    d_embedding -= &(&params.embedding * &col_sum.clone().insert_axis(Axis(1)) * two);
    let d_bias = col_sum.insert_axis(Axis(0));

    let terms = LossTerms { loss: mse + prior + ce, mse_term: mse + prior, round_term: ce };
    TermGrads { terms, d_pred, d_x0, d_embedded, d_embedding, d_bias }
}

/// Objective value for a fixed `x0` prediction. With `pred` equal to
/// [`NoisedBatch::target`] only the prior and rounding parts remain.
pub fn loss_terms<F: NdFloat>(
    params: &DenoiserParams<F>,
    nb: &NoisedBatch<F>,
    pred: &ArrayView2<F>,
    schedule: &NoiseSchedule,
) -> LossTerms {
    terms_and_grads(params, nb, pred, schedule).terms
}

/// Stochastic objective of one batch (no gradients).
pub fn loss<F: NdFloat, R: Rng + ?Sized>(
    params: &DenoiserParams<F>,
    tokens: &[Vec<u32>],
    schedule: &NoiseSchedule,
    rng: &mut R,
) -> Result<LossTerms> {
    let nb = noise_batch(params, tokens, schedule, rng)?;
    let (pred, _) = params.forward(&nb.x_t.view(), &nb.t)?;
    Ok(loss_terms(params, &nb, &pred.view(), schedule))
}

/// Objective and its gradient with respect to every parameter, for an
/// already noised batch.
pub fn loss_and_grad_on<F: NdFloat>(
    params: &DenoiserParams<F>,
    nb: &NoisedBatch<F>,
    schedule: &NoiseSchedule,
) -> Result<(LossTerms, DenoiserParams<F>)> {
    let l = params.cfg.max_len;
    let (pred, tape) = params.forward(&nb.x_t.view(), &nb.t)?;
    let tg = terms_and_grads(params, nb, &pred.view(), schedule);
    let mut g = params.zeros_like();
    let d_xt = params.backward(&tape, &tg.d_pred.view(), &mut g);
    let mut d_x0 = tg.d_x0;
    for (b, &t) in nb.t.iter().enumerate() {
        let r = s![b * l..(b + 1) * l, ..];
        d_x0.slice_mut(r).scaled_add(cst(schedule.alpha_bar(t).sqrt()), &d_xt.slice(r));
    }
    // x0 = E(s) + noise, so both paths land on the embedding rows.
    let d_rows = d_x0 + &tg.d_embedded;
    for (row, &tok) in d_rows.rows().into_iter().zip(&nb.tokens) {
        let mut e = g.embedding.row_mut(tok as usize);
        e += &row;
    }
    g.embedding += &tg.d_embedding;
    g.round_bias += &tg.d_bias;
    Ok((tg.terms, g))
}

pub fn loss_and_grad<F: NdFloat, R: Rng + ?Sized>(
    params: &DenoiserParams<F>,
    tokens: &[Vec<u32>],
    schedule: &NoiseSchedule,
    rng: &mut R,
) -> Result<(LossTerms, DenoiserParams<F>)> {
    let nb = noise_batch(params, tokens, schedule, rng)?;
    loss_and_grad_on(params, &nb, schedule)
}
