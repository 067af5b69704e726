//! Dense layers with hand-written backward passes, generic over `f32`/`f64`.
//! Activations are 2-D `(rows, features)`.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView2, Axis, NdFloat, Zip};
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

pub fn cst<F: NdFloat>(x: f64) -> F {
    F::from(x).expect("constant fits the float type")
}

pub fn normal_matrix<F: NdFloat, R: Rng + ?Sized>(rows: usize, cols: usize, std: f64, rng: &mut R) -> Array2<F> {
    let d = Normal::new(0.0, std).expect("valid std");
    Array2::from_shape_simple_fn((rows, cols), || cst(d.sample(rng)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear<F> {
    pub w: Array2<F>,
    pub b: Array2<F>,
}

impl<F: NdFloat> Linear<F> {
    pub fn init<R: Rng + ?Sized>(inp: usize, out: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inp as f64).sqrt();
        let d = Uniform::new_inclusive(-bound, bound).expect("valid bounds");
        Self { w: Array2::from_shape_simple_fn((inp, out), || cst(d.sample(rng))), b: Array2::zeros((1, out)) }
    }

    pub fn zeros_like(&self) -> Self {
        Self { w: Array2::zeros(self.w.raw_dim()), b: Array2::zeros(self.b.raw_dim()) }
    }

    pub fn forward(&self, x: &ArrayView2<F>) -> Array2<F> {
        let mut y = x.dot(&self.w);
        y += &self.b;
        y
    }

    /// Accumulates parameter gradients into `g` and returns `dL/dx`.
    pub fn backward(&self, x: &ArrayView2<F>, dy: &ArrayView2<F>, g: &mut Self) -> Array2<F> {
        self.accumulate(x, dy, g);
        dy.dot(&self.w.t())
    }

    pub fn accumulate(&self, x: &ArrayView2<F>, dy: &ArrayView2<F>, g: &mut Self) {
        general_mat_mul(F::one(), &x.t(), dy, F::one(), &mut g.w);
        g.b += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
    }

    pub fn tensors<'a>(&'a self, name: &str, out: &mut Vec<(String, &'a Array2<F>)>) {
        out.push((format!("{name}.w"), &self.w));
        out.push((format!("{name}.b"), &self.b));
    }

    pub fn tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Array2<F>>) {
        out.push(&mut self.w);
        out.push(&mut self.b);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm<F> {
    pub g: Array2<F>,
    pub b: Array2<F>,
}

pub struct LnCache<F> {
    xhat: Array2<F>,
    rstd: Array1<F>,
}

const LN_EPS: f64 = 1e-5;

impl<F: NdFloat> LayerNorm<F> {
    pub fn new(n: usize) -> Self {
        Self { g: Array2::ones((1, n)), b: Array2::zeros((1, n)) }
    }

    pub fn zeros_like(&self) -> Self {
        Self { g: Array2::zeros(self.g.raw_dim()), b: Array2::zeros(self.b.raw_dim()) }
    }

    pub fn forward(&self, x: &ArrayView2<F>) -> (Array2<F>, LnCache<F>) {
        let n = cst::<F>(x.ncols() as f64);
        let mut xhat = x.to_owned();
        let mut rstd = Array1::zeros(x.nrows());
        for (mut row, r) in xhat.rows_mut().into_iter().zip(rstd.iter_mut()) {
            let mean = row.sum() / n;
            row.mapv_inplace(|v| v - mean);
            let var = row.iter().fold(F::zero(), |a, &v| a + v * v) / n;
            *r = F::one() / (var + cst(LN_EPS)).sqrt();
            let rr = *r;
            row.mapv_inplace(|v| v * rr);
        }
        let mut y = &xhat * &self.g;
        y += &self.b;
        (y, LnCache { xhat, rstd })
    }

    pub fn backward(&self, c: &LnCache<F>, dy: &ArrayView2<F>, g: &mut Self) -> Array2<F> {
        g.g += &(dy * &c.xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
        g.b += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
        let n = cst::<F>(dy.ncols() as f64);
        let mut dx = dy * &self.g;
        for ((mut row, xh), &r) in dx.rows_mut().into_iter().zip(c.xhat.rows()).zip(&c.rstd) {
            let s1 = row.sum();
            let s2 = row.iter().zip(xh).fold(F::zero(), |a, (&d, &x)| a + d * x);
            Zip::from(&mut row).and(xh).for_each(|d, &x| *d = r * (*d - s1 / n - x * s2 / n));
        }
        dx
    }

    pub fn tensors<'a>(&'a self, name: &str, out: &mut Vec<(String, &'a Array2<F>)>) {
        out.push((format!("{name}.g"), &self.g));
        out.push((format!("{name}.b"), &self.b));
    }

    pub fn tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Array2<F>>) {
        out.push(&mut self.g);
        out.push(&mut self.b);
    }
}

const GELU_K: f64 = 0.797_884_560_802_865_4;

/// `tanh` through one `exp`; libm's `tanh` is several times slower.
fn fast_tanh<F: NdFloat>(z: F) -> F {
    let two = F::one() + F::one();
    F::one() - two / ((two * z).exp() + F::one())
}

pub fn gelu<F: NdFloat>(x: &Array2<F>) -> Array2<F> {
    let (k, c, half) = (cst::<F>(GELU_K), cst::<F>(0.044715), cst::<F>(0.5));
    x.mapv(|v| half * v * (F::one() + fast_tanh(k * (v + c * v * v * v))))
}

pub fn gelu_backward<F: NdFloat>(x: &Array2<F>, dy: &ArrayView2<F>) -> Array2<F> {
    let (k, c, half) = (cst::<F>(GELU_K), cst::<F>(0.044715), cst::<F>(0.5));
    let three = cst::<F>(3.0);
    let mut dx = dy.to_owned();
    Zip::from(&mut dx).and(x).for_each(|d, &v| {
        let th = fast_tanh(k * (v + c * v * v * v));
        let grad = half * (F::one() + th) + half * v * (F::one() - th * th) * k * (F::one() + three * c * v * v);
        *d *= grad;
    });
    dx
}

pub fn silu<F: NdFloat>(x: &Array2<F>) -> Array2<F> {
    x.mapv(|v| v / (F::one() + (-v).exp()))
}

pub fn silu_backward<F: NdFloat>(x: &Array2<F>, dy: &ArrayView2<F>) -> Array2<F> {
    let mut dx = dy.to_owned();
    Zip::from(&mut dx).and(x).for_each(|d, &v| {
        let sg = F::one() / (F::one() + (-v).exp());
        *d *= sg * (F::one() + v * (F::one() - sg));
    });
    dx
}

/// Softmax of each row, in place.
pub fn softmax_rows<F: NdFloat>(x: &mut Array2<F>) {
    for mut row in x.rows_mut() {
        let m = row.fold(F::neg_infinity(), |a, &v| a.max(v));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
}

/// Bidirectional multi-head self-attention over `batch` sequences of `len`
/// rows each. `qkv` holds the packed `[q | k | v]` projections.
pub struct Attention {
    pub batch: usize,
    pub len: usize,
    pub heads: usize,
}

impl Attention {
    /// Returns the concatenated head outputs and the attention weights of
    /// every `(sequence, head)` pair.
    pub fn forward<F: NdFloat>(&self, qkv: &ArrayView2<F>) -> (Array2<F>, Vec<Array2<F>>) {
        let width = qkv.ncols() / 3;
        let dh = width / self.heads;
        let scale = cst::<F>(1.0 / (dh as f64).sqrt());
        let mut out = Array2::zeros((self.batch * self.len, width));
        let mut probs = Vec::with_capacity(self.batch * self.heads);
        for b in 0..self.batch {
            let rows = b * self.len..(b + 1) * self.len;
            for h in 0..self.heads {
                let q = qkv.slice(s![rows.clone(), h * dh..(h + 1) * dh]);
                let k = qkv.slice(s![rows.clone(), width + h * dh..width + (h + 1) * dh]);
                let v = qkv.slice(s![rows.clone(), 2 * width + h * dh..2 * width + (h + 1) * dh]);
                let mut p = q.dot(&k.t());
                p *= scale;
                softmax_rows(&mut p);
                out.slice_mut(s![rows.clone(), h * dh..(h + 1) * dh]).assign(&p.dot(&v));
                probs.push(p);
            }
        }
        (out, probs)
    }

    pub fn backward<F: NdFloat>(&self, qkv: &ArrayView2<F>, probs: &[Array2<F>], dout: &ArrayView2<F>) -> Array2<F> {
        let width = qkv.ncols() / 3;
        let dh = width / self.heads;
        let scale = cst::<F>(1.0 / (dh as f64).sqrt());
        let mut dqkv = Array2::zeros(qkv.raw_dim());
        for b in 0..self.batch {
            let rows = b * self.len..(b + 1) * self.len;
            for h in 0..self.heads {
                let (qc, kc, vc) = (h * dh, width + h * dh, 2 * width + h * dh);
                let q = qkv.slice(s![rows.clone(), qc..qc + dh]);
                let k = qkv.slice(s![rows.clone(), kc..kc + dh]);
                let v = qkv.slice(s![rows.clone(), vc..vc + dh]);
                let p = &probs[b * self.heads + h];
                let d_o = dout.slice(s![rows.clone(), qc..qc + dh]);
                dqkv.slice_mut(s![rows.clone(), vc..vc + dh]).assign(&p.t().dot(&d_o));
                let mut ds = d_o.dot(&v.t());
                for (mut row, prow) in ds.rows_mut().into_iter().zip(p.rows()) {
                    let dot = row.iter().zip(prow).fold(F::zero(), |a, (&d, &pp)| a + d * pp);
                    Zip::from(&mut row).and(prow).for_each(|d, &pp| *d = pp * (*d - dot) * scale);
                }
                dqkv.slice_mut(s![rows.clone(), qc..qc + dh]).assign(&ds.dot(&k));
                dqkv.slice_mut(s![rows.clone(), kc..kc + dh]).assign(&ds.t().dot(&q));
            }
        }
        dqkv
    }
}

/// Sinusoidal features of each position `0..len`, `(len, width)`.
pub fn position_features<F: NdFloat>(len: usize, width: usize) -> Array2<F> {
    let steps: Vec<usize> = (0..len).collect();
    timestep_features(&steps, width)
}

/// Sinusoidal features of a scalar step, `[sin(t f_k) | cos(t f_k)]`.
pub fn timestep_features<F: NdFloat>(t: &[usize], width: usize) -> Array2<F> {
    let half = width / 2;
    let mut out = Array2::zeros((t.len(), width));
    for (mut row, &step) in out.rows_mut().into_iter().zip(t) {
        for k in 0..half {
            let f = (-(10_000f64).ln() * k as f64 / half as f64).exp();
            row[k] = cst((step as f64 * f).sin());
            row[half + k] = cst((step as f64 * f).cos());
        }
    }
    out
}
