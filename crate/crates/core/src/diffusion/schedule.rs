use ndarray::{Array, ArrayView, Dimension};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT_OFFSET: f64 = 1e-4;
const MAX_BETA: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    /// `alpha_bar(t) = 1 - sqrt(t/T + 1e-4)`, discretized into betas.
    #[default]
    Sqrt,
    /// Betas linear in `t`, rescaled so every `T` ends near zero signal.
    Linear,
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt" => Ok(Self::Sqrt),
            "linear" => Ok(Self::Linear),
            _ => Err(Error::Validation(format!("unknown schedule '{s}' (expected sqrt or linear)"))),
        }
    }
}

/// Per-step noise tables, 1-indexed: index 0 holds `beta = 0`,
/// `alpha_bar = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    kind: ScheduleKind,
    beta: Vec<f64>,
    alpha_bar: Vec<f64>,
}

impl NoiseSchedule {
    pub fn new(kind: ScheduleKind, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Validation("diffusion needs at least one step".into()));
        }
        let n = steps as f64;
        let mut beta = vec![0.0];
        match kind {
            ScheduleKind::Sqrt => {
                let ab = |tau: f64| 1.0 - (tau + SQRT_OFFSET).sqrt();
                for i in 0..steps {
                    let b = 1.0 - ab((i + 1) as f64 / n) / ab(i as f64 / n);
                    beta.push(b.min(MAX_BETA));
                }
            }
            ScheduleKind::Linear => {
                let scale = 1000.0 / n;
                let (lo, hi) = ((1e-4 * scale).min(0.5), (0.02 * scale).min(MAX_BETA));
                for i in 0..steps {
                    let frac = if steps == 1 { 1.0 } else { i as f64 / (n - 1.0) };
                    beta.push(lo + (hi - lo) * frac);
                }
            }
        }
        let mut alpha_bar = vec![1.0];
        for t in 1..=steps {
            alpha_bar.push(alpha_bar[t - 1] * (1.0 - beta[t]));
        }
        Ok(Self { kind, beta, alpha_bar })
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn steps(&self) -> usize {
        self.beta.len() - 1
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.beta[t]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        1.0 - self.beta[t]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    fn check_step(&self, t: usize, lo: usize) -> Result<()> {
        if t < lo || t > self.steps() {
            return Err(Error::Validation(format!("step {t} outside [{lo}, {}]", self.steps())));
        }
        Ok(())
    }

    /// Coefficients `(c0, ct)` of `x0` and `x_t` in the posterior mean of
    /// `q(x_{t-1} | x_t, x0)`.
    pub fn posterior_coeffs(&self, t: usize) -> Result<(f64, f64)> {
        self.check_step(t, 2)?;
        Ok(self.posterior_coeffs_unchecked(t))
    }

    pub(crate) fn posterior_coeffs_unchecked(&self, t: usize) -> (f64, f64) {
        let (ab, ab_prev) = (self.alpha_bar[t], self.alpha_bar[t - 1]);
        let c0 = ab_prev.sqrt() * self.beta[t] / (1.0 - ab);
        let ct = self.alpha(t).sqrt() * (1.0 - ab_prev) / (1.0 - ab);
        (c0, ct)
    }

    /// Posterior variance `beta[t] (1 - alpha_bar[t-1]) / (1 - alpha_bar[t])`;
    /// zero at `t = 1`.
    pub fn posterior_variance(&self, t: usize) -> Result<f64> {
        self.check_step(t, 1)?;
        Ok(self.beta[t] * (1.0 - self.alpha_bar[t - 1]) / (1.0 - self.alpha_bar[t]))
    }

    /// Closed-form forward sample `sqrt(ab) x0 + sqrt(1 - ab) eps`.
    pub fn q_sample<D: Dimension, R: Rng + ?Sized>(
        &self,
        x0: ArrayView<f64, D>,
        t: usize,
        rng: &mut R,
    ) -> Result<Array<f64, D>> {
        self.check_step(t, 1)?;
        let (a, s) = (self.alpha_bar[t].sqrt(), (1.0 - self.alpha_bar[t]).sqrt());
        Ok(x0.mapv(|v| a * v + s * rng.sample::<f64, _>(StandardNormal)))
    }

    /// One forward step `x_t ~ q(x_t | x_{t-1})`.
    pub fn q_step<D: Dimension, R: Rng + ?Sized>(
        &self,
        x_prev: ArrayView<f64, D>,
        t: usize,
        rng: &mut R,
    ) -> Result<Array<f64, D>> {
        self.check_step(t, 1)?;
        let (a, s) = (self.alpha(t).sqrt(), self.beta[t].sqrt());
        Ok(x_prev.mapv(|v| a * v + s * rng.sample::<f64, _>(StandardNormal)))
    }

    pub fn posterior_mean<D: Dimension>(
        &self,
        x_t: ArrayView<f64, D>,
        x0: ArrayView<f64, D>,
        t: usize,
    ) -> Result<Array<f64, D>> {
        if x_t.shape() != x0.shape() {
            return Err(Error::Validation("x_t and x0 shapes differ".into()));
        }
        let (c0, ct) = self.posterior_coeffs(t)?;
        Ok(&x0 * c0 + &x_t * ct)
    }
}
