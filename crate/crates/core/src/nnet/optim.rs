//! Adam with linear warmup and inverse-square-root decay.

use serde::{Deserialize, Serialize};

use super::graph::{Grads, ParamId, ParamStore};
use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Optimization and regularization settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainHyper {
    pub lr_init: f64,
    pub lr_peak: f64,
    pub warmup_steps: usize,
    pub dropout: f64,
    pub attn_dropout: f64,
    pub label_smoothing: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Micro-batches whose averaged gradient makes one update.
    pub accumulate: usize,
    pub max_tokens_per_batch: usize,
    /// Upper bound on optimizer updates.
    pub max_steps: usize,
    /// Updates between validation evaluations.
    pub eval_every: usize,
    /// Evaluations without improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            lr_init: 1e-7,
            lr_peak: 1e-3,
            warmup_steps: 400,
            dropout: 0.3,
            attn_dropout: 0.1,
            label_smoothing: 0.1,
            beta1: 0.9,
            beta2: 0.98,
            adam_eps: 1e-8,
            accumulate: 1,
            max_tokens_per_batch: 1000,
            max_steps: 2000,
            eval_every: 100,
            patience: 5,
            seed: 1,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        let bad = |k: &str, m: &str| Err(Error::config(k, m));
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout", "must lie in [0,1)");
        }
        if !(0.0..1.0).contains(&self.attn_dropout) {
            return bad("attn_dropout", "must lie in [0,1)");
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return bad("label_smoothing", "must lie in [0,1)");
        }
        if self.warmup_steps == 0 {
            return bad("warmup_steps", "must be >= 1");
        }
        if self.accumulate == 0 {
            return bad("accumulate", "must be >= 1");
        }
        if self.eval_every == 0 {
            return bad("eval_every", "must be >= 1");
        }
        if !(self.lr_init > 0.0 && self.lr_peak > 0.0) {
            return bad("lr_peak", "learning rates must be positive");
        }
        Ok(())
    }
}

/// Linear warmup from `lr_init` to `lr_peak`, then `lr_peak * sqrt(warmup / step)`.
pub fn lr_schedule(step: usize, h: &TrainHyper) -> f64 {
    let warmup = h.warmup_steps.max(1) as f64;
    let s = step as f64;
    if s <= warmup {
        h.lr_init + (h.lr_peak - h.lr_init) * s / warmup
    } else {
        h.lr_peak * (warmup / s).sqrt()
    }
}

/// Adam moments and update counter.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: usize,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(params: &ParamStore<T>, h: &TrainHyper) -> Self {
        let zeros = || params.iter().map(|(_, _, t)| Tensor::zeros(t.shape())).collect::<Vec<_>>();
        Self {
            beta1: h.beta1,
            beta2: h.beta2,
            eps: h.adam_eps,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// Number of updates applied so far.
    pub fn step_count(&self) -> usize {
        self.step
    }

    /// One bias-corrected update with learning rate `lr`. Parameters without
    /// a gradient still decay their moments, matching a zero gradient.
    pub fn update(&mut self, params: &mut ParamStore<T>, grads: &Grads<T>, lr: f64) -> Result<()> {
        for (i, g) in grads.tensors.iter().enumerate() {
            if let Some(g) = g {
                if !g.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "gradient of `{}`",
                        params.name(ParamId(i))
                    )));
                }
            }
        }
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        let (b1t, b2t) = (T::of(b1), T::of(b2));
        let (ob1, ob2) = (T::of(1.0 - b1), T::of(1.0 - b2));
        let step_size = T::of(lr / c1);
        let inv_c2 = T::of(1.0 / c2);
        let eps = T::of(self.eps);
        for i in 0..params.len() {
            let p = params.get_mut(ParamId(i));
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            let g = grads.tensors[i].as_ref();
            for k in 0..p.len() {
                let gk = g.map_or(T::zero(), |g| g.data()[k]);
                let mk = b1t * m.data()[k] + ob1 * gk;
                let vk = b2t * v.data()[k] + ob2 * gk * gk;
                m.data_mut()[k] = mk;
                v.data_mut()[k] = vk;
                let denom = (vk * inv_c2).sqrt() + eps;
                p.data_mut()[k] = p.data()[k] - step_size * mk / denom;
            }
        }
        Ok(())
    }

    /// Update with the learning rate the schedule gives the next step.
    pub fn step(&mut self, params: &mut ParamStore<T>, grads: &Grads<T>, h: &TrainHyper) -> Result<f64> {
        let lr = lr_schedule(self.step + 1, h);
        self.update(params, grads, lr)?;
        Ok(lr)
    }
}

/// Sums micro-batch gradients and releases their average every `k` pushes.
#[derive(Debug, Clone)]
pub struct GradAccumulator<T> {
    k: usize,
    count: usize,
    sum: Grads<T>,
}

impl<T: Scalar> GradAccumulator<T> {
    pub fn new(num_params: usize, k: usize) -> Self {
        Self {
            k: k.max(1),
            count: 0,
            sum: Grads::empty(num_params),
        }
    }

    pub fn push(&mut self, grads: &Grads<T>) -> Option<Grads<T>> {
        self.sum.accumulate(grads);
        self.count += 1;
        if self.count < self.k {
            return None;
        }
        let mut out = std::mem::replace(&mut self.sum, Grads::empty(grads.tensors.len()));
        out.scale(T::of(1.0 / self.count as f64));
        self.count = 0;
        Some(out)
    }
}
