//! Label-smoothed cross-entropy.
//!
//! The smoothed target puts `1 - eps` on the gold class and spreads `eps`
//! uniformly over the remaining `V - 1` classes. The loss reported is the
//! cross-entropy against that distribution, which equals the KL divergence
//! plus the (constant) entropy of the smoothed target.

use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Loss and `d loss / d logits` for a single row.
pub(crate) fn xent_row<T: Scalar>(logits: &[T], gold: usize, eps: f64, grad: &mut [T]) -> f64 {
    let v = logits.len();
    let max = logits
        .iter()
        .map(|x| x.as_f64())
        .fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logits.iter().map(|x| (x.as_f64() - max).exp()).sum();
    let log_z = max + z.ln();
    let (on, off) = if v > 1 {
        (1.0 - eps, eps / (v - 1) as f64)
    } else {
        (1.0, 0.0)
    };
    let mut loss = 0.0;
    for (k, (x, g)) in logits.iter().zip(grad.iter_mut()).enumerate() {
        let logp = x.as_f64() - log_z;
        let q = if k == gold { on } else { off };
        if q > 0.0 {
            loss -= q * logp;
        }
        *g = T::of(logp.exp() - q);
    }
    loss
}

/// Mean label-smoothed cross-entropy over non-padding rows of `logits`
/// (`[rows, vocab]`) and its gradient with respect to the logits.
///
/// `targets[r]` is `None` for padding rows, which contribute nothing.
pub fn label_smoothed_xent<T: Scalar>(
    logits: &Tensor<T>,
    targets: &[Option<usize>],
    smoothing: f64,
) -> Result<(f64, Tensor<T>)> {
    if !(0.0..1.0).contains(&smoothing) {
        return Err(Error::Shape(format!("smoothing must lie in [0,1), got {smoothing}")));
    }
    let rows = logits.rows();
    let v = logits.cols();
    if targets.len() != rows {
        return Err(Error::Shape(format!("{} targets for {rows} rows", targets.len())));
    }
    let live = targets.iter().filter(|t| t.is_some()).count();
    if live == 0 {
        return Err(Error::AllPadding);
    }
    logits.ensure_finite("logits")?;
    let mut grad = Tensor::zeros(logits.shape());
    let mut total = 0.0;
    for (r, target) in targets.iter().enumerate() {
        let Some(gold) = *target else { continue };
        if gold >= v {
            return Err(Error::Shape(format!("target {gold} outside vocabulary of {v}")));
        }
        total += xent_row(logits.row(r), gold, smoothing, grad.row_mut(r));
    }
    grad.scale_assign(T::of(1.0 / live as f64));
    Ok((total / live as f64, grad))
}
