//! Loss functions with exact gradients.
//!
//! Probabilities are clamped to `[1e-7, 1 - 1e-7]` before any log; the
//! reported gradients are exact for the clamped expression (zero where the
//! clamp is active).

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

pub const PROB_CLAMP: f64 = 1e-7;

fn clamp(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

fn inside_clamp(p: f64) -> bool {
    (PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p)
}

/// Mean over the batch of `-log p[b, label_b]`.
///
/// Returns the loss and its gradient with respect to `probs`.
pub fn sparse_categorical_cross_entropy(probs: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    if probs.rank() != 2 {
        return Err(Error::dim("sparse_cce", format!("expected [B x L], got {:?}", probs.shape())));
    }
    let (b, l) = (probs.dim(0), probs.dim(1));
    if labels.len() != b {
        return Err(Error::dim("sparse_cce", format!("{} labels for batch of {}", labels.len(), b)));
    }
    let mut loss = 0.0;
    let mut grad = Tensor::zeros(probs.shape());
    for (bi, &label) in labels.iter().enumerate() {
        if label >= l {
            return Err(Error::Index(format!("label {label} out of range for {l} classes")));
        }
        let p = probs.data()[bi * l + label];
        loss -= clamp(p).ln();
        if inside_clamp(p) {
            grad.data_mut()[bi * l + label] = -1.0 / (b as f64 * p);
        }
    }
    Ok((loss / b as f64, grad))
}

/// Mean over all elements of `-[t log p + (1 - t) log(1 - p)]`.
pub fn binary_cross_entropy(p: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if p.shape() != target.shape() {
        return Err(Error::dim("bce", format!("{:?} vs {:?}", p.shape(), target.shape())));
    }
    if p.is_empty() {
        return Err(Error::dim("bce", "empty input".to_string()));
    }
    let n = p.len() as f64;
    let mut loss = 0.0;
    let mut grad = Tensor::zeros(p.shape());
    for (i, (&pi, &ti)) in p.data().iter().zip(target.data()).enumerate() {
        let pc = clamp(pi);
        loss -= ti * pc.ln() + (1.0 - ti) * (1.0 - pc).ln();
        if inside_clamp(pi) {
            grad.data_mut()[i] = (-ti / pi + (1.0 - ti) / (1.0 - pi)) / n;
        }
    }
    Ok((loss / n, grad))
}
