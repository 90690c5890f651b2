//! Exact t-SNE for qualitative comparison of real and synthetic trials.
//!
//! Pairwise Gaussian affinities with per-point bandwidths found by
//! bisection, symmetrized and exaggerated early; the low-dimensional
//! embedding uses the Student-t kernel and plain gradient descent with the
//! usual momentum switch and per-coordinate gains.

use crate::data::Trial;
use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::rng::SeededRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedConfig {
    pub perplexity: f64,
    pub iterations: usize,
    /// Affinity multiplier during the first `exaggeration_iters` iterations.
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            early_exaggeration: 12.0,
            exaggeration_iters: 250,
            learning_rate: 200.0,
            seed: 0,
        }
    }
}

/// Embedding plus the per-iteration KL divergence trace.
#[derive(Debug, Clone)]
pub struct TsneResult {
    /// `[N x 2]` coordinates, mean-centered.
    pub embedding: Tensor,
    pub kl_per_iter: Vec<f64>,
}

const P_FLOOR: f64 = 1e-12;

/// Squared Euclidean distances between rows.
fn pairwise_sq(points: &Tensor) -> Vec<f64> {
    let (n, d) = (points.dim(0), points.dim(1));
    let mut out = vec![0.0; n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let xi = &points.data()[i * d..(i + 1) * d];
        for (j, slot) in row.iter_mut().enumerate() {
            if i == j {
                continue;
            }
            let xj = &points.data()[j * d..(j + 1) * d];
            let mut acc = 0.0;
            for (&a, &b) in xi.iter().zip(xj) {
                acc += (a - b) * (a - b);
            }
            *slot = acc;
        }
    });
    out
}

/// Conditional affinities p_{j|i} whose entropy matches ln(perplexity)
/// within 1e-4, via bisection on the precision beta.
fn conditional_affinities(dist_sq: &[f64], n: usize, perplexity: f64) -> Vec<f64> {
    let target_h = perplexity.ln();
    let mut p = vec![0.0; n * n];
    p.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let mut beta = 1.0;
        let mut beta_lo = f64::NEG_INFINITY;
        let mut beta_hi = f64::INFINITY;
        for _ in 0..100 {
            let mut sum = 0.0;
            for j in 0..n {
                row[j] = if i == j { 0.0 } else { (-beta * dist_sq[i * n + j]).exp() };
                sum += row[j];
            }
            let mut h = 0.0;
            if sum > 0.0 {
                for v in row.iter_mut() {
                    *v /= sum;
                    if *v > 1e-300 {
                        h -= *v * v.ln();
                    }
                }
            }
            let diff = h - target_h;
            if diff.abs() <= 1e-4 {
                break;
            }
            if diff > 0.0 {
                beta_lo = beta;
                beta = if beta_hi.is_infinite() { beta * 2.0 } else { 0.5 * (beta + beta_hi) };
            } else {
                beta_hi = beta;
                beta = if beta_lo.is_infinite() { beta * 0.5 } else { 0.5 * (beta + beta_lo) };
            }
        }
    });
    p
}

/// Symmetrized joint affinities `p_ij` for the given perplexity, floored at
/// 1e-12, as a flat `[N x N]` row-major matrix.
pub fn joint_affinities(points: &Tensor, perplexity: f64) -> Result<Vec<f64>> {
    if points.rank() != 2 {
        return Err(Error::dim("tsne", format!("expected [N x D], got {:?}", points.shape())));
    }
    let n = points.dim(0);
    let dist = pairwise_sq(points);
    let cond = conditional_affinities(&dist, n, perplexity);
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i * n + j] = ((cond[i * n + j] + cond[j * n + i]) / (2.0 * n as f64)).max(P_FLOOR);
            }
        }
    }
    Ok(p)
}

/// KL divergence of the current embedding and its gradient. `p` is the
/// `[N x N]` joint affinity matrix and `y` the flat `[N x 2]` coordinates.
/// The KL term always uses the raw affinities; `exaggeration` scales them in
/// the gradient only.
pub fn kl_and_gradient(p: &[f64], y: &[f64], n: usize, exaggeration: f64) -> (f64, Vec<f64>) {
    let mut w = vec![0.0; n * n];
    let mut w_sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let dx = y[2 * i] - y[2 * j];
            let dy = y[2 * i + 1] - y[2 * j + 1];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            w[i * n + j] = v;
            w_sum += v;
        }
    }
    let mut kl = 0.0;
    let mut grad = vec![0.0; n * 2];
    for i in 0..n {
        let mut gx = 0.0;
        let mut gy = 0.0;
        for j in 0..n {
            if i == j {
                continue;
            }
            let pij = p[i * n + j];
            let wij = w[i * n + j];
            let qij = (wij / w_sum).max(P_FLOOR);
            kl += pij * (pij / qij).ln();
            let coeff = 4.0 * (exaggeration * pij - qij) * wij;
            gx += coeff * (y[2 * i] - y[2 * j]);
            gy += coeff * (y[2 * i + 1] - y[2 * j + 1]);
        }
        grad[2 * i] = gx;
        grad[2 * i + 1] = gy;
    }
    (kl, grad)
}

/// Run exact t-SNE down to two dimensions.
pub fn tsne(points: &Tensor, config: &EmbedConfig) -> Result<TsneResult> {
    if points.rank() != 2 {
        return Err(Error::dim("tsne", format!("expected [N x D], got {:?}", points.shape())));
    }
    let (n, d) = (points.dim(0), points.dim(1));
    if n < 5 || d < 1 {
        return Err(Error::param("points", format!("need at least 5 points of dimension >= 1, got {n} x {d}")));
    }
    if !(config.perplexity > 0.0) || config.perplexity >= (n - 1) as f64 / 3.0 {
        return Err(Error::param(
            "perplexity",
            format!("perplexity {} infeasible for {n} points (must be < (N-1)/3)", config.perplexity),
        ));
    }

    let p = joint_affinities(points, config.perplexity)?;

    let mut rng = SeededRng::new(config.seed);
    let mut y: Vec<f64> = (0..n * 2).map(|_| 1e-4 * rng.normal()).collect();
    let mut vel = vec![0.0f64; n * 2];
    let mut gains = vec![1.0f64; n * 2];
    let mut kl_per_iter = Vec::with_capacity(config.iterations);

    for iter in 0..config.iterations {
        let exag = if iter < config.exaggeration_iters { config.early_exaggeration } else { 1.0 };
        let momentum = if iter < config.exaggeration_iters { 0.5 } else { 0.8 };
        let (kl, grad) = kl_and_gradient(&p, &y, n, exag);
        for (idx, &g) in grad.iter().enumerate() {
            gains[idx] = if (g > 0.0) == (vel[idx] > 0.0) { (gains[idx] * 0.8).max(0.01) } else { gains[idx] + 0.2 };
            vel[idx] = momentum * vel[idx] - config.learning_rate * gains[idx] * g;
        }
        for (yi, v) in y.iter_mut().zip(&vel) {
            *yi += v;
        }
        // Keep the embedding translation-centered.
        let (mut mx, mut my) = (0.0, 0.0);
        for c in y.chunks(2) {
            mx += c[0];
            my += c[1];
        }
        mx /= n as f64;
        my /= n as f64;
        for c in y.chunks_mut(2) {
            c[0] -= mx;
            c[1] -= my;
        }
        kl_per_iter.push(kl);
    }

    Ok(TsneResult { embedding: Tensor::from_vec(&[n, 2], y)?, kl_per_iter })
}

/// Flatten trials into `[N x 2700]` rows for embedding.
pub fn flatten_trials(trials: &[Trial]) -> Tensor {
    let d = crate::data::CHANNELS * crate::data::SAMPLES;
    let mut data = Vec::with_capacity(trials.len() * d);
    for t in trials {
        data.extend_from_slice(t.signal.data());
    }
    Tensor::from_vec(&[trials.len(), d], data).expect("uniform trial shapes")
}
