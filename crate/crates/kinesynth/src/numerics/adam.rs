//! Adam optimizer.

use crate::error::{Error, Result};
use crate::numerics::tensor::Parameter;

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::param("lr", format!("{}", self.lr)));
        }
        for (name, beta) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::param("beta", format!("{name} must be in [0, 1), got {beta}")));
            }
        }
        if !(self.eps > 0.0) {
            return Err(Error::param("eps", format!("{}", self.eps)));
        }
        Ok(())
    }
}

/// One Adam update with bias correction over every parameter, consuming and
/// zeroing the gradient buffers. `t` is the 1-based step index.
pub fn adam_step(params: &mut [&mut Parameter], cfg: &AdamConfig, t: u64) -> Result<()> {
    cfg.validate()?;
    if t == 0 {
        return Err(Error::param("t", "step index starts at 1".to_string()));
    }
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for p in params.iter_mut() {
        let n = p.value.len();
        let grad = p.grad.data();
        let m = p.moment1.data_mut();
        let v = p.moment2.data_mut();
        let value = p.value.data_mut();
        for i in 0..n {
            let g = grad[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            value[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
        p.zero_grad();
    }
    Ok(())
}
