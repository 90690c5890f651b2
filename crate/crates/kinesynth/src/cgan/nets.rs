//! Generator and discriminator networks.
//!
//! Both are fixed convolutional stacks over the 300-sample time axis. The
//! generator maps (noise ++ one-hot class) through a dense layer into a
//! 9 x 25 base map, then upsamples 25 -> 75 -> 300 with a convolution after
//! each stage. The discriminator sees the signal with the class broadcast as
//! constant channels, runs two conv/pool stages, and applies minibatch
//! discrimination before the sigmoid output.

use super::GanConfig;
use crate::error::{Error, Result};
use crate::numerics::{
    matmul, matmul_nt, matmul_tn, Conv1d, Dense, LeakyRelu, MaxPool1d, Padding, Parameter, Sigmoid, Tensor,
    Upsample1d,
};
use crate::rng::SeededRng;

/// Coarse time steps the generator starts from (25 -> 75 -> 300).
pub const GEN_BASE_STEPS: usize = 25;
/// Coarse channels the dense layer is reshaped into.
pub const GEN_BASE_CHANNELS: usize = 9;
/// Upsampling factors of the two stages.
pub const GEN_UPSAMPLE: (usize, usize) = (3, 4);
/// Negative slope shared by every leaky ReLU in both networks.
pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct Generator {
    pub noise_dim: usize,
    pub n_classes: usize,
    dense: Dense,
    up1: Upsample1d,
    conv1: Conv1d,
    act1: LeakyRelu,
    up2: Upsample1d,
    conv2: Conv1d,
    act2: LeakyRelu,
    conv_out: Conv1d,
    batch: usize,
}

impl Generator {
    pub fn build(cfg: &GanConfig, rng: &mut SeededRng) -> Result<Self> {
        cfg.validate()?;
        let (f1, f2) = cfg.gen_filters;
        let k = cfg.gen_kernel;
        Ok(Self {
            noise_dim: cfg.noise_dim,
            n_classes: cfg.n_classes,
            dense: Dense::new(cfg.noise_dim + cfg.n_classes, GEN_BASE_CHANNELS * GEN_BASE_STEPS, rng),
            up1: Upsample1d::new(GEN_UPSAMPLE.0)?,
            conv1: Conv1d::new(GEN_BASE_CHANNELS, f1, k, Padding::Same, rng),
            act1: LeakyRelu::new(LEAKY_SLOPE),
            up2: Upsample1d::new(GEN_UPSAMPLE.1)?,
            conv2: Conv1d::new(f1, f2, k, Padding::Same, rng),
            act2: LeakyRelu::new(LEAKY_SLOPE),
            conv_out: Conv1d::new(f2, crate::data::CHANNELS, k, Padding::Same, rng),
            batch: 0,
        })
    }

    /// Output length: 25 * 3 * 4 = 300.
    pub fn output_len() -> usize {
        GEN_BASE_STEPS * GEN_UPSAMPLE.0 * GEN_UPSAMPLE.1
    }

    /// `noise [B x noise_dim]` and `one_hot [B x n_classes]` to
    /// `[B x 9 x 300]`, linear output.
    pub fn forward(&mut self, noise: &Tensor, one_hot: &Tensor) -> Result<Tensor> {
        if noise.rank() != 2 || noise.dim(1) != self.noise_dim {
            return Err(Error::dim("generator", format!("noise {:?}, expected [B x {}]", noise.shape(), self.noise_dim)));
        }
        if one_hot.rank() != 2 || one_hot.dim(1) != self.n_classes || one_hot.dim(0) != noise.dim(0) {
            return Err(Error::dim(
                "generator",
                format!("one-hot {:?} incompatible with noise {:?}", one_hot.shape(), noise.shape()),
            ));
        }
        let b = noise.dim(0);
        self.batch = b;
        let mut joined = Vec::with_capacity(b * (self.noise_dim + self.n_classes));
        for bi in 0..b {
            joined.extend_from_slice(&noise.data()[bi * self.noise_dim..(bi + 1) * self.noise_dim]);
            joined.extend_from_slice(&one_hot.data()[bi * self.n_classes..(bi + 1) * self.n_classes]);
        }
        let joined = Tensor::from_vec(&[b, self.noise_dim + self.n_classes], joined)?;
        let x = self.dense.forward(&joined)?;
        let x = x.reshape(&[b, GEN_BASE_CHANNELS, GEN_BASE_STEPS])?;
        let x = self.up1.forward(&x)?;
        let x = self.act1.forward(&self.conv1.forward(&x)?);
        let x = self.up2.forward(&x)?;
        let x = self.act2.forward(&self.conv2.forward(&x)?);
        self.conv_out.forward(&x)
    }

    /// Accumulate parameter gradients from dL/d(output).
    pub fn backward(&mut self, grad_out: &Tensor) -> Result<()> {
        let g = self.conv_out.backward(grad_out)?;
        let g = self.conv2.backward(&self.act2.backward(&g)?)?;
        let g = self.up2.backward(&g)?;
        let g = self.conv1.backward(&self.act1.backward(&g)?)?;
        let g = self.up1.backward(&g)?;
        let g = g.reshape(&[self.batch, GEN_BASE_CHANNELS * GEN_BASE_STEPS])?;
        self.dense.backward(&g)?;
        Ok(())
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![
            &mut self.dense.weights,
            &mut self.dense.bias,
            &mut self.conv1.kernels,
            &mut self.conv1.bias,
            &mut self.conv2.kernels,
            &mut self.conv2.bias,
            &mut self.conv_out.kernels,
            &mut self.conv_out.bias,
        ]
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn param_count(&mut self) -> usize {
        self.params_mut().iter().map(|p| p.value.len()).sum()
    }

    pub fn named_values(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("generator.dense.w".to_string(), &self.dense.weights.value),
            ("generator.dense.b".to_string(), &self.dense.bias.value),
            ("generator.conv1.k".to_string(), &self.conv1.kernels.value),
            ("generator.conv1.b".to_string(), &self.conv1.bias.value),
            ("generator.conv2.k".to_string(), &self.conv2.kernels.value),
            ("generator.conv2.b".to_string(), &self.conv2.bias.value),
            ("generator.conv_out.k".to_string(), &self.conv_out.kernels.value),
            ("generator.conv_out.b".to_string(), &self.conv_out.bias.value),
        ]
    }

    pub fn load_named(&mut self, tensors: &[(String, Tensor)]) -> Result<()> {
        let names: Vec<String> = self.named_values().iter().map(|(n, _)| n.clone()).collect();
        for name in names {
            let tensor = tensors
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, t)| t.clone())
                .ok_or_else(|| Error::ModelFile(format!("missing tensor '{name}'")))?;
            let slot = match name.as_str() {
                "generator.dense.w" => &mut self.dense.weights,
                "generator.dense.b" => &mut self.dense.bias,
                "generator.conv1.k" => &mut self.conv1.kernels,
                "generator.conv1.b" => &mut self.conv1.bias,
                "generator.conv2.k" => &mut self.conv2.kernels,
                "generator.conv2.b" => &mut self.conv2.bias,
                "generator.conv_out.k" => &mut self.conv_out.kernels,
                "generator.conv_out.b" => &mut self.conv_out.bias,
                _ => unreachable!(),
            };
            if slot.shape() != tensor.shape() {
                return Err(Error::ModelFile(format!(
                    "tensor '{name}' has shape {:?}, expected {:?}",
                    tensor.shape(),
                    slot.shape()
                )));
            }
            *slot = Parameter::new(tensor);
        }
        Ok(())
    }
}

/// Cross-sample similarity statistic that lets the discriminator see
/// within-batch diversity: `M_i = reshape(f_i T)` into `B_k` kernels of
/// dimension `C`, and `o(x_i)_b = sum_{j != i} exp(-|M_{i,b} - M_{j,b}|_1)`.
/// The layer output concatenates the input features with `o`.
#[derive(Debug, Clone)]
pub struct MinibatchDiscrimination {
    pub t: Parameter, // [A x (B_k * C)]
    pub kernels: usize,
    pub kernel_dim: usize,
    cache: Option<(Tensor, Tensor)>, // (features [B x A], m [B x B_k*C])
}

impl MinibatchDiscrimination {
    pub fn new(features: usize, kernels: usize, kernel_dim: usize, rng: &mut SeededRng) -> Self {
        Self {
            t: Parameter::uniform_fan_in(&[features, kernels * kernel_dim], features, rng),
            kernels,
            kernel_dim,
            cache: None,
        }
    }

    pub fn forward(&mut self, features: &Tensor) -> Result<Tensor> {
        if features.rank() != 2 || features.dim(1) != self.t.shape()[0] {
            return Err(Error::dim(
                "minibatch_discrimination",
                format!("features {:?}, expected [B x {}]", features.shape(), self.t.shape()[0]),
            ));
        }
        let b = features.dim(0);
        if b < 2 {
            return Err(Error::param(
                "batch",
                "minibatch discrimination is undefined for a batch of 1".to_string(),
            ));
        }
        let (a, bk, c) = (self.t.shape()[0], self.kernels, self.kernel_dim);
        let m = matmul(features.data(), self.t.value.data(), b, a, bk * c);
        let mut out = vec![0.0; b * (a + bk)];
        for i in 0..b {
            out[i * (a + bk)..i * (a + bk) + a].copy_from_slice(&features.data()[i * a..(i + 1) * a]);
            for kb in 0..bk {
                let mut o = 0.0;
                for j in 0..b {
                    if j == i {
                        continue;
                    }
                    let mut l1 = 0.0;
                    for ci in 0..c {
                        l1 += (m[i * bk * c + kb * c + ci] - m[j * bk * c + kb * c + ci]).abs();
                    }
                    o += (-l1).exp();
                }
                out[i * (a + bk) + a + kb] = o;
            }
        }
        self.cache = Some((features.clone(), Tensor::from_vec(&[b, bk * c], m)?));
        Tensor::from_vec(&[b, a + bk], out)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let (features, m) = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::dim("minibatch_discrimination", "backward before forward"))?;
        let (a, bk, c) = (self.t.shape()[0], self.kernels, self.kernel_dim);
        let b = features.dim(0);
        if grad_out.shape() != [b, a + bk] {
            return Err(Error::dim(
                "minibatch_discrimination",
                format!("grad {:?}, expected [{b} x {}]", grad_out.shape(), a + bk),
            ));
        }
        let md = m.data();
        // dL/dM from the similarity statistic; both o_i and o_j depend on the
        // pair (i, j), and exp(-l1) is shared.
        let mut dm = vec![0.0; b * bk * c];
        for i in 0..b {
            for j in 0..b {
                if j == i {
                    continue;
                }
                for kb in 0..bk {
                    let mut l1 = 0.0;
                    for ci in 0..c {
                        l1 += (md[i * bk * c + kb * c + ci] - md[j * bk * c + kb * c + ci]).abs();
                    }
                    let e = (-l1).exp();
                    let weight = grad_out.data()[i * (a + bk) + a + kb] + grad_out.data()[j * (a + bk) + a + kb];
                    for ci in 0..c {
                        let diff = md[i * bk * c + kb * c + ci] - md[j * bk * c + kb * c + ci];
                        let sign = if diff > 0.0 {
                            1.0
                        } else if diff < 0.0 {
                            -1.0
                        } else {
                            0.0
                        };
                        dm[i * bk * c + kb * c + ci] -= weight * e * sign;
                    }
                }
            }
        }
        // dT += features^T dM ; dFeatures = dM T^T + passthrough slice
        let dt = matmul_tn(features.data(), &dm, a, b, bk * c);
        for (g, d) in self.t.grad.data_mut().iter_mut().zip(&dt) {
            *g += d;
        }
        let mut dfeat = matmul_nt(&dm, self.t.value.data(), b, bk * c, a);
        for i in 0..b {
            for ai in 0..a {
                dfeat[i * a + ai] += grad_out.data()[i * (a + bk) + ai];
            }
        }
        Tensor::from_vec(&[b, a], dfeat)
    }
}

#[derive(Debug, Clone)]
pub struct Discriminator {
    pub n_classes: usize,
    conv1: Conv1d,
    act1: LeakyRelu,
    pool1: MaxPool1d,
    conv2: Conv1d,
    act2: LeakyRelu,
    pool2: MaxPool1d,
    feature: Dense,
    act3: LeakyRelu,
    mbd: MinibatchDiscrimination,
    out: Dense,
    sigmoid: Sigmoid,
    batch: usize,
    flat_dims: (usize, usize), // (channels, time) entering flatten
}

impl Discriminator {
    pub fn build(cfg: &GanConfig, rng: &mut SeededRng) -> Result<Self> {
        cfg.validate()?;
        let (d1, d2) = cfg.disc_filters;
        let (k1, k2) = cfg.disc_kernels;
        let (p1, p2) = cfg.disc_pools;
        let t = Generator::output_len();
        let t_flat = t / p1 / p2;
        Ok(Self {
            n_classes: cfg.n_classes,
            conv1: Conv1d::new(crate::data::CHANNELS + cfg.n_classes, d1, k1, Padding::Same, rng),
            act1: LeakyRelu::new(LEAKY_SLOPE),
            pool1: MaxPool1d::new(p1)?,
            conv2: Conv1d::new(d1, d2, k2, Padding::Same, rng),
            act2: LeakyRelu::new(LEAKY_SLOPE),
            pool2: MaxPool1d::new(p2)?,
            feature: Dense::new(d2 * t_flat, cfg.feature_dim, rng),
            act3: LeakyRelu::new(LEAKY_SLOPE),
            mbd: MinibatchDiscrimination::new(cfg.feature_dim, cfg.mb_kernels, cfg.mb_kernel_dim, rng),
            out: Dense::new(cfg.feature_dim + cfg.mb_kernels, 1, rng),
            sigmoid: Sigmoid::new(),
            batch: 0,
            flat_dims: (d2, t_flat),
        })
    }

    /// Concatenate the class one-hot as constant channels under the signal.
    fn conditioned_input(&self, signals: &Tensor, one_hot: &Tensor) -> Result<Tensor> {
        let (b, ch, t) = (signals.dim(0), signals.dim(1), signals.dim(2));
        let total = ch + self.n_classes;
        let mut data = vec![0.0; b * total * t];
        for bi in 0..b {
            let dst = &mut data[bi * total * t..(bi + 1) * total * t];
            dst[..ch * t].copy_from_slice(&signals.data()[bi * ch * t..(bi + 1) * ch * t]);
            for ci in 0..self.n_classes {
                let v = one_hot.data()[bi * self.n_classes + ci];
                dst[(ch + ci) * t..(ch + ci + 1) * t].fill(v);
            }
        }
        Tensor::from_vec(&[b, total, t], data)
    }

    /// `signals [B x 9 x 300]` to a real-vs-synthetic score per sample,
    /// `[B x 1]` in (0, 1).
    pub fn forward(&mut self, signals: &Tensor, one_hot: &Tensor) -> Result<Tensor> {
        if signals.rank() != 3 || signals.dim(1) != crate::data::CHANNELS || signals.dim(2) != Generator::output_len()
        {
            return Err(Error::dim(
                "discriminator",
                format!("signals {:?}, expected [B x 9 x 300]", signals.shape()),
            ));
        }
        if one_hot.dim(0) != signals.dim(0) || one_hot.dim(1) != self.n_classes {
            return Err(Error::dim(
                "discriminator",
                format!("one-hot {:?} incompatible with batch {}", one_hot.shape(), signals.dim(0)),
            ));
        }
        let b = signals.dim(0);
        self.batch = b;
        let x = self.conditioned_input(signals, one_hot)?;
        let x = self.pool1.forward(&self.act1.forward(&self.conv1.forward(&x)?))?;
        let x = self.pool2.forward(&self.act2.forward(&self.conv2.forward(&x)?))?;
        let x = x.reshape(&[b, self.flat_dims.0 * self.flat_dims.1])?;
        let x = self.act3.forward(&self.feature.forward(&x)?);
        let x = self.mbd.forward(&x)?;
        let x = self.out.forward(&x)?;
        Ok(self.sigmoid.forward(&x))
    }

    /// Accumulate parameter gradients; returns dL/d(signals) so the
    /// generator can be trained through this network.
    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let g = self.sigmoid.backward(grad_out)?;
        let g = self.out.backward(&g)?;
        let g = self.mbd.backward(&g)?;
        let g = self.feature.backward(&self.act3.backward(&g)?)?;
        let g = g.reshape(&[self.batch, self.flat_dims.0, self.flat_dims.1])?;
        let g = self.conv2.backward(&self.act2.backward(&self.pool2.backward(&g)?)?)?;
        let g = self.conv1.backward(&self.act1.backward(&self.pool1.backward(&g)?)?)?;
        // Keep the signal channels; the constant class channels are inputs,
        // not trainable.
        let (b, t) = (self.batch, Generator::output_len());
        let ch = crate::data::CHANNELS;
        let total = ch + self.n_classes;
        let mut dsig = vec![0.0; b * ch * t];
        for bi in 0..b {
            dsig[bi * ch * t..(bi + 1) * ch * t]
                .copy_from_slice(&g.data()[bi * total * t..bi * total * t + ch * t]);
        }
        Tensor::from_vec(&[b, ch, t], dsig)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![
            &mut self.conv1.kernels,
            &mut self.conv1.bias,
            &mut self.conv2.kernels,
            &mut self.conv2.bias,
            &mut self.feature.weights,
            &mut self.feature.bias,
            &mut self.mbd.t,
            &mut self.out.weights,
            &mut self.out.bias,
        ]
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn param_count(&mut self) -> usize {
        self.params_mut().iter().map(|p| p.value.len()).sum()
    }

    pub fn named_values(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("discriminator.conv1.k".to_string(), &self.conv1.kernels.value),
            ("discriminator.conv1.b".to_string(), &self.conv1.bias.value),
            ("discriminator.conv2.k".to_string(), &self.conv2.kernels.value),
            ("discriminator.conv2.b".to_string(), &self.conv2.bias.value),
            ("discriminator.feature.w".to_string(), &self.feature.weights.value),
            ("discriminator.feature.b".to_string(), &self.feature.bias.value),
            ("discriminator.mbd.t".to_string(), &self.mbd.t.value),
            ("discriminator.out.w".to_string(), &self.out.weights.value),
            ("discriminator.out.b".to_string(), &self.out.bias.value),
        ]
    }

    pub fn load_named(&mut self, tensors: &[(String, Tensor)]) -> Result<()> {
        for name in [
            "discriminator.conv1.k",
            "discriminator.conv1.b",
            "discriminator.conv2.k",
            "discriminator.conv2.b",
            "discriminator.feature.w",
            "discriminator.feature.b",
            "discriminator.mbd.t",
            "discriminator.out.w",
            "discriminator.out.b",
        ] {
            let tensor = tensors
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, t)| t.clone())
                .ok_or_else(|| Error::ModelFile(format!("missing tensor '{name}'")))?;
            let slot = match name {
                "discriminator.conv1.k" => &mut self.conv1.kernels,
                "discriminator.conv1.b" => &mut self.conv1.bias,
                "discriminator.conv2.k" => &mut self.conv2.kernels,
                "discriminator.conv2.b" => &mut self.conv2.bias,
                "discriminator.feature.w" => &mut self.feature.weights,
                "discriminator.feature.b" => &mut self.feature.bias,
                "discriminator.mbd.t" => &mut self.mbd.t,
                "discriminator.out.w" => &mut self.out.weights,
                "discriminator.out.b" => &mut self.out.bias,
                _ => unreachable!(),
            };
            if slot.shape() != tensor.shape() {
                return Err(Error::ModelFile(format!(
                    "tensor '{name}' has shape {:?}, expected {:?}",
                    tensor.shape(),
                    slot.shape()
                )));
            }
            *slot = Parameter::new(tensor);
        }
        Ok(())
    }
}
