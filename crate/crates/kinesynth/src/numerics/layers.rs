//! Differentiable layer primitives.
//!
//! Reverse-mode differentiation is per-layer: each layer caches what its
//! forward pass needs, and `backward` consumes the upstream gradient,
//! accumulates into its parameters' grad buffers, and returns the gradient
//! with respect to its input. The fixed feed-forward architectures here do
//! not need a general tape.

use crate::error::{Error, Result};
use crate::numerics::tensor::{matmul, matmul_nt, matmul_tn, Parameter, Tensor};
use crate::rng::SeededRng;
use rayon::prelude::*;

/// Fully connected layer: `out = input * W + b`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub weights: Parameter, // [in x out]
    pub bias: Parameter,    // [out]
    cache: Option<Tensor>,
}

impl Dense {
    pub fn new(input_dim: usize, output_dim: usize, rng: &mut SeededRng) -> Self {
        Self {
            weights: Parameter::uniform_fan_in(&[input_dim, output_dim], input_dim, rng),
            bias: Parameter::new(Tensor::zeros(&[output_dim])),
            cache: None,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn output_dim(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let (i, o) = (self.input_dim(), self.output_dim());
        if input.rank() != 2 || input.dim(1) != i {
            return Err(Error::dim(
                "dense",
                format!("input {:?} does not match weight rows {} (axis 1)", input.shape(), i),
            ));
        }
        let b = input.dim(0);
        let mut out = matmul(input.data(), self.weights.value.data(), b, i, o);
        for row in out.chunks_mut(o) {
            for (x, &bias) in row.iter_mut().zip(self.bias.value.data()) {
                *x += bias;
            }
        }
        self.cache = Some(input.clone());
        Tensor::from_vec(&[b, o], out)
    }

    /// Accumulates dW and db, returns d(input).
    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let input = self.cache.as_ref().ok_or_else(|| Error::dim("dense", "backward before forward"))?;
        let (i, o) = (self.input_dim(), self.output_dim());
        let b = input.dim(0);
        if grad_out.shape() != [b, o] {
            return Err(Error::dim(
                "dense",
                format!("grad {:?} does not match output [{b}, {o}]", grad_out.shape()),
            ));
        }
        // dW = input^T * grad_out
        let dw = matmul_tn(input.data(), grad_out.data(), i, b, o);
        for (g, d) in self.weights.grad.data_mut().iter_mut().zip(&dw) {
            *g += d;
        }
        for row in grad_out.data().chunks(o) {
            for (g, &d) in self.bias.grad.data_mut().iter_mut().zip(row) {
                *g += d;
            }
        }
        // d(input) = grad_out * W^T
        let dx = matmul_nt(grad_out.data(), self.weights.value.data(), b, o, i);
        Tensor::from_vec(&[b, i], dx)
    }
}

/// Padding behaviour for [`Conv1d`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Zero-pad so the output length equals the input length.
    Same,
    /// No padding; output length is `T - K + 1`.
    Valid,
}

/// 1-D cross-correlation over the time axis, stride 1.
///
/// Input `[B x C x T]`, kernels `[F x C x K]`, output `[B x F x T']`.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub kernels: Parameter, // [F x C x K]
    pub bias: Parameter,    // [F]
    pub padding: Padding,
    cache: Option<Tensor>,
}

impl Conv1d {
    pub fn new(in_channels: usize, filters: usize, kernel: usize, padding: Padding, rng: &mut SeededRng) -> Self {
        Self {
            kernels: Parameter::uniform_fan_in(&[filters, in_channels, kernel], in_channels * kernel, rng),
            bias: Parameter::new(Tensor::zeros(&[filters])),
            padding,
            cache: None,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.shape()[1]
    }

    pub fn filters(&self) -> usize {
        self.kernels.shape()[0]
    }

    pub fn kernel_len(&self) -> usize {
        self.kernels.shape()[2]
    }

    fn pads(&self, k: usize) -> (usize, usize) {
        match self.padding {
            Padding::Same => {
                let left = (k - 1) / 2;
                (left, k - 1 - left)
            }
            Padding::Valid => (0, 0),
        }
    }

    pub fn output_len(&self, t: usize) -> Result<usize> {
        let k = self.kernel_len();
        let (pl, pr) = self.pads(k);
        let padded = t + pl + pr;
        if k > padded {
            return Err(Error::dim(
                "conv1d",
                format!("kernel length {k} exceeds padded input length {padded} (time axis)"),
            ));
        }
        Ok(padded - k + 1)
    }

    /// Gather padded windows: returns `[C*K x T']` for one sample.
    fn im2col(&self, x: &[f64], c: usize, t: usize, t_out: usize) -> Vec<f64> {
        let k = self.kernel_len();
        let (pl, _) = self.pads(k);
        let mut col = vec![0.0; c * k * t_out];
        for ci in 0..c {
            let x_ch = &x[ci * t..(ci + 1) * t];
            for ki in 0..k {
                let row = &mut col[(ci * k + ki) * t_out..(ci * k + ki + 1) * t_out];
                for (ti, slot) in row.iter_mut().enumerate() {
                    // padded index ti + ki maps to input index ti + ki - pl
                    let src = ti + ki;
                    if src >= pl && src - pl < t {
                        *slot = x_ch[src - pl];
                    }
                }
            }
        }
        col
    }

    pub fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let (f, c, k) = (self.filters(), self.in_channels(), self.kernel_len());
        if input.rank() != 3 || input.dim(1) != c {
            return Err(Error::dim(
                "conv1d",
                format!("input {:?} does not match kernel channels {} (axis 1)", input.shape(), c),
            ));
        }
        let (b, t) = (input.dim(0), input.dim(2));
        let t_out = self.output_len(t)?;
        let mut out = vec![0.0; b * f * t_out];
        let kflat = self.kernels.value.data();
        let bias = self.bias.value.data();
        out.par_chunks_mut(f * t_out)
            .zip(input.data().par_chunks(c * t))
            .for_each(|(out_b, x_b)| {
                let col = self.im2col(x_b, c, t, t_out);
                let prod = matmul(kflat, &col, f, c * k, t_out);
                for (fi, row) in prod.chunks(t_out).enumerate() {
                    let dst = &mut out_b[fi * t_out..(fi + 1) * t_out];
                    for (d, &v) in dst.iter_mut().zip(row) {
                        *d = v + bias[fi];
                    }
                }
            });
        self.cache = Some(input.clone());
        Tensor::from_vec(&[b, f, t_out], out)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let input = self.cache.as_ref().ok_or_else(|| Error::dim("conv1d", "backward before forward"))?;
        let (f, c, k) = (self.filters(), self.in_channels(), self.kernel_len());
        let (b, t) = (input.dim(0), input.dim(2));
        let t_out = self.output_len(t)?;
        if grad_out.shape() != [b, f, t_out] {
            return Err(Error::dim(
                "conv1d",
                format!("grad {:?} does not match output [{b}, {f}, {t_out}]", grad_out.shape()),
            ));
        }
        let (pl, _) = self.pads(k);
        let kflat = self.kernels.value.data();

        let mut dx = vec![0.0; b * c * t];
        // Per-sample contributions computed in parallel, reduced in batch order
        // so accumulation stays bit-identical to a sequential pass.
        let per_sample: Vec<(Vec<f64>, Vec<f64>)> = dx
            .par_chunks_mut(c * t)
            .zip(input.data().par_chunks(c * t))
            .zip(grad_out.data().par_chunks(f * t_out))
            .map(|((dx_b, x_b), go_b)| {
                let col = self.im2col(x_b, c, t, t_out);
                // dK = go_b [F x T'] * col^T [T' x CK]
                let dk = matmul_nt(go_b, &col, f, t_out, c * k);
                let mut db = vec![0.0; f];
                for (fi, row) in go_b.chunks(t_out).enumerate() {
                    db[fi] = row.iter().sum();
                }
                // dcol [CK x T'] = K^T [CK x F] * go_b [F x T']
                let dcol = matmul_tn(kflat, go_b, c * k, f, t_out);
                for ci in 0..c {
                    for ki in 0..k {
                        let row = &dcol[(ci * k + ki) * t_out..(ci * k + ki + 1) * t_out];
                        for (ti, &g) in row.iter().enumerate() {
                            let src = ti + ki;
                            if src >= pl && src - pl < t {
                                dx_b[ci * t + (src - pl)] += g;
                            }
                        }
                    }
                }
                (dk, db)
            })
            .collect();
        for (dk, db) in per_sample {
            for (g, d) in self.kernels.grad.data_mut().iter_mut().zip(&dk) {
                *g += d;
            }
            for (g, d) in self.bias.grad.data_mut().iter_mut().zip(&db) {
                *g += d;
            }
        }
        Tensor::from_vec(&[b, c, t], dx)
    }
}

/// Non-overlapping max pooling over the time axis. Trailing samples that do
/// not fill a window are dropped.
#[derive(Debug, Clone)]
pub struct MaxPool1d {
    pub window: usize,
    argmax: Option<(Vec<usize>, Vec<usize>)>, // (flat input indices, input shape)
}

impl MaxPool1d {
    pub fn new(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::param("window", "max-pool window must be >= 1".to_string()));
        }
        Ok(Self { window, argmax: None })
    }

    pub fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        if input.rank() != 3 {
            return Err(Error::dim("maxpool1d", format!("expected [B x C x T], got {:?}", input.shape())));
        }
        let (b, c, t) = (input.dim(0), input.dim(1), input.dim(2));
        let w = self.window;
        let t_out = t / w;
        let mut out = vec![0.0; b * c * t_out];
        let mut arg = vec![0usize; b * c * t_out];
        let x = input.data();
        for bc in 0..b * c {
            let base = bc * t;
            for i in 0..t_out {
                let mut best = base + i * w;
                for j in 1..w {
                    if x[base + i * w + j] > x[best] {
                        best = base + i * w + j;
                    }
                }
                out[bc * t_out + i] = x[best];
                arg[bc * t_out + i] = best;
            }
        }
        self.argmax = Some((arg, vec![b, c, t]));
        Tensor::from_vec(&[b, c, t_out], out)
    }

    /// Routes gradient to the stored argmax positions only.
    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let (arg, in_shape) = self
            .argmax
            .as_ref()
            .ok_or_else(|| Error::dim("maxpool1d", "backward before forward"))?;
        if grad_out.len() != arg.len() {
            return Err(Error::dim(
                "maxpool1d",
                format!("grad has {} elements, pooled output had {}", grad_out.len(), arg.len()),
            ));
        }
        let mut dx = Tensor::zeros(in_shape);
        let d = dx.data_mut();
        for (&idx, &g) in arg.iter().zip(grad_out.data()) {
            d[idx] += g;
        }
        Ok(dx)
    }
}

/// `max(0, x)`.
#[derive(Debug, Clone, Default)]
pub struct Relu {
    cache: Option<Tensor>,
}

impl Relu {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forward(&mut self, input: &Tensor) -> Tensor {
        self.cache = Some(input.clone());
        input.map(|x| x.max(0.0))
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let input = self.cache.as_ref().ok_or_else(|| Error::dim("relu", "backward before forward"))?;
        if input.shape() != grad_out.shape() {
            return Err(Error::dim("relu", format!("{:?} vs {:?}", input.shape(), grad_out.shape())));
        }
        let data = input
            .data()
            .iter()
            .zip(grad_out.data())
            .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
            .collect();
        Tensor::from_vec(input.shape(), data)
    }
}

/// `x` for `x > 0`, `slope * x` otherwise.
#[derive(Debug, Clone)]
pub struct LeakyRelu {
    pub slope: f64,
    cache: Option<Tensor>,
}

impl LeakyRelu {
    pub fn new(slope: f64) -> Self {
        Self { slope, cache: None }
    }

    pub fn forward(&mut self, input: &Tensor) -> Tensor {
        self.cache = Some(input.clone());
        let s = self.slope;
        input.map(|x| if x > 0.0 { x } else { s * x })
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let input = self.cache.as_ref().ok_or_else(|| Error::dim("leaky_relu", "backward before forward"))?;
        let s = self.slope;
        let data = input
            .data()
            .iter()
            .zip(grad_out.data())
            .map(|(&x, &g)| if x > 0.0 { g } else { s * g })
            .collect();
        Tensor::from_vec(input.shape(), data)
    }
}

/// Logistic sigmoid.
#[derive(Debug, Clone, Default)]
pub struct Sigmoid {
    out: Option<Tensor>,
}

impl Sigmoid {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forward(&mut self, input: &Tensor) -> Tensor {
        let out = input.map(|x| 1.0 / (1.0 + (-x).exp()));
        self.out = Some(out.clone());
        out
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let out = self.out.as_ref().ok_or_else(|| Error::dim("sigmoid", "backward before forward"))?;
        let data = out
            .data()
            .iter()
            .zip(grad_out.data())
            .map(|(&y, &g)| g * y * (1.0 - y))
            .collect();
        Tensor::from_vec(out.shape(), data)
    }
}

/// Softmax over the final axis, stabilized by max subtraction.
#[derive(Debug, Clone, Default)]
pub struct Softmax {
    out: Option<Tensor>,
}

impl Softmax {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        if input.rank() == 0 || input.dim(input.rank() - 1) == 0 {
            return Err(Error::dim("softmax", format!("degenerate shape {:?}", input.shape())));
        }
        let cols = input.dim(input.rank() - 1);
        let mut data = input.data().to_vec();
        for row in data.chunks_mut(cols) {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for x in row.iter_mut() {
                *x = (*x - m).exp();
                sum += *x;
            }
            for x in row.iter_mut() {
                *x /= sum;
            }
        }
        let out = Tensor::from_vec(input.shape(), data)?;
        self.out = Some(out.clone());
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let out = self.out.as_ref().ok_or_else(|| Error::dim("softmax", "backward before forward"))?;
        let cols = out.dim(out.rank() - 1);
        let mut data = vec![0.0; out.len()];
        for ((drow, prow), grow) in data
            .chunks_mut(cols)
            .zip(out.data().chunks(cols))
            .zip(grad_out.data().chunks(cols))
        {
            let dot: f64 = prow.iter().zip(grow).map(|(&p, &g)| p * g).sum();
            for ((d, &p), &g) in drow.iter_mut().zip(prow).zip(grow) {
                *d = p * (g - dot);
            }
        }
        Tensor::from_vec(out.shape(), data)
    }
}

/// Inverted dropout: zero with probability `rate`, scale survivors by
/// `1/(1-rate)`. Identity in inference mode.
#[derive(Debug, Clone)]
pub struct Dropout {
    pub rate: f64,
    mask: Option<Vec<f64>>,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::param("rate", format!("dropout rate must be in [0, 1), got {rate}")));
        }
        Ok(Self { rate, mask: None })
    }

    pub fn forward(&mut self, input: &Tensor, train: bool, rng: &mut SeededRng) -> Tensor {
        if !train {
            self.mask = None;
            return input.clone();
        }
        let keep = 1.0 / (1.0 - self.rate);
        let mask: Vec<f64> = (0..input.len())
            .map(|_| if rng.uniform() < self.rate { 0.0 } else { keep })
            .collect();
        let data = input.data().iter().zip(&mask).map(|(&x, &m)| x * m).collect();
        self.mask = Some(mask);
        Tensor::from_vec(input.shape(), data).expect("same shape")
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        match &self.mask {
            Some(mask) => {
                let data = grad_out.data().iter().zip(mask).map(|(&g, &m)| g * m).collect();
                Tensor::from_vec(grad_out.shape(), data)
            }
            // Inference mode: identity.
            None => Ok(grad_out.clone()),
        }
    }
}

/// Nearest-neighbour upsampling along the time axis.
#[derive(Debug, Clone)]
pub struct Upsample1d {
    pub factor: usize,
    in_len: Option<usize>,
}

impl Upsample1d {
    pub fn new(factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::param("factor", "upsample factor must be >= 1".to_string()));
        }
        Ok(Self { factor, in_len: None })
    }

    pub fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        if input.rank() != 3 {
            return Err(Error::dim("upsample1d", format!("expected [B x C x T], got {:?}", input.shape())));
        }
        let (b, c, t) = (input.dim(0), input.dim(1), input.dim(2));
        let f = self.factor;
        let mut out = vec![0.0; b * c * t * f];
        for (src, dst) in input.data().chunks(t).zip(out.chunks_mut(t * f)) {
            for (i, &v) in src.iter().enumerate() {
                for slot in &mut dst[i * f..(i + 1) * f] {
                    *slot = v;
                }
            }
        }
        self.in_len = Some(t);
        Tensor::from_vec(&[b, c, t * f], out)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let t = self.in_len.ok_or_else(|| Error::dim("upsample1d", "backward before forward"))?;
        let (b, c) = (grad_out.dim(0), grad_out.dim(1));
        let f = self.factor;
        if grad_out.dim(2) != t * f {
            return Err(Error::dim("upsample1d", format!("grad time axis {} != {}", grad_out.dim(2), t * f)));
        }
        let mut dx = vec![0.0; b * c * t];
        for (gsrc, ddst) in grad_out.data().chunks(t * f).zip(dx.chunks_mut(t)) {
            for (i, slot) in ddst.iter_mut().enumerate() {
                *slot = gsrc[i * f..(i + 1) * f].iter().sum();
            }
        }
        Tensor::from_vec(&[b, c, t], dx)
    }
}
