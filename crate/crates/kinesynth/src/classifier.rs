//! The fully convolutional task classifier: conv-pool-conv-pool, a dense
//! layer with dropout, and a softmax head.

use crate::data::{Dataset, LabelMode, Trial, CHANNELS, SAMPLES};
use crate::error::{Error, Result};
use crate::numerics::{
    adam_step, sparse_categorical_cross_entropy, AdamConfig, Conv1d, Dense, Dropout, MaxPool1d, Padding, Parameter,
    Relu, Softmax, Tensor,
};
use crate::rng::SeededRng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Classifier hyperparameters. The layer sequence is fixed; every size is
/// tunable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcnConfig {
    pub n_classes: usize,
    pub conv1_filters: usize,
    pub conv1_kernel: usize,
    pub pool1: usize,
    pub conv2_filters: usize,
    pub conv2_kernel: usize,
    pub pool2: usize,
    pub dense_width: usize,
    pub dropout: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for FcnConfig {
    fn default() -> Self {
        Self {
            n_classes: 10,
            conv1_filters: 32,
            conv1_kernel: 7,
            pool1: 2,
            conv2_filters: 64,
            conv2_kernel: 5,
            pool2: 2,
            dense_width: 128,
            dropout: 0.5,
            lr: 1e-3,
            batch_size: 32,
            epochs: 120,
            seed: 0,
        }
    }
}

impl FcnConfig {
    /// Scaled-down settings for the three-class toy fixture.
    pub fn toy() -> Self {
        Self {
            n_classes: 3,
            conv1_filters: 12,
            conv1_kernel: 7,
            pool1: 2,
            conv2_filters: 24,
            conv2_kernel: 5,
            pool2: 2,
            dense_width: 48,
            epochs: 40,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_classes", self.n_classes),
            ("conv1_filters", self.conv1_filters),
            ("conv1_kernel", self.conv1_kernel),
            ("pool1", self.pool1),
            ("conv2_filters", self.conv2_filters),
            ("conv2_kernel", self.conv2_kernel),
            ("pool2", self.pool2),
            ("dense_width", self.dense_width),
            ("batch_size", self.batch_size),
        ] {
            if v == 0 {
                return Err(Error::param("fcn_config", format!("{name} must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::param("dropout", format!("{}", self.dropout)));
        }
        Ok(())
    }

    fn flat_dims(&self) -> (usize, usize) {
        (self.conv2_filters, SAMPLES / self.pool1 / self.pool2)
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, ..AdamConfig::default() }
    }
}

/// The classifier network with its config snapshot.
#[derive(Debug, Clone)]
pub struct Fcn {
    pub config: FcnConfig,
    conv1: Conv1d,
    relu1: Relu,
    pool1: MaxPool1d,
    conv2: Conv1d,
    relu2: Relu,
    pool2: MaxPool1d,
    dense1: Dense,
    relu3: Relu,
    dropout: Dropout,
    dense2: Dense,
    softmax: Softmax,
    batch: usize,
}

impl Fcn {
    pub fn build(config: &FcnConfig, rng: &mut SeededRng) -> Result<Self> {
        config.validate()?;
        let (fc, ft) = config.flat_dims();
        Ok(Self {
            config: config.clone(),
            conv1: Conv1d::new(CHANNELS, config.conv1_filters, config.conv1_kernel, Padding::Same, rng),
            relu1: Relu::new(),
            pool1: MaxPool1d::new(config.pool1)?,
            conv2: Conv1d::new(config.conv1_filters, config.conv2_filters, config.conv2_kernel, Padding::Same, rng),
            relu2: Relu::new(),
            pool2: MaxPool1d::new(config.pool2)?,
            dense1: Dense::new(fc * ft, config.dense_width, rng),
            relu3: Relu::new(),
            dropout: Dropout::new(config.dropout)?,
            dense2: Dense::new(config.dense_width, config.n_classes, rng),
            softmax: Softmax::new(),
            batch: 0,
        })
    }

    /// `[B x 9 x 300]` to class probabilities `[B x n_classes]`.
    pub fn forward(&mut self, input: &Tensor, train: bool, rng: &mut SeededRng) -> Result<Tensor> {
        if input.rank() != 3 || input.dim(1) != CHANNELS || input.dim(2) != SAMPLES {
            return Err(Error::dim(
                "fcn",
                format!("input {:?}, expected [B x {CHANNELS} x {SAMPLES}]", input.shape()),
            ));
        }
        self.batch = input.dim(0);
        let x = self.pool1.forward(&self.relu1.forward(&self.conv1.forward(input)?))?;
        let x = self.pool2.forward(&self.relu2.forward(&self.conv2.forward(&x)?))?;
        let (fc, ft) = self.config.flat_dims();
        let x = x.reshape(&[self.batch, fc * ft])?;
        let x = self.relu3.forward(&self.dense1.forward(&x)?);
        let x = self.dropout.forward(&x, train, rng);
        let x = self.dense2.forward(&x)?;
        self.softmax.forward(&x)
    }

    /// Accumulate parameter gradients from dL/d(probabilities).
    pub fn backward(&mut self, grad_probs: &Tensor) -> Result<()> {
        let g = self.softmax.backward(grad_probs)?;
        let g = self.dense2.backward(&g)?;
        let g = self.dropout.backward(&g)?;
        let g = self.dense1.backward(&self.relu3.backward(&g)?)?;
        let (fc, ft) = self.config.flat_dims();
        let g = g.reshape(&[self.batch, fc, ft])?;
        let g = self.conv2.backward(&self.relu2.backward(&self.pool2.backward(&g)?)?)?;
        self.conv1.backward(&self.relu1.backward(&self.pool1.backward(&g)?)?)?;
        Ok(())
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![
            &mut self.conv1.kernels,
            &mut self.conv1.bias,
            &mut self.conv2.kernels,
            &mut self.conv2.bias,
            &mut self.dense1.weights,
            &mut self.dense1.bias,
            &mut self.dense2.weights,
            &mut self.dense2.bias,
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
            ("fcn.conv1.k".to_string(), &self.conv1.kernels.value),
            ("fcn.conv1.b".to_string(), &self.conv1.bias.value),
            ("fcn.conv2.k".to_string(), &self.conv2.kernels.value),
            ("fcn.conv2.b".to_string(), &self.conv2.bias.value),
            ("fcn.dense1.w".to_string(), &self.dense1.weights.value),
            ("fcn.dense1.b".to_string(), &self.dense1.bias.value),
            ("fcn.dense2.w".to_string(), &self.dense2.weights.value),
            ("fcn.dense2.b".to_string(), &self.dense2.bias.value),
        ]
    }

    pub fn load_named(&mut self, tensors: &[(String, Tensor)]) -> Result<()> {
        for name in [
            "fcn.conv1.k",
            "fcn.conv1.b",
            "fcn.conv2.k",
            "fcn.conv2.b",
            "fcn.dense1.w",
            "fcn.dense1.b",
            "fcn.dense2.w",
            "fcn.dense2.b",
        ] {
            let tensor = tensors
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, t)| t.clone())
                .ok_or_else(|| Error::ModelFile(format!("missing tensor '{name}'")))?;
            let slot = match name {
                "fcn.conv1.k" => &mut self.conv1.kernels,
                "fcn.conv1.b" => &mut self.conv1.bias,
                "fcn.conv2.k" => &mut self.conv2.kernels,
                "fcn.conv2.b" => &mut self.conv2.bias,
                "fcn.dense1.w" => &mut self.dense1.weights,
                "fcn.dense1.b" => &mut self.dense1.bias,
                "fcn.dense2.w" => &mut self.dense2.weights,
                "fcn.dense2.b" => &mut self.dense2.bias,
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

    pub fn save(&self, container: &Path, sidecar: &Path) -> Result<()> {
        crate::numerics::persist::save_tensors(container, &self.named_values())?;
        #[derive(Serialize)]
        struct Sidecar<'a> {
            schema_version: u32,
            config: &'a FcnConfig,
        }
        std::fs::write(sidecar, serde_json::to_vec_pretty(&Sidecar { schema_version: 1, config: &self.config })?)?;
        Ok(())
    }

    pub fn load(container: &Path, sidecar: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Sidecar {
            schema_version: u32,
            config: FcnConfig,
        }
        let side: Sidecar = serde_json::from_slice(&std::fs::read(sidecar)?)?;
        if side.schema_version != 1 {
            return Err(Error::ModelFile(format!("unsupported schema_version {}", side.schema_version)));
        }
        let mut fcn = Fcn::build(&side.config, &mut SeededRng::new(0))?;
        fcn.load_named(&crate::numerics::persist::load_tensors(container)?)?;
        Ok(fcn)
    }
}

/// Per-epoch training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClfEpochStats {
    pub epoch: usize,
    pub loss: f64,
    /// Fraction of training samples classified correctly during the epoch's
    /// forward passes (dropout active).
    pub accuracy: f64,
}

fn stack_signals(trials: &[Trial], indices: &[usize]) -> Tensor {
    let mut data = Vec::with_capacity(indices.len() * CHANNELS * SAMPLES);
    for &i in indices {
        data.extend_from_slice(trials[i].signal.data());
    }
    Tensor::from_vec(&[indices.len(), CHANNELS, SAMPLES], data).expect("uniform trial shapes")
}

/// Train an FCN with Adam and sparse categorical cross-entropy; shuffling
/// and dropout are seeded, so identical configs give identical parameters.
pub fn train_classifier(dataset: &Dataset, mode: LabelMode, config: &FcnConfig) -> Result<(Fcn, Vec<ClfEpochStats>)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::param("dataset", "training set is empty".to_string()));
    }
    if dataset.n_classes(mode) > config.n_classes {
        return Err(Error::param(
            "n_classes",
            format!("dataset has {} classes, config allows {}", dataset.n_classes(mode), config.n_classes),
        ));
    }
    let labels = dataset.labels(mode);
    let master = SeededRng::new(config.seed);
    let mut rng_init = master.fork(1);
    let mut rng_shuffle = master.fork(2);
    let mut rng_dropout = master.fork(3);

    let mut fcn = Fcn::build(config, &mut rng_init)?;
    let adam = config.adam();
    let mut t_step = 0u64;
    let mut log = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        rng_shuffle.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let x = stack_signals(dataset.trials(), chunk);
            let y: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            fcn.zero_grad();
            let probs = fcn.forward(&x, true, &mut rng_dropout)?;
            let (loss, grad) = sparse_categorical_cross_entropy(&probs, &y)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    context: format!("classifier epoch {epoch}"),
                    detail: format!("loss={loss} on batch of {}", chunk.len()),
                });
            }
            fcn.backward(&grad)?;
            t_step += 1;
            adam_step(&mut fcn.params_mut(), &adam, t_step)?;
            loss_sum += loss * chunk.len() as f64;
            for (bi, &label) in y.iter().enumerate() {
                if argmax_row(&probs, bi) == label {
                    correct += 1;
                }
            }
        }
        log.push(ClfEpochStats {
            epoch,
            loss: loss_sum / dataset.len() as f64,
            accuracy: correct as f64 / dataset.len() as f64,
        });
    }
    Ok((fcn, log))
}

/// First maximal index of row `bi`; ties break toward the lowest class.
fn argmax_row(probs: &Tensor, bi: usize) -> usize {
    let k = probs.dim(1);
    let row = &probs.data()[bi * k..(bi + 1) * k];
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Predicted class indices and probability rows for a set of trials.
/// Inference is pure: no dropout, no RNG, batch order irrelevant.
pub fn predict(fcn: &Fcn, trials: &[Trial]) -> Result<(Vec<usize>, Tensor)> {
    let mut probs = Vec::with_capacity(trials.len() * fcn.config.n_classes);
    let mut rng = SeededRng::new(0); // unused in inference mode
    let mut net = fcn.clone();
    let indices: Vec<usize> = (0..trials.len()).collect();
    for chunk in indices.chunks(64) {
        let x = stack_signals(trials, chunk);
        let p = net.forward(&x, false, &mut rng)?;
        probs.extend_from_slice(p.data());
    }
    let probs = Tensor::from_vec(&[trials.len(), fcn.config.n_classes], probs)?;
    let preds = (0..trials.len()).map(|i| argmax_row(&probs, i)).collect();
    Ok((preds, probs))
}
