//! Conditional GAN: class-conditioned synthesis of 9 x 300 reaching trials.
//!
//! Training alternates one discriminator step (binary cross-entropy on
//! real-vs-synthetic with one-sided label smoothing) with one generator step
//! minimizing `-log D(fake) + lambda * spectral_loss`. Once trained, the
//! generator's output is passed through the 2 Hz zero-phase lowpass before
//! leaving the module.

mod nets;
mod spectral;

pub use nets::{Discriminator, Generator, MinibatchDiscrimination, GEN_BASE_CHANNELS, GEN_BASE_STEPS, LEAKY_SLOPE};
pub use spectral::{spectral_loss, SpectralMode};

use crate::data::{ChannelScaler, Dataset, Impairment, LabelMode, Provenance, Task, Trial, SYNTHETIC_SUBJECT};
use crate::error::{Error, Result};
use crate::numerics::{adam_step, binary_cross_entropy, AdamConfig, Tensor};
use crate::rng::SeededRng;
use crate::signal::{high_frequency_power_ratio, lowpass_filter};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Cutoff of the post-generation lowpass filter, in Hz.
pub const POST_FILTER_HZ: f64 = 2.0;

/// Everything tunable about the cGAN. All sizes refer to the standardized
/// 9 x 300 signal space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanConfig {
    /// Number of condition classes (task x impairment pairs present).
    pub n_classes: usize,
    pub noise_dim: usize,
    /// Conv widths after the first and second upsampling stage.
    pub gen_filters: (usize, usize),
    pub gen_kernel: usize,
    pub disc_filters: (usize, usize),
    pub disc_kernels: (usize, usize),
    pub disc_pools: (usize, usize),
    /// Width of the dense feature layer feeding minibatch discrimination.
    pub feature_dim: usize,
    /// Number of minibatch-discrimination kernels appended to the features.
    pub mb_kernels: usize,
    /// Dimension of each minibatch-discrimination kernel.
    pub mb_kernel_dim: usize,
    /// Weight of the spectral loss in the generator objective.
    pub lambda_spec: f64,
    pub spectral_mode: SpectralMode,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_gen: f64,
    pub lr_disc: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Target for real samples in the discriminator loss (one-sided
    /// label smoothing).
    pub real_label: f64,
    /// Standardize channels before training and invert at generation.
    pub standardize: bool,
    pub seed: u64,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            n_classes: 30,
            noise_dim: 64,
            gen_filters: (64, 32),
            gen_kernel: 5,
            disc_filters: (32, 64),
            disc_kernels: (7, 5),
            disc_pools: (2, 2),
            feature_dim: 64,
            mb_kernels: 16,
            mb_kernel_dim: 8,
            lambda_spec: 1.0,
            spectral_mode: SpectralMode::BatchMean,
            batch_size: 32,
            epochs: 2000,
            lr_gen: 2e-4,
            lr_disc: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            real_label: 0.9,
            standardize: true,
            seed: 0,
        }
    }
}

impl GanConfig {
    /// Scaled-down configuration for the three-class toy fixture; trains in
    /// seconds rather than hours.
    pub fn toy() -> Self {
        Self {
            n_classes: 3,
            noise_dim: 32,
            gen_filters: (24, 16),
            gen_kernel: 5,
            disc_filters: (12, 24),
            disc_kernels: (7, 5),
            disc_pools: (2, 2),
            feature_dim: 32,
            mb_kernels: 8,
            mb_kernel_dim: 4,
            epochs: 400,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_classes", self.n_classes),
            ("noise_dim", self.noise_dim),
            ("gen_filters.0", self.gen_filters.0),
            ("gen_filters.1", self.gen_filters.1),
            ("gen_kernel", self.gen_kernel),
            ("disc_filters.0", self.disc_filters.0),
            ("disc_filters.1", self.disc_filters.1),
            ("disc_kernels.0", self.disc_kernels.0),
            ("disc_kernels.1", self.disc_kernels.1),
            ("disc_pools.0", self.disc_pools.0),
            ("disc_pools.1", self.disc_pools.1),
            ("feature_dim", self.feature_dim),
            ("mb_kernels", self.mb_kernels),
            ("mb_kernel_dim", self.mb_kernel_dim),
            ("batch_size", self.batch_size),
        ] {
            if v == 0 {
                return Err(Error::param("gan_config", format!("{name} must be positive")));
            }
        }
        if self.lambda_spec < 0.0 {
            return Err(Error::param("lambda_spec", format!("{}", self.lambda_spec)));
        }
        if !(0.0..=1.0).contains(&self.real_label) {
            return Err(Error::param("real_label", format!("{}", self.real_label)));
        }
        if Generator::output_len() % (self.disc_pools.0 * self.disc_pools.1) != 0 {
            return Err(Error::param(
                "disc_pools",
                format!("pool sizes {:?} must divide {}", self.disc_pools, Generator::output_len()),
            ));
        }
        Ok(())
    }

    fn adam_gen(&self) -> AdamConfig {
        AdamConfig { lr: self.lr_gen, beta1: self.beta1, beta2: self.beta2, eps: 1e-8 }
    }

    fn adam_disc(&self) -> AdamConfig {
        AdamConfig { lr: self.lr_disc, beta1: self.beta1, beta2: self.beta2, eps: 1e-8 }
    }
}

/// One-hot encode class indices as `[B x n_classes]`.
pub fn one_hot(labels: &[usize], n_classes: usize) -> Result<Tensor> {
    let mut data = vec![0.0; labels.len() * n_classes];
    for (i, &c) in labels.iter().enumerate() {
        if c >= n_classes {
            return Err(Error::Index(format!("class {c} out of range for {n_classes} classes")));
        }
        data[i * n_classes + c] = 1.0;
    }
    Tensor::from_vec(&[labels.len(), n_classes], data)
}

/// Per-epoch training diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub d_loss: f64,
    pub g_adv_loss: f64,
    pub g_spec_loss: f64,
    pub d_real_mean: f64,
    pub d_fake_mean: f64,
    /// Mean high-frequency power ratio of the fixed probe batch, unfiltered.
    pub probe_hf_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochStats>,
}

/// A trained conditional GAN with everything needed to generate labelled
/// trials: both networks, the channel scaler, the config snapshot, and the
/// condition vocabulary.
#[derive(Debug, Clone)]
pub struct GanModel {
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub scaler: ChannelScaler,
    pub config: GanConfig,
    pub conditions: Vec<(Task, Impairment)>,
}

#[derive(Serialize, Deserialize)]
struct GanSidecar {
    schema_version: u32,
    config: GanConfig,
    scaler: ChannelScaler,
    conditions: Vec<(Task, Impairment)>,
}

impl GanModel {
    /// Write the parameter container and its JSON sidecar.
    pub fn save(&self, container: &Path, sidecar: &Path) -> Result<()> {
        let mut named = self.generator.named_values();
        named.extend(self.discriminator.named_values());
        crate::numerics::persist::save_tensors(container, &named)?;
        let side = GanSidecar {
            schema_version: 1,
            config: self.config.clone(),
            scaler: self.scaler.clone(),
            conditions: self.conditions.clone(),
        };
        std::fs::write(sidecar, serde_json::to_vec_pretty(&side)?)?;
        Ok(())
    }

    pub fn load(container: &Path, sidecar: &Path) -> Result<Self> {
        let side: GanSidecar = serde_json::from_slice(&std::fs::read(sidecar)?)?;
        if side.schema_version != 1 {
            return Err(Error::ModelFile(format!("unsupported schema_version {}", side.schema_version)));
        }
        let tensors = crate::numerics::persist::load_tensors(container)?;
        let mut rng = SeededRng::new(0);
        let mut generator = Generator::build(&side.config, &mut rng)?;
        generator.load_named(&tensors)?;
        let mut discriminator = Discriminator::build(&side.config, &mut rng)?;
        discriminator.load_named(&tensors)?;
        Ok(Self {
            generator,
            discriminator,
            scaler: side.scaler,
            config: side.config,
            conditions: side.conditions,
        })
    }

    pub fn class_index(&self, task: Task, impairment: Impairment) -> Option<usize> {
        self.conditions.iter().position(|&c| c == (task, impairment))
    }
}

fn stats_snapshot(name: &str, t: &Tensor) -> String {
    let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for &v in t.data() {
        lo = lo.min(v);
        hi = hi.max(v);
        sum += v;
    }
    format!("{name}[min={lo:.4e}, max={hi:.4e}, mean={:.4e}]", sum / t.len().max(1) as f64)
}

/// Train the conditional GAN on a preprocessed dataset. Deterministic for a
/// fixed `config.seed`.
pub fn train(dataset: &Dataset, config: &GanConfig) -> Result<(GanModel, TrainLog)> {
    config.validate()?;
    let conditions = dataset.vocab().conditions().to_vec();
    if conditions.len() != config.n_classes {
        return Err(Error::param(
            "n_classes",
            format!("config expects {} classes but dataset has {}", config.n_classes, conditions.len()),
        ));
    }
    let counts = dataset.condition_counts();
    if let Some(missing) = counts.iter().position(|&c| c == 0) {
        let (task, imp) = conditions[missing];
        return Err(Error::param("dataset", format!("condition class {task}/{imp} has no trials")));
    }
    if dataset.len() < 2 {
        return Err(Error::param("dataset", "need at least 2 trials to train".to_string()));
    }

    let scaler = if config.standardize { ChannelScaler::fit(dataset.trials()) } else { ChannelScaler::identity() };
    let signals: Vec<Tensor> = dataset.trials().iter().map(|t| scaler.apply(&t.signal)).collect();
    let labels = dataset.labels(LabelMode::Condition);

    let master = SeededRng::new(config.seed);
    let mut rng_init = master.fork(1);
    let mut rng_shuffle = master.fork(2);
    let mut rng_noise = master.fork(3);
    let mut rng_probe = master.fork(4);

    let mut generator = Generator::build(config, &mut rng_init)?;
    let mut discriminator = Discriminator::build(config, &mut rng_init)?;

    // Fixed probe batch: two samples per class, reused every epoch to track
    // the high-frequency power of raw (unfiltered) generations.
    let probe_classes: Vec<usize> = (0..config.n_classes).flat_map(|c| [c, c]).collect();
    let probe_noise = Tensor::from_vec(
        &[probe_classes.len(), config.noise_dim],
        (0..probe_classes.len() * config.noise_dim).map(|_| rng_probe.normal()).collect(),
    )?;
    let probe_onehot = one_hot(&probe_classes, config.n_classes)?;

    let adam_g = config.adam_gen();
    let adam_d = config.adam_disc();
    let mut t_gen = 0u64;
    let mut t_disc = 0u64;
    let mut log = TrainLog::default();

    let batch_tensor = |indices: &[usize]| -> Result<(Tensor, Tensor)> {
        let mut data = Vec::with_capacity(indices.len() * signals[0].len());
        for &i in indices {
            data.extend_from_slice(signals[i].data());
        }
        let shape = [indices.len(), crate::data::CHANNELS, crate::data::SAMPLES];
        let x = Tensor::from_vec(&shape, data)?;
        let y = one_hot(&indices.iter().map(|&i| labels[i]).collect::<Vec<_>>(), config.n_classes)?;
        Ok((x, y))
    };

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        rng_shuffle.shuffle(&mut order);

        let mut sums = (0.0, 0.0, 0.0, 0.0, 0.0); // d_loss, g_adv, g_spec, d_real, d_fake
        let mut n_batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            if chunk.len() < 2 {
                // Minibatch discrimination is undefined on singleton batches.
                continue;
            }
            let (real, onehot) = batch_tensor(chunk)?;
            let b = chunk.len();

            // Discriminator step: real against smoothed label, fresh fakes
            // against zero.
            discriminator.zero_grad();
            let noise = Tensor::from_vec(
                &[b, config.noise_dim],
                (0..b * config.noise_dim).map(|_| rng_noise.normal()).collect(),
            )?;
            let fake = generator.forward(&noise, &onehot)?;

            let d_real = discriminator.forward(&real, &onehot)?;
            let (loss_real, grad_real) = binary_cross_entropy(&d_real, &Tensor::filled(&[b, 1], config.real_label))?;
            discriminator.backward(&grad_real)?;
            let d_fake = discriminator.forward(&fake, &onehot)?;
            let (loss_fake, grad_fake) = binary_cross_entropy(&d_fake, &Tensor::filled(&[b, 1], 0.0))?;
            discriminator.backward(&grad_fake)?;
            let d_loss = 0.5 * (loss_real + loss_fake);
            if !d_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    context: format!("epoch {epoch}, discriminator step"),
                    detail: format!(
                        "d_loss={d_loss}; {}; {}; {}",
                        stats_snapshot("real", &real),
                        stats_snapshot("fake", &fake),
                        stats_snapshot("d_real", &d_real)
                    ),
                });
            }
            t_disc += 1;
            adam_step(&mut discriminator.params_mut(), &adam_d, t_disc)?;

            // Generator step: non-saturating adversarial loss plus the
            // spectral penalty, both through fresh fakes.
            generator.zero_grad();
            discriminator.zero_grad(); // gradients through D are discarded
            let noise2 = Tensor::from_vec(
                &[b, config.noise_dim],
                (0..b * config.noise_dim).map(|_| rng_noise.normal()).collect(),
            )?;
            let fake2 = generator.forward(&noise2, &onehot)?;
            let d_out = discriminator.forward(&fake2, &onehot)?;
            let (g_adv, grad_adv) = binary_cross_entropy(&d_out, &Tensor::filled(&[b, 1], 1.0))?;
            let mut grad_signal = discriminator.backward(&grad_adv)?;
            let g_spec = if config.lambda_spec > 0.0 {
                let (spec, grad_spec) = spectral_loss(&real, &fake2, config.spectral_mode)?;
                for (g, &s) in grad_signal.data_mut().iter_mut().zip(grad_spec.data()) {
                    *g += config.lambda_spec * s;
                }
                spec
            } else {
                0.0
            };
            if !(g_adv.is_finite() && g_spec.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    context: format!("epoch {epoch}, generator step"),
                    detail: format!(
                        "g_adv={g_adv}, g_spec={g_spec}; {}; {}",
                        stats_snapshot("fake", &fake2),
                        stats_snapshot("d_out", &d_out)
                    ),
                });
            }
            generator.backward(&grad_signal)?;
            discriminator.zero_grad();
            t_gen += 1;
            adam_step(&mut generator.params_mut(), &adam_g, t_gen)?;

            sums.0 += d_loss;
            sums.1 += g_adv;
            sums.2 += g_spec;
            sums.3 += d_real.data().iter().sum::<f64>() / b as f64;
            sums.4 += d_fake.data().iter().sum::<f64>() / b as f64;
            n_batches += 1;
        }
        if n_batches == 0 {
            return Err(Error::param("batch_size", "no usable batches (all smaller than 2)".to_string()));
        }

        // Probe: raw generator output mapped back to data units, no filter.
        let probe_out = generator.forward(&probe_noise, &probe_onehot)?;
        let mut hf_sum = 0.0;
        let sample_len = crate::data::CHANNELS * crate::data::SAMPLES;
        for s in 0..probe_classes.len() {
            let sig = Tensor::from_vec(
                &[crate::data::CHANNELS, crate::data::SAMPLES],
                probe_out.data()[s * sample_len..(s + 1) * sample_len].to_vec(),
            )?;
            let raw = scaler.invert(&sig);
            hf_sum += high_frequency_power_ratio(&raw, crate::data::SAMPLE_RATE, POST_FILTER_HZ)?;
        }
        let nb = n_batches as f64;
        log.epochs.push(EpochStats {
            epoch,
            d_loss: sums.0 / nb,
            g_adv_loss: sums.1 / nb,
            g_spec_loss: sums.2 / nb,
            d_real_mean: sums.3 / nb,
            d_fake_mean: sums.4 / nb,
            probe_hf_ratio: hf_sum / probe_classes.len() as f64,
        });
    }

    let model = GanModel { generator, discriminator, scaler, config: config.clone(), conditions };
    Ok((model, log))
}

/// Draw `n` class-conditioned trials. Noise for sample `i` comes from an
/// independent stream derived from `(seed, i)`, so any subset of samples is
/// reproducible in isolation.
pub fn generate(model: &GanModel, class_index: usize, n: usize, seed: u64, apply_filter: bool) -> Result<Vec<Trial>> {
    let (task, impairment) = model
        .conditions
        .get(class_index)
        .copied()
        .ok_or_else(|| Error::Index(format!("class {class_index} out of range for {} conditions", model.conditions.len())))?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let noise_dim = model.config.noise_dim;
    let base = SeededRng::new(seed);
    let mut noise = Vec::with_capacity(n * noise_dim);
    for i in 0..n {
        let mut stream = base.fork(i as u64);
        noise.extend((0..noise_dim).map(|_| stream.normal()));
    }
    let noise = Tensor::from_vec(&[n, noise_dim], noise)?;
    let onehot = one_hot(&vec![class_index; n], model.config.n_classes)?;
    let mut generator = model.generator.clone();
    let out = generator.forward(&noise, &onehot)?;
    let sample_len = crate::data::CHANNELS * crate::data::SAMPLES;
    let mut trials = Vec::with_capacity(n);
    for s in 0..n {
        let sig = Tensor::from_vec(
            &[crate::data::CHANNELS, crate::data::SAMPLES],
            out.data()[s * sample_len..(s + 1) * sample_len].to_vec(),
        )?;
        let mut raw = model.scaler.invert(&sig);
        if apply_filter {
            raw = lowpass_filter(&raw, crate::data::SAMPLE_RATE, POST_FILTER_HZ)?;
        }
        trials.push(Trial::new(
            SYNTHETIC_SUBJECT,
            task,
            impairment.representative_fmma(),
            raw,
            Provenance::Synthetic,
        )?);
    }
    Ok(trials)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_basics() {
        let t = one_hot(&[0, 2], 3).unwrap();
        assert_eq!(t.data(), &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(one_hot(&[3], 3).is_err());
    }

    #[test]
    fn generator_output_shape_and_determinism() {
        let cfg = GanConfig::toy();
        let mut rng = SeededRng::new(5);
        let mut gen = Generator::build(&cfg, &mut rng).unwrap();
        let noise = Tensor::filled(&[2, cfg.noise_dim], 0.3);
        let onehot = one_hot(&[0, 2], cfg.n_classes).unwrap();
        let a = gen.forward(&noise, &onehot).unwrap();
        assert_eq!(a.shape(), &[2, 9, 300]);
        let b = gen.forward(&noise, &onehot).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn discriminator_output_in_unit_interval() {
        let cfg = GanConfig::toy();
        let mut rng = SeededRng::new(6);
        let mut disc = Discriminator::build(&cfg, &mut rng).unwrap();
        let mut data_rng = SeededRng::new(7);
        let x = Tensor::from_vec(&[4, 9, 300], (0..4 * 9 * 300).map(|_| data_rng.normal()).collect()).unwrap();
        let onehot = one_hot(&[0, 1, 2, 0], cfg.n_classes).unwrap();
        let out = disc.forward(&x, &onehot).unwrap();
        assert_eq!(out.shape(), &[4, 1]);
        for &v in out.data() {
            assert!(v > 0.0 && v < 1.0);
        }
    }

    #[test]
    fn untrained_discriminator_bce_near_ln2() {
        // Averaged over seeds, an untrained D on a balanced batch should sit
        // near maximal uncertainty.
        let cfg = GanConfig::toy();
        let mut total = 0.0;
        for seed in 0..10 {
            let mut rng = SeededRng::new(seed);
            let mut disc = Discriminator::build(&cfg, &mut rng).unwrap();
            let mut data_rng = SeededRng::new(100 + seed);
            let x = Tensor::from_vec(&[8, 9, 300], (0..8 * 9 * 300).map(|_| data_rng.normal()).collect()).unwrap();
            let onehot = one_hot(&[0, 1, 2, 0, 1, 2, 0, 1], cfg.n_classes).unwrap();
            let out = disc.forward(&x, &onehot).unwrap();
            let target = Tensor::from_vec(&[8, 1], vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
            let (loss, _) = binary_cross_entropy(&out, &target).unwrap();
            total += loss;
        }
        let mean = total / 10.0;
        assert!((mean - 2f64.ln()).abs() < 0.2, "mean BCE {mean}");
    }

    #[test]
    fn minibatch_discrimination_identical_rows_give_unit_stat() {
        let mut rng = SeededRng::new(11);
        let mut mbd = MinibatchDiscrimination::new(4, 3, 2, &mut rng);
        let f = Tensor::from_vec(&[2, 4], vec![0.5, -1.0, 2.0, 0.1, 0.5, -1.0, 2.0, 0.1]).unwrap();
        let out = mbd.forward(&f).unwrap();
        assert_eq!(out.shape(), &[2, 7]);
        for i in 0..2 {
            for kb in 0..3 {
                assert!((out.data()[i * 7 + 4 + kb] - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn minibatch_discrimination_batch_of_one_rejected() {
        let mut rng = SeededRng::new(12);
        let mut mbd = MinibatchDiscrimination::new(4, 3, 2, &mut rng);
        let f = Tensor::filled(&[1, 4], 1.0);
        assert!(mbd.forward(&f).is_err());
    }

    #[test]
    fn minibatch_discrimination_is_permutation_equivariant() {
        let mut rng = SeededRng::new(13);
        let mut mbd = MinibatchDiscrimination::new(3, 2, 2, &mut rng);
        let mut data_rng = SeededRng::new(14);
        let rows: Vec<Vec<f64>> = (0..4).map(|_| (0..3).map(|_| data_rng.normal()).collect()).collect();
        let f = Tensor::from_vec(&[4, 3], rows.concat()).unwrap();
        let out = mbd.forward(&f).unwrap();
        // Reverse the batch and compare row-for-row.
        let rev: Vec<f64> = rows.iter().rev().flatten().copied().collect();
        let out_rev = mbd.forward(&Tensor::from_vec(&[4, 3], rev).unwrap()).unwrap();
        for i in 0..4 {
            let a = &out.data()[i * 5..(i + 1) * 5];
            let b = &out_rev.data()[(3 - i) * 5..(4 - i) * 5];
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn minibatch_discrimination_matches_double_loop_oracle() {
        let mut rng = SeededRng::new(15);
        let (a_dim, bk, c) = (5, 4, 3);
        let mut mbd = MinibatchDiscrimination::new(a_dim, bk, c, &mut rng);
        let mut data_rng = SeededRng::new(16);
        let b = 6;
        let f: Vec<f64> = (0..b * a_dim).map(|_| data_rng.normal()).collect();
        let out = mbd.forward(&Tensor::from_vec(&[b, a_dim], f.clone()).unwrap()).unwrap();
        // Brute-force recomputation.
        let t = mbd.t.value.data();
        let mut m = vec![0.0; b * bk * c];
        for i in 0..b {
            for col in 0..bk * c {
                for ai in 0..a_dim {
                    m[i * bk * c + col] += f[i * a_dim + ai] * t[ai * bk * c + col];
                }
            }
        }
        for i in 0..b {
            for ai in 0..a_dim {
                assert!((out.data()[i * (a_dim + bk) + ai] - f[i * a_dim + ai]).abs() < 1e-12);
            }
            for kb in 0..bk {
                let mut o = 0.0;
                for j in 0..b {
                    if i == j {
                        continue;
                    }
                    let mut l1 = 0.0;
                    for ci in 0..c {
                        l1 += (m[i * bk * c + kb * c + ci] - m[j * bk * c + kb * c + ci]).abs();
                    }
                    o += (-l1).exp();
                }
                assert!((out.data()[i * (a_dim + bk) + a_dim + kb] - o).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn parameter_counts_match_closed_form() {
        let cfg = GanConfig::toy();
        let mut rng = SeededRng::new(17);
        let mut gen = Generator::build(&cfg, &mut rng).unwrap();
        let (f1, f2) = cfg.gen_filters;
        let k = cfg.gen_kernel;
        let dense = (cfg.noise_dim + cfg.n_classes) * 225 + 225;
        let conv1 = f1 * 9 * k + f1;
        let conv2 = f2 * f1 * k + f2;
        let conv_out = 9 * f2 * k + 9;
        assert_eq!(gen.param_count(), dense + conv1 + conv2 + conv_out);

        let mut disc = Discriminator::build(&cfg, &mut rng).unwrap();
        let (d1, d2) = cfg.disc_filters;
        let (k1, k2) = cfg.disc_kernels;
        let t_flat = 300 / cfg.disc_pools.0 / cfg.disc_pools.1;
        let dconv1 = d1 * (9 + cfg.n_classes) * k1 + d1;
        let dconv2 = d2 * d1 * k2 + d2;
        let feature = d2 * t_flat * cfg.feature_dim + cfg.feature_dim;
        let mbd = cfg.feature_dim * cfg.mb_kernels * cfg.mb_kernel_dim;
        let out = (cfg.feature_dim + cfg.mb_kernels) + 1;
        assert_eq!(disc.param_count(), dconv1 + dconv2 + feature + mbd + out);
    }

    #[test]
    fn generate_empty_and_bad_class() {
        let cfg = GanConfig::toy();
        let mut rng = SeededRng::new(18);
        let model = GanModel {
            generator: Generator::build(&cfg, &mut rng).unwrap(),
            discriminator: Discriminator::build(&cfg, &mut rng).unwrap(),
            scaler: ChannelScaler::identity(),
            config: cfg,
            conditions: vec![
                (Task::T16, Impairment::Control),
                (Task::T16, Impairment::Mild),
                (Task::T16, Impairment::ModerateSevere),
            ],
        };
        assert!(generate(&model, 0, 0, 1, true).unwrap().is_empty());
        assert!(matches!(generate(&model, 3, 1, 1, true), Err(Error::Index(_))));
        let trials = generate(&model, 1, 3, 9, true).unwrap();
        assert_eq!(trials.len(), 3);
        for t in &trials {
            assert_eq!(t.signal.shape(), &[9, 300]);
            assert!(t.signal.all_finite());
            assert_eq!(t.subject_id, SYNTHETIC_SUBJECT);
            assert_eq!(t.task, Task::T16);
            assert_eq!(t.impairment, Impairment::Mild);
            assert!(matches!(t.provenance, Provenance::Synthetic));
        }
    }

    #[test]
    fn generation_is_deterministic_per_seed_and_sample() {
        let cfg = GanConfig::toy();
        let mut rng = SeededRng::new(19);
        let model = GanModel {
            generator: Generator::build(&cfg, &mut rng).unwrap(),
            discriminator: Discriminator::build(&cfg, &mut rng).unwrap(),
            scaler: ChannelScaler::identity(),
            config: cfg,
            conditions: vec![(Task::T02, Impairment::Control)],
        };
        let a = generate(&model, 0, 4, 42, false).unwrap();
        let b = generate(&model, 0, 4, 42, false).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.signal, y.signal);
        }
        // Prefixes agree: sample i depends only on (seed, i).
        let c = generate(&model, 0, 2, 42, false).unwrap();
        assert_eq!(a[0].signal, c[0].signal);
        assert_eq!(a[1].signal, c[1].signal);
        let d = generate(&model, 0, 4, 43, false).unwrap();
        assert_ne!(a[0].signal, d[0].signal);
    }
}
