//! One finite-difference check per differentiable operation. Each function
//! panics with a diagnostic on failure; the gradcheck and acceptance suites
//! both drive them.

use super::{fd_check, randn, weighted_sum, FD_EPS};
use kinesynth::cgan::{one_hot, spectral_loss, Discriminator, GanConfig, MinibatchDiscrimination, SpectralMode};
use kinesynth::classifier::{Fcn, FcnConfig};
use kinesynth::embed::{joint_affinities, kl_and_gradient};
use kinesynth::numerics::{
    binary_cross_entropy, sparse_categorical_cross_entropy, Conv1d, Dense, Dropout, LeakyRelu, MaxPool1d, Padding,
    Relu, Sigmoid, Softmax, Tensor, Upsample1d,
};
use kinesynth::rng::SeededRng;
use kinesynth::signal::{fft_real, fft_real_adjoint};
use num_complex::Complex64;

pub const TOL_FINE: f64 = 1e-6;
pub const TOL_SUITE: f64 = 1e-5;

/// FD-compare only the listed coordinates (for large inputs where a full
/// sweep would dominate the suite's runtime).
fn fd_check_subset<T>(
    subject: &mut T,
    slot: impl Fn(&mut T) -> &mut [f64],
    mut eval: impl FnMut(&mut T) -> f64,
    analytic: &[f64],
    indices: &[usize],
    tol: f64,
    label: &str,
) {
    for &i in indices {
        let orig = slot(subject)[i];
        slot(subject)[i] = orig + FD_EPS;
        let up = eval(subject);
        slot(subject)[i] = orig - FD_EPS;
        let down = eval(subject);
        slot(subject)[i] = orig;
        let numeric = (up - down) / (2.0 * FD_EPS);
        let err = super::rel_err(analytic[i], numeric);
        assert!(
            err < tol,
            "{label}[{i}]: analytic {} vs numeric {numeric}, rel err {err:.3e} (tol {tol:.1e})",
            analytic[i]
        );
    }
}

fn spread_indices(len: usize, count: usize) -> Vec<usize> {
    let step = (len / count.max(1)).max(1);
    (0..len).step_by(step).take(count).collect()
}

/// Dense layer: gradients w.r.t. input, weights, and bias (random 4x5 by
/// 5x3 case).
pub fn dense() {
    let mut rng = SeededRng::new(101);
    let layer = Dense::new(5, 3, &mut rng);
    let x = randn(&[4, 5], &mut rng);
    let c = randn(&[4, 3], &mut rng);

    let mut live = layer.clone();
    live.forward(&x).unwrap();
    let dx = live.backward(&c).unwrap();
    let dw = live.weights.grad.data().to_vec();
    let db = live.bias.grad.data().to_vec();

    struct Env {
        layer: Dense,
        x: Tensor,
    }
    let mut env = Env { layer, x };
    let c2 = c.clone();
    fd_check(
        &mut env,
        |e| e.layer.weights.value.data_mut(),
        move |e| weighted_sum(&e.layer.forward(&e.x).unwrap(), &c2),
        &dw,
        TOL_FINE,
        "dense dW",
    );
    let c2 = c.clone();
    fd_check(
        &mut env,
        |e| e.layer.bias.value.data_mut(),
        move |e| weighted_sum(&e.layer.forward(&e.x).unwrap(), &c2),
        &db,
        TOL_FINE,
        "dense db",
    );
    fd_check(
        &mut env,
        |e| e.x.data_mut(),
        move |e| weighted_sum(&e.layer.forward(&e.x).unwrap(), &c),
        dx.data(),
        TOL_FINE,
        "dense dX",
    );
}

/// Conv1d, both paddings: gradients w.r.t. input, kernels, bias
/// (random 2x3x16 by 4x3x5 case).
pub fn conv1d() {
    for padding in [Padding::Same, Padding::Valid] {
        let mut rng = SeededRng::new(102);
        let layer = Conv1d::new(3, 4, 5, padding, &mut rng);
        let x = randn(&[2, 3, 16], &mut rng);
        let t_out = layer.output_len(16).unwrap();
        let c = randn(&[2, 4, t_out], &mut rng);

        let mut live = layer.clone();
        live.forward(&x).unwrap();
        let dx = live.backward(&c).unwrap();
        let dk = live.kernels.grad.data().to_vec();
        let db = live.bias.grad.data().to_vec();

        struct Env {
            layer: Conv1d,
            x: Tensor,
        }
        let mut env = Env { layer, x };
        let c2 = c.clone();
        fd_check(
            &mut env,
            |e| e.layer.kernels.value.data_mut(),
            move |e| weighted_sum(&e.layer.forward(&e.x).unwrap(), &c2),
            &dk,
            TOL_FINE,
            "conv1d dK",
        );
        let c2 = c.clone();
        fd_check(
            &mut env,
            |e| e.layer.bias.value.data_mut(),
            move |e| weighted_sum(&e.layer.forward(&e.x).unwrap(), &c2),
            &db,
            TOL_FINE,
            "conv1d db",
        );
        fd_check(
            &mut env,
            |e| e.x.data_mut(),
            move |e| weighted_sum(&e.layer.forward(&e.x).unwrap(), &c),
            dx.data(),
            TOL_FINE,
            "conv1d dX",
        );
    }
}

/// Max-pool routing: gradient of sum(output) is 1 at window argmaxes, 0
/// elsewhere, and matches finite differences.
pub fn maxpool() {
    let mut rng = SeededRng::new(103);
    let mut pool = MaxPool1d::new(3).unwrap();
    let x = randn(&[2, 2, 13], &mut rng);
    let out = pool.forward(&x).unwrap();
    let ones = Tensor::filled(out.shape(), 1.0);
    let dx = pool.backward(&ones).unwrap();
    for &g in dx.data() {
        assert!(g == 0.0 || g == 1.0, "pool gradient must route, got {g}");
    }
    struct Env {
        pool: MaxPool1d,
        x: Tensor,
    }
    let mut env = Env { pool, x };
    fd_check(
        &mut env,
        |e| e.x.data_mut(),
        |e| e.pool.forward(&e.x).unwrap().data().iter().sum(),
        dx.data(),
        TOL_SUITE,
        "maxpool dX",
    );
}

/// Activations: relu, leaky relu, sigmoid, softmax, dropout (train mode with
/// a replayed mask), nearest-neighbour upsampling.
pub fn activations() {
    let mut rng = SeededRng::new(104);
    // Inputs away from the relu kink so central differences stay valid.
    let x = Tensor::from_vec(&[3, 7], (0..21).map(|i| (i as f64 * 0.7).sin() * 2.0 + 0.11).collect()).unwrap();
    let c = randn(&[3, 7], &mut rng);

    {
        let mut relu = Relu::new();
        relu.forward(&x);
        let dx = relu.backward(&c).unwrap();
        struct Env {
            layer: Relu,
            x: Tensor,
        }
        let mut env = Env { layer: relu, x: x.clone() };
        let c2 = c.clone();
        fd_check(
            &mut env,
            |e| e.x.data_mut(),
            move |e| weighted_sum(&e.layer.forward(&e.x), &c2),
            dx.data(),
            TOL_SUITE,
            "relu dX",
        );
    }
    {
        let mut leaky = LeakyRelu::new(0.2);
        leaky.forward(&x);
        let dx = leaky.backward(&c).unwrap();
        struct Env {
            layer: LeakyRelu,
            x: Tensor,
        }
        let mut env = Env { layer: leaky, x: x.clone() };
        let c2 = c.clone();
        fd_check(
            &mut env,
            |e| e.x.data_mut(),
            move |e| weighted_sum(&e.layer.forward(&e.x), &c2),
            dx.data(),
            TOL_SUITE,
            "leaky_relu dX",
        );
    }
    {
        let mut sig = Sigmoid::new();
        sig.forward(&x);
        let dx = sig.backward(&c).unwrap();
        struct Env {
            layer: Sigmoid,
            x: Tensor,
        }
        let mut env = Env { layer: sig, x: x.clone() };
        let c2 = c.clone();
        fd_check(
            &mut env,
            |e| e.x.data_mut(),
            move |e| weighted_sum(&e.layer.forward(&e.x), &c2),
            dx.data(),
            TOL_SUITE,
            "sigmoid dX",
        );
    }
    {
        let mut sm = Softmax::new();
        sm.forward(&x).unwrap();
        let dx = sm.backward(&c).unwrap();
        struct Env {
            layer: Softmax,
            x: Tensor,
        }
        let mut env = Env { layer: sm, x: x.clone() };
        let c2 = c.clone();
        fd_check(
            &mut env,
            |e| e.x.data_mut(),
            move |e| weighted_sum(&e.layer.forward(&e.x).unwrap(), &c2),
            dx.data(),
            TOL_SUITE,
            "softmax dX",
        );
    }
    {
        // Dropout differentiated with the mask held fixed by replaying the
        // same seed on every evaluation.
        let mut drop = Dropout::new(0.4).unwrap();
        let mut mask_rng = SeededRng::new(99);
        drop.forward(&x, true, &mut mask_rng);
        let dx = drop.backward(&c).unwrap();
        struct Env {
            layer: Dropout,
            x: Tensor,
        }
        let mut env = Env { layer: drop, x: x.clone() };
        let c2 = c.clone();
        fd_check(
            &mut env,
            |e| e.x.data_mut(),
            move |e| {
                let mut rng = SeededRng::new(99);
                weighted_sum(&e.layer.forward(&e.x, true, &mut rng), &c2)
            },
            dx.data(),
            TOL_SUITE,
            "dropout dX",
        );
    }
    {
        let mut up = Upsample1d::new(3).unwrap();
        let x3 = randn(&[2, 2, 5], &mut rng);
        up.forward(&x3).unwrap();
        let c3 = randn(&[2, 2, 15], &mut rng);
        let dx = up.backward(&c3).unwrap();
        struct Env {
            layer: Upsample1d,
            x: Tensor,
        }
        let mut env = Env { layer: up, x: x3 };
        fd_check(
            &mut env,
            |e| e.x.data_mut(),
            move |e| weighted_sum(&e.layer.forward(&e.x).unwrap(), &c3),
            dx.data(),
            TOL_SUITE,
            "upsample dX",
        );
    }
}

/// Loss gradients: sparse categorical cross-entropy and binary
/// cross-entropy.
pub fn losses() {
    let mut rng = SeededRng::new(105);
    let (b, l) = (5, 4);
    let mut data = vec![0.0; b * l];
    for row in data.chunks_mut(l) {
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = rng.uniform() + 0.2;
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    let labels: Vec<usize> = (0..b).map(|_| rng.index(l)).collect();
    let mut probs = Tensor::from_vec(&[b, l], data).unwrap();
    let (_, grad) = sparse_categorical_cross_entropy(&probs, &labels).unwrap();
    fd_check(
        &mut probs,
        |p| p.data_mut(),
        move |p| sparse_categorical_cross_entropy(p, &labels).unwrap().0,
        grad.data(),
        TOL_SUITE,
        "sparse_cce dP",
    );

    let mut p = Tensor::from_vec(&[6], vec![0.2, 0.7, 0.45, 0.9, 0.1, 0.6]).unwrap();
    let t = Tensor::from_vec(&[6], vec![0.0, 1.0, 1.0, 1.0, 0.0, 0.3]).unwrap();
    let (_, grad) = binary_cross_entropy(&p, &t).unwrap();
    fd_check(
        &mut p,
        |p| p.data_mut(),
        move |p| binary_cross_entropy(p, &t).unwrap().0,
        grad.data(),
        TOL_SUITE,
        "bce dP",
    );
}

/// Minibatch discrimination: gradients w.r.t. features and the kernel
/// tensor T, against finite differences.
pub fn minibatch_discrimination() {
    let mut rng = SeededRng::new(106);
    let mbd = MinibatchDiscrimination::new(4, 3, 2, &mut rng);
    let f = randn(&[5, 4], &mut rng);
    let c = randn(&[5, 7], &mut rng);

    let mut live = mbd.clone();
    live.forward(&f).unwrap();
    let df = live.backward(&c).unwrap();
    let dt = live.t.grad.data().to_vec();

    struct Env {
        mbd: MinibatchDiscrimination,
        f: Tensor,
    }
    let mut env = Env { mbd, f };
    let c2 = c.clone();
    fd_check(
        &mut env,
        |e| e.mbd.t.value.data_mut(),
        move |e| weighted_sum(&e.mbd.forward(&e.f).unwrap(), &c2),
        &dt,
        TOL_SUITE,
        "mbd dT",
    );
    fd_check(
        &mut env,
        |e| e.f.data_mut(),
        move |e| weighted_sum(&e.mbd.forward(&e.f).unwrap(), &c),
        df.data(),
        TOL_SUITE,
        "mbd dF",
    );
}

/// Spectral loss gradient w.r.t. the synthetic batch, both pairing modes.
pub fn spectral() {
    let mut rng = SeededRng::new(107);
    let real = randn(&[2, 2, 12], &mut rng);
    for mode in [SpectralMode::BatchMean, SpectralMode::PerSample] {
        let mut fake = randn(&[2, 2, 12], &mut rng);
        let (_, grad) = spectral_loss(&real, &fake, mode).unwrap();
        let real2 = real.clone();
        fd_check(
            &mut fake,
            |f| f.data_mut(),
            move |f| spectral_loss(&real2, f, mode).unwrap().0,
            grad.data(),
            TOL_SUITE,
            "spectral dFake",
        );
    }
}

/// FFT reverse pass: loss built from random weights on the real and
/// imaginary parts of every bin.
pub fn fft_adjoint() {
    let mut rng = SeededRng::new(108);
    let n = 16;
    let mut x = randn(&[12], &mut rng);
    let wre: Vec<f64> = (0..n / 2 + 1).map(|_| rng.normal()).collect();
    let wim: Vec<f64> = (0..n / 2 + 1).map(|_| rng.normal()).collect();
    let grad_bins: Vec<Complex64> = wre.iter().zip(&wim).map(|(&r, &i)| Complex64::new(r, i)).collect();
    let analytic = fft_real_adjoint(&grad_bins, n, 12).unwrap();
    fd_check(
        &mut x,
        |x| x.data_mut(),
        move |x| {
            let bins = fft_real(x.data(), n).unwrap();
            bins.iter().zip(wre.iter().zip(&wim)).map(|(z, (&r, &i))| z.re * r + z.im * i).sum()
        },
        &analytic,
        TOL_SUITE,
        "fft adjoint dX",
    );
}

fn tiny_gan_config() -> GanConfig {
    GanConfig {
        n_classes: 2,
        noise_dim: 3,
        gen_filters: (3, 3),
        gen_kernel: 3,
        disc_filters: (2, 3),
        disc_kernels: (5, 3),
        disc_pools: (4, 5),
        feature_dim: 4,
        mb_kernels: 2,
        mb_kernel_dim: 2,
        ..GanConfig::default()
    }
}

/// Full discriminator on a tiny config: every parameter tensor and a subset
/// of signal-input coordinates against finite differences through a BCE
/// objective.
pub fn discriminator_end_to_end() {
    let cfg = tiny_gan_config();
    let mut rng = SeededRng::new(109);
    let disc = Discriminator::build(&cfg, &mut rng).unwrap();
    let x = randn(&[3, 9, 300], &mut rng);
    let onehot = one_hot(&[0, 1, 0], 2).unwrap();
    let target = Tensor::from_vec(&[3, 1], vec![1.0, 0.0, 0.9]).unwrap();

    let mut live = disc.clone();
    live.zero_grad();
    let out = live.forward(&x, &onehot).unwrap();
    let (_, grad) = binary_cross_entropy(&out, &target).unwrap();
    let dx = live.backward(&grad).unwrap();
    let analytic: Vec<Vec<f64>> = live.params_mut().iter().map(|p| p.grad.data().to_vec()).collect();

    struct Env {
        disc: Discriminator,
        x: Tensor,
        onehot: Tensor,
        target: Tensor,
    }
    let mut env = Env { disc, x, onehot, target };
    let n_params = analytic.len();
    for pi in 0..n_params {
        let indices = spread_indices(analytic[pi].len(), 24);
        fd_check_subset(
            &mut env,
            |e| e.disc.params_mut().swap_remove(pi).value.data_mut(),
            |e| {
                let out = e.disc.forward(&e.x, &e.onehot).unwrap();
                binary_cross_entropy(&out, &e.target).unwrap().0
            },
            &analytic[pi],
            &indices,
            TOL_SUITE,
            &format!("discriminator param {pi}"),
        );
    }
    let indices = spread_indices(dx.len(), 36);
    fd_check_subset(
        &mut env,
        |e| e.x.data_mut(),
        |e| {
            let out = e.disc.forward(&e.x, &e.onehot).unwrap();
            binary_cross_entropy(&out, &e.target).unwrap().0
        },
        dx.data(),
        &indices,
        TOL_SUITE,
        "discriminator dSignal",
    );
}

/// End-to-end FCN composition check on a tiny config: analytic loss
/// gradient of every parameter matches finite differences.
pub fn fcn_end_to_end() {
    let cfg = FcnConfig {
        n_classes: 3,
        conv1_filters: 3,
        conv1_kernel: 5,
        pool1: 10,
        conv2_filters: 4,
        conv2_kernel: 3,
        pool2: 5,
        dense_width: 8,
        dropout: 0.0,
        ..FcnConfig::default()
    };
    let mut rng = SeededRng::new(110);
    let fcn = Fcn::build(&cfg, &mut rng).unwrap();
    let x = randn(&[2, 9, 300], &mut rng);
    let labels = vec![0usize, 2];

    let mut live = fcn.clone();
    live.zero_grad();
    let mut drop_rng = SeededRng::new(0);
    let probs = live.forward(&x, false, &mut drop_rng).unwrap();
    let (_, grad) = sparse_categorical_cross_entropy(&probs, &labels).unwrap();
    live.backward(&grad).unwrap();
    let analytic: Vec<Vec<f64>> = live.params_mut().iter().map(|p| p.grad.data().to_vec()).collect();

    struct Env {
        fcn: Fcn,
        x: Tensor,
        labels: Vec<usize>,
    }
    let mut env = Env { fcn, x, labels };
    for (pi, grads) in analytic.iter().enumerate() {
        let indices = spread_indices(grads.len(), 30);
        fd_check_subset(
            &mut env,
            |e| e.fcn.params_mut().swap_remove(pi).value.data_mut(),
            |e| {
                let mut rng = SeededRng::new(0);
                let probs = e.fcn.forward(&e.x, false, &mut rng).unwrap();
                sparse_categorical_cross_entropy(&probs, &e.labels).unwrap().0
            },
            grads,
            &indices,
            TOL_SUITE,
            &format!("fcn param {pi}"),
        );
    }
}

/// t-SNE objective: analytic KL gradient against finite differences on an
/// N=6 instance.
pub fn tsne_objective() {
    let mut rng = SeededRng::new(111);
    let n = 6;
    let points = randn(&[n, 4], &mut rng);
    let p = joint_affinities(&points, 1.5).unwrap();
    let mut y: Vec<f64> = (0..n * 2).map(|_| rng.normal()).collect();
    let (_, analytic) = kl_and_gradient(&p, &y, n, 1.0);
    for i in 0..y.len() {
        let orig = y[i];
        y[i] = orig + FD_EPS;
        let up = kl_and_gradient(&p, &y, n, 1.0).0;
        y[i] = orig - FD_EPS;
        let down = kl_and_gradient(&p, &y, n, 1.0).0;
        y[i] = orig;
        let numeric = (up - down) / (2.0 * FD_EPS);
        let err = super::rel_err(analytic[i], numeric);
        assert!(err < 1e-4, "tsne dY[{i}]: analytic {} vs numeric {numeric}, rel err {err:.3e}", analytic[i]);
    }
}

/// Run the whole battery (acceptance criterion 1 entry point).
pub fn run_all() {
    dense();
    conv1d();
    maxpool();
    activations();
    losses();
    minibatch_discrimination();
    spectral();
    fft_adjoint();
    discriminator_end_to_end();
    fcn_end_to_end();
    tsne_objective();
}
