//! Shared oracle machinery for the integration suites: central
//! finite-difference gradient checks, independent of every reverse-mode
//! code path they verify.

use kinesynth::numerics::Tensor;
use kinesynth::rng::SeededRng;

pub const FD_EPS: f64 = 1e-5;

/// Relative error with an absolute floor for near-zero pairs.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let d = (analytic - numeric).abs();
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-6 {
        d
    } else {
        d / scale
    }
}

/// Central-difference check of `analytic` against a loss evaluated while
/// perturbing one slot at a time. `slot` exposes the values being perturbed,
/// `eval` recomputes the scalar loss from scratch.
pub fn fd_check<T>(
    subject: &mut T,
    slot: impl Fn(&mut T) -> &mut [f64],
    mut eval: impl FnMut(&mut T) -> f64,
    analytic: &[f64],
    tol: f64,
    label: &str,
) {
    let n = analytic.len();
    assert_eq!(slot(subject).len(), n, "{label}: analytic gradient length mismatch");
    for i in 0..n {
        let orig = slot(subject)[i];
        slot(subject)[i] = orig + FD_EPS;
        let up = eval(subject);
        slot(subject)[i] = orig - FD_EPS;
        let down = eval(subject);
        slot(subject)[i] = orig;
        let numeric = (up - down) / (2.0 * FD_EPS);
        let err = rel_err(analytic[i], numeric);
        assert!(
            err < tol,
            "{label}[{i}]: analytic {} vs numeric {numeric}, rel err {err:.3e} (tol {tol:.1e})",
            analytic[i]
        );
    }
}

/// Random tensor with entries from a seeded standard normal.
pub fn randn(shape: &[usize], rng: &mut SeededRng) -> Tensor {
    let len: usize = shape.iter().product();
    Tensor::from_vec(shape, (0..len).map(|_| rng.normal()).collect()).unwrap()
}

/// Weighted sum of all elements: a generic scalar objective whose gradient
/// with respect to the output is just the weights.
pub fn weighted_sum(out: &Tensor, weights: &Tensor) -> f64 {
    out.data().iter().zip(weights.data()).map(|(&a, &b)| a * b).sum()
}

pub mod gradchecks;
