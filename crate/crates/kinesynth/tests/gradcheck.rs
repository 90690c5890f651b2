//! Central finite-difference verification of every reverse-mode path.

mod common;

use common::gradchecks;

#[test]
fn dense_gradients() {
    gradchecks::dense();
}

#[test]
fn conv1d_gradients() {
    gradchecks::conv1d();
}

#[test]
fn maxpool_routing() {
    gradchecks::maxpool();
}

#[test]
fn activation_gradients() {
    gradchecks::activations();
}

#[test]
fn loss_gradients() {
    gradchecks::losses();
}

#[test]
fn minibatch_discrimination_gradients() {
    gradchecks::minibatch_discrimination();
}

#[test]
fn spectral_loss_gradients() {
    gradchecks::spectral();
}

#[test]
fn fft_adjoint_gradients() {
    gradchecks::fft_adjoint();
}

#[test]
fn discriminator_end_to_end_gradients() {
    gradchecks::discriminator_end_to_end();
}

#[test]
fn fcn_end_to_end_gradients() {
    gradchecks::fcn_end_to_end();
}

#[test]
fn tsne_objective_gradient() {
    gradchecks::tsne_objective();
}
