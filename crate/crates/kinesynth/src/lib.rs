//! Synthesis and evaluation pipeline for post-stroke reaching kinematics.
//!
//! The crate covers the full loop: ingest 9-channel reaching trials, train a
//! conditional GAN with a spectral loss and minibatch discrimination, filter
//! and export class-conditioned synthetic trials, and measure how synthetic
//! augmentation changes a convolutional task classifier under five-fold
//! cross-validation.

pub mod cgan;
pub mod classifier;
pub mod data;
pub mod embed;
pub mod error;
pub mod eval;
pub mod numerics;
pub mod rng;
pub mod signal;
pub mod toy;

pub use error::{Error, Result};
pub use rng::SeededRng;
