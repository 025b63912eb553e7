//! Breast-ultrasound lesion classification with boundary-weighted feature
//! maps and a shared-encoder reconstruction/classification network.
//!
//! * [`bfm`] turns an image and a lesion mask into a boundary-weighted
//!   feature map and provides the morphology used to perturb boundaries.
//! * [`tensor`] is a small reverse-mode engine with the layers and optimizer
//!   the networks need.
//! * [`network`] assembles the encoder, decoder and classifier.
//! * [`training`] holds the losses and the alternating, joint and two-stage
//!   optimization schedules.
//! * [`evaluation`] computes the classification metric suite.
//! * [`harness`] ties everything into reproducible experiments.

pub mod bfm;
pub mod error;
pub mod evaluation;
pub mod harness;
pub mod network;
pub mod report;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
