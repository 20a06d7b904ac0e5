//! Coarse-to-fine unsupervised domain adaptation for traversability
//! segmentation.
//!
//! The crate is `no_std` and only needs `alloc`. It contains:
//!
//! - [`diffcore`]: a small reverse-mode differentiable tensor engine with
//!   the convolution and activation operators the networks need, plus SGD,
//!   Adam and the poly learning-rate schedule.
//! - [`gradcheck`]: finite-difference checks of every operator and loss.
//! - [`models`]: the shared feature extractor, the two classifier heads and
//!   the domain discriminator.
//! - [`losses`]: supervised segmentation, domain cross-entropy, classifier
//!   discrepancy and the cosine weight regularizer.
//! - [`trainer`]: alternating domain/class alignment training and the
//!   source-only, domain-only and class-only baselines.
//! - [`divergence`]: empirical H-divergence and HΔH-distance estimators,
//!   both exact (finite hypothesis classes) and neural.
//! - [`data`]: synthetic two-domain segmentation data and label remapping.
//! - [`metrics`]: confusion matrices, IoU and mIoU*.
//! - [`planner`]: motion primitives, image projection, distance fields and
//!   primitive selection.
//! - [`sim`]: a grid world with a synthetic camera for closed-loop runs.
//!
//! File formats, CSV output and the command-line driver live in the
//! companion `cali` crate.
#![no_std]

extern crate alloc;

pub mod data;
pub mod diffcore;
pub mod divergence;
mod error;
pub mod gradcheck;
pub mod losses;
pub mod metrics;
pub mod models;
pub mod planner;
pub mod rng;
pub mod sim;
pub mod trainer;

pub use error::{Error, Result};
