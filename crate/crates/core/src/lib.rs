//! Seizure/non-seizure EEG classification with stacked independently
//! recurrent (IndRNN) blocks.
//!
//! The crate covers the whole pipeline: tensor kernels and hand-derived
//! backward passes ([`layers`], [`model`]), optimizers and the training loop
//! ([`training`]), EDF and CHB-MIT summary ingestion ([`data`]), and the
//! segmentation, cross-validation and sweep protocol ([`experiments`]).

// NaN-rejecting guards are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod cli;
pub mod data;
pub mod error;
pub mod experiments;
pub mod exec;
pub mod fsutil;
pub mod gradcheck;
pub mod layers;
pub mod model;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
