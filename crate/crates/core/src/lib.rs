//! Tripletformer: probabilistic interpolation of asynchronous time series.
//!
//! An asynchronous time series is treated as a set of `(time, channel, value)`
//! triplets. The encoder embeds every triplet and runs stacked induced
//! multihead attention blocks over the set; the decoder embeds each
//! `(time, channel)` query, cross-attends to the encoded set and emits a
//! Gaussian mean and standard deviation per query.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`]: dense `f64` tensors, a reverse-mode gradient tape and a
//!   finite-difference gradient checker.
//! * [`attention`]: scaled dot-product attention, multihead attention, MAB and
//!   IMAB with key masking and exact multiply-add accounting.
//! * [`data`]: triplet records, JSONL ingestion, synthetic generators,
//!   preprocessing, the random/burst sampling protocols and padded batching.
//! * [`model`]: the encoder-decoder, parameter initialisation and checkpoints.
//! * [`training`]: Gaussian NLL with the augmented MSE term, Adam, the
//!   early-stopped training loop and random hyperparameter search.
//! * [`harness`]: mean/forward baselines, evaluation reports and experiment
//!   manifests.

pub mod attention;
pub mod data;
mod error;
pub mod harness;
pub mod model;
pub mod params;
pub mod rng;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
