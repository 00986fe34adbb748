//! F0 analysis toolkit: pitch extraction, log-F0 trajectory conditioning, a trainable
//! frame-level F0 predictor and objective prosody metrics.
// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audio;
pub mod cli;
pub mod corpus;
pub mod metrics;
pub mod pitch;
pub mod predictor;
pub mod trajectory;

mod error;

pub use error::{Error, Result};
