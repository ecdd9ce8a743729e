//! Contrastive pre-training of a transaction-sequence transformer, logistic
//! scoring, and two-sided false-discovery-rate calibration of the scores.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod classify;
pub mod contrastive;
pub mod dataio;
pub mod encoder;
pub mod error;
pub mod numkernel;
pub mod pipeline;
pub mod rng;
pub mod similarity;

pub use error::{Error, Result};
