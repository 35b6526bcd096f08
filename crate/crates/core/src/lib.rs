//! Bayesian completion of sparse model × dataset × metric score tensors.
//!
//! Scores are treated as noisy observations of a low-rank factor model.
//! Posterior draws come from a No-U-Turn sampler; predictions carry
//! posterior uncertainty that drives active evaluation.

#![allow(clippy::needless_range_loop)]

pub mod active;
pub mod analysis;
pub mod error;
pub mod fit;
pub mod io;
pub mod linalg;
pub mod model;
pub mod par;
pub mod predict;
pub mod profiles;
pub mod sampler;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use par::Execution;
