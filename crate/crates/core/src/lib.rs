//! Cross-domain collaborative filtering by joint factorization of
//! per-domain preference matrices and user-tag / item-tag frequency
//! matrices, coupled through a shared tag factor matrix, together with the
//! evaluation harness (splitting protocols, MAE/MAP, baselines and
//! significance testing) needed to run reproducible experiments.

pub mod baselines;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod model;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
