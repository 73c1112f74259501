//! Journal citation indices and the statistics built on them: cross-index
//! power-law fits on log-binned scatter, Pearson auto-correlations across
//! years, mean-rescaled distribution collapse and tail-exponent estimation.

pub mod binfit;
pub mod correlation;
pub mod dataset;
pub mod distributions;
pub mod error;
pub mod format;
pub mod indices;
pub mod lsq;
pub mod report;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
