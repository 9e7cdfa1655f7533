//! Sequential detection with learned log-likelihood-ratio scorers.
//!
//! The pipeline this crate implements:
//!
//! 1. **Data** ([`data`]): labeled two-class datasets, Gaussian-mixture
//!    synthetic sources with exact densities, and an ingestion path for
//!    accelerometer-style recognition data.
//! 2. **Scorers** ([`scorer`]): anything that maps a sample to an approximate
//!    per-sample log-likelihood ratio — the exact oracle for synthetic
//!    mixtures, kernel models, and boosted stump ensembles.
//! 3. **Fitting**: [`wkdrf`] trains a kernel scorer by minimizing a convex
//!    upper bound on the expected sampling cost of the sequential test,
//!    subject to normalization constraints; [`klfit`] is the classical
//!    KL-divergence variational fit on the same model class; [`waldboost`]
//!    is the AdaBoost-with-stumps baseline.
//! 4. **Testing** ([`sprt`]): Wald's sequential probability ratio test with
//!    truncation, threshold/error-rate conversions, theoretical cost, and
//!    Wald-identity diagnostics.
//! 5. **Evaluation** ([`eval`]): Monte Carlo error/cost measurement, target
//!    sweeps into performance curves, divergence estimation, and multi-method
//!    comparisons under common random numbers.
//!
//! All randomness flows from a single root seed through tagged derivations
//! ([`rng`]), so every result is reproducible bit for bit at any thread
//! count.

pub mod data;
pub mod error;
pub mod eval;
pub mod kernel;
pub mod klfit;
pub mod numeric;
pub mod rng;
pub mod scorer;
pub mod sprt;
pub mod waldboost;
pub mod wkdrf;

pub use error::{Error, Result};
