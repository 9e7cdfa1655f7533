//! The scorer contract: anything that maps a sample to an estimated
//! log-density-ratio log(p1(x)/p0(x)). This is the single seam between the
//! training methods and the sequential test engine — the kernel fits, the
//! boosted ensemble, and the exact-density oracle all come through here, so
//! the testing phase is identical for every method.

use serde::Serialize;

use crate::data::mixture::GaussianMixtureSpec;
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::kernel::KernelModel;
use crate::numeric::log_sum_exp;

pub trait Scorer: Send + Sync {
    /// Feature dimension the scorer expects.
    fn dim(&self) -> usize;

    /// Human-readable descriptor (method name plus hyperparameters); used as
    /// the curve label in evaluation output.
    fn describe(&self) -> String;

    /// Estimated log(p1(x)/p0(x)). Deterministic; finite for finite input.
    fn score(&self, x: &[f64]) -> Result<f64>;
}

/// Exact log-ratio from two known mixture densities.
pub struct OracleScorer {
    spec0: GaussianMixtureSpec,
    spec1: GaussianMixtureSpec,
}

impl OracleScorer {
    pub fn new(spec0: GaussianMixtureSpec, spec1: GaussianMixtureSpec) -> Result<Self> {
        if spec0.dim() != spec1.dim() {
            return Err(Error::DimensionMismatch { expected: spec0.dim(), got: spec1.dim() });
        }
        Ok(Self { spec0, spec1 })
    }
}

impl Scorer for OracleScorer {
    fn dim(&self) -> usize {
        self.spec0.dim()
    }

    fn describe(&self) -> String {
        format!("oracle (exact log-ratio, dim={})", self.dim())
    }

    fn score(&self, x: &[f64]) -> Result<f64> {
        Ok(self.spec1.log_density(x)? - self.spec0.log_density(x)?)
    }
}

/// A fitted kernel model exposed as a scorer. The label names the method that
/// produced the model (e.g. "wkdrf" or "klfit").
pub struct ModelScorer {
    model: KernelModel,
    label: String,
}

impl ModelScorer {
    pub fn new(model: KernelModel, method_label: &str) -> Self {
        let label = format!(
            "{method_label} (C={}, sigma={})",
            model.num_centers(),
            model.sigma
        );
        Self { model, label }
    }

    pub fn model(&self) -> &KernelModel {
        &self.model
    }
}

impl Scorer for ModelScorer {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn describe(&self) -> String {
        self.label.clone()
    }

    fn score(&self, x: &[f64]) -> Result<f64> {
        self.model.log_ratio(x)
    }
}

/// Multiplies another scorer by a constant. Exists for diagnostics: a
/// correctly normalized scorer stops satisfying the Wald identities once
/// scaled, which is the negative control for `wald_identity_check`.
pub struct Scaled<S: Scorer> {
    pub inner: S,
    pub factor: f64,
}

impl<S: Scorer> Scorer for Scaled<S> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn describe(&self) -> String {
        format!("{} x {}", self.inner.describe(), self.factor)
    }

    fn score(&self, x: &[f64]) -> Result<f64> {
        Ok(self.factor * self.inner.score(x)?)
    }
}

/// Empirical normalization factors of a scorer on labeled data. For the true
/// log-ratio both means are 1 in expectation; the error guarantees of
/// threshold-based stopping require them to be ≤ 1.
#[derive(Debug, Clone, Serialize)]
pub struct NormalizationReport {
    /// (1/M)·Σ exp(score) over class-0 samples, the empirical E[r̂ | H0].
    pub mean_ratio_h0: f64,
    /// (1/N)·Σ exp(−score) over class-1 samples, the empirical E[r̂⁻¹ | H1].
    pub mean_invratio_h1: f64,
    pub count_h0: usize,
    pub count_h1: usize,
}

/// Compute the two normalization means in log space; overflow surfaces as an
/// explicit +∞ rather than a panic or NaN.
pub fn normalization_diagnostics(
    scorer: &dyn Scorer,
    data: &LabeledDataset,
) -> Result<NormalizationReport> {
    let mean_exp = |samples: &[Vec<f64>], sign: f64| -> Result<f64> {
        let mut logs = Vec::with_capacity(samples.len());
        for s in samples {
            logs.push(sign * scorer.score(s)?);
        }
        let lse = log_sum_exp(&logs) - (samples.len() as f64).ln();
        Ok(lse.exp()) // +∞ propagates if the log-mean exceeds ~709
    };
    Ok(NormalizationReport {
        mean_ratio_h0: mean_exp(data.class0(), 1.0)?,
        mean_invratio_h1: mean_exp(data.class1(), -1.0)?,
        count_h0: data.m(),
        count_h1: data.n(),
    })
}
