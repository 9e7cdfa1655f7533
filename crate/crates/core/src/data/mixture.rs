//! Gaussian-mixture specifications: validated construction, exact
//! log-density evaluation, seeded sampling, and unbounded sample streams.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numeric::log_sum_exp;
use crate::rng;

use super::Sample;

const LN_2PI: f64 = 1.8378770664093453;

/// One mixture component as it appears in spec files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Covariance matrix, row-major.
    pub cov: Vec<Vec<f64>>,
}

/// A validated Gaussian mixture with precomputed Cholesky factors, ready for
/// density evaluation and sampling.
#[derive(Debug, Clone)]
pub struct GaussianMixtureSpec {
    components: Vec<MixtureComponent>,
    dim: usize,
    chol: Vec<DMatrix<f64>>,
    log_weight: Vec<f64>,
    /// −(d/2)·ln(2π) − ½·ln|Σ| per component.
    log_norm: Vec<f64>,
}

impl GaussianMixtureSpec {
    /// Validate weights (each in (0,1], summing to 1 within 1e-12), dimension
    /// consistency, and positive definiteness (defined as Cholesky success).
    pub fn new(components: Vec<MixtureComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParameter("mixture needs at least one component".into()));
        }
        let dim = components[0].mean.len();
        if dim == 0 {
            return Err(Error::InvalidParameter("mixture dimension must be >= 1".into()));
        }
        let wsum: f64 = components.iter().map(|c| c.weight).sum();
        if (wsum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "component weights sum to {wsum}, expected 1 within 1e-12"
            )));
        }
        let mut chol = Vec::with_capacity(components.len());
        let mut log_weight = Vec::with_capacity(components.len());
        let mut log_norm = Vec::with_capacity(components.len());
        for (k, c) in components.iter().enumerate() {
            if !(c.weight > 0.0 && c.weight <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "component {k}: weight {} outside (0,1]",
                    c.weight
                )));
            }
            if c.mean.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: c.mean.len() });
            }
            if c.cov.len() != dim || c.cov.iter().any(|row| row.len() != dim) {
                return Err(Error::InvalidParameter(format!(
                    "component {k}: covariance must be {dim}x{dim}"
                )));
            }
            for i in 0..dim {
                for j in 0..dim {
                    let (a, b) = (c.cov[i][j], c.cov[j][i]);
                    if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                        return Err(Error::InvalidParameter(format!(
                            "component {k}: covariance not symmetric at ({i},{j})"
                        )));
                    }
                }
            }
            let m = DMatrix::from_fn(dim, dim, |i, j| c.cov[i][j]);
            let f = nalgebra::Cholesky::new(m).ok_or_else(|| {
                Error::InvalidParameter(format!("component {k}: covariance not positive definite"))
            })?;
            let l = f.unpack();
            let half_log_det: f64 = (0..dim).map(|i| l[(i, i)].ln()).sum();
            log_norm.push(-0.5 * dim as f64 * LN_2PI - half_log_det);
            log_weight.push(c.weight.ln());
            chol.push(l);
        }
        Ok(Self { components, dim, chol, log_weight, log_norm })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    /// Exact mixture log-density via log-sum-exp over component log-pdfs.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        let mut terms = Vec::with_capacity(self.components.len());
        for k in 0..self.components.len() {
            let d = DVector::from_fn(self.dim, |i, _| x[i] - self.components[k].mean[i]);
            // y = L⁻¹(x − μ), so ‖y‖² = (x−μ)ᵀΣ⁻¹(x−μ)
            let y = self.chol[k]
                .solve_lower_triangular(&d)
                .expect("Cholesky factor is nonsingular by construction");
            terms.push(self.log_weight[k] + self.log_norm[k] - 0.5 * y.norm_squared());
        }
        Ok(log_sum_exp(&terms))
    }

    /// One draw: pick a component by weight, then x = μ + L·z with z standard
    /// normal. Component choice consumes exactly one uniform per draw so the
    /// stream layout is stable.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Sample {
        let u: f64 = rng.random();
        let mut k = self.components.len() - 1;
        let mut acc = 0.0;
        for (i, c) in self.components.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                k = i;
                break;
            }
        }
        let z = DVector::from_fn(self.dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = &self.chol[k] * z;
        (0..self.dim).map(|i| self.components[k].mean[i] + x[i]).collect()
    }
}

/// Unbounded i.i.d. sample source; `sample_stream(spec, seed)` and
/// `gen_mixture_samples(spec, n, seed)` agree on prefixes by construction.
pub struct SampleStream<'a> {
    spec: &'a GaussianMixtureSpec,
    rng: ChaCha8Rng,
}

impl Iterator for SampleStream<'_> {
    type Item = Sample;

    fn next(&mut self) -> Option<Sample> {
        Some(self.spec.sample(&mut self.rng))
    }
}

pub fn sample_stream(spec: &GaussianMixtureSpec, seed: u64) -> SampleStream<'_> {
    SampleStream { spec, rng: rng::rng_from(seed, &[]) }
}

pub fn gen_mixture_samples(spec: &GaussianMixtureSpec, n: usize, seed: u64) -> Vec<Sample> {
    sample_stream(spec, seed).take(n).collect()
}

/// On-disk two-class spec document: `{"class0": {"components": [...]},
/// "class1": {"components": [...]}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwoClassSpecDoc {
    pub class0: MixtureSpecDoc,
    pub class1: MixtureSpecDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureSpecDoc {
    pub components: Vec<MixtureComponent>,
}

/// Load and validate a two-class spec file, requiring equal dimensions.
pub fn load_two_class_spec(path: &Path) -> Result<(GaussianMixtureSpec, GaussianMixtureSpec)> {
    let doc: TwoClassSpecDoc = serde_json::from_reader(std::fs::File::open(path)?)?;
    let s0 = GaussianMixtureSpec::new(doc.class0.components)?;
    let s1 = GaussianMixtureSpec::new(doc.class1.components)?;
    if s0.dim() != s1.dim() {
        return Err(Error::DimensionMismatch { expected: s0.dim(), got: s1.dim() });
    }
    Ok((s0, s1))
}

/// The two-class benchmark used throughout the tests and docs:
/// p0 = N([1,1], 0.5·I), p1 = ½·N([0,0], 0.5·I) + ½·N([1.5,1.5], 0.5·I).
pub fn benchmark_specs() -> (GaussianMixtureSpec, GaussianMixtureSpec) {
    let iso = |s: f64| vec![vec![s, 0.0], vec![0.0, s]];
    let p0 = GaussianMixtureSpec::new(vec![MixtureComponent {
        weight: 1.0,
        mean: vec![1.0, 1.0],
        cov: iso(0.5),
    }])
    .expect("benchmark p0 is valid");
    let p1 = GaussianMixtureSpec::new(vec![
        MixtureComponent { weight: 0.5, mean: vec![0.0, 0.0], cov: iso(0.5) },
        MixtureComponent { weight: 0.5, mean: vec![1.5, 1.5], cov: iso(0.5) },
    ])
    .expect("benchmark p1 is valid");
    (p0, p1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn single(mean: Vec<f64>, var: f64) -> GaussianMixtureSpec {
        let d = mean.len();
        let cov = (0..d)
            .map(|i| (0..d).map(|j| if i == j { var } else { 0.0 }).collect())
            .collect();
        GaussianMixtureSpec::new(vec![MixtureComponent { weight: 1.0, mean, cov }]).unwrap()
    }

    #[test]
    fn construction_rejects_bad_specs() {
        let bad_weight = vec![MixtureComponent {
            weight: 0.7,
            mean: vec![0.0],
            cov: vec![vec![1.0]],
        }];
        assert!(GaussianMixtureSpec::new(bad_weight).is_err());

        let not_pd = vec![MixtureComponent {
            weight: 1.0,
            mean: vec![0.0, 0.0],
            cov: vec![vec![1.0, 2.0], vec![2.0, 1.0]],
        }];
        let err = GaussianMixtureSpec::new(not_pd).unwrap_err();
        assert!(err.to_string().contains("positive definite"));

        let asym = vec![MixtureComponent {
            weight: 1.0,
            mean: vec![0.0, 0.0],
            cov: vec![vec![1.0, 0.3], vec![0.2, 1.0]],
        }];
        assert!(GaussianMixtureSpec::new(asym).is_err());
    }

    #[test]
    fn sample_mean_matches_single_component() {
        let spec = single(vec![1.0, 1.0], 0.5);
        let xs = gen_mixture_samples(&spec, 100_000, 42);
        for j in 0..2 {
            let mean = xs.iter().map(|x| x[j]).sum::<f64>() / xs.len() as f64;
            assert!((mean - 1.0).abs() < 0.02, "coordinate {j} mean {mean}");
        }
    }

    #[test]
    fn degenerate_variance_pins_samples_to_the_mean() {
        let spec = single(vec![3.0, -1.0], 1e-300);
        for x in gen_mixture_samples(&spec, 3, 0) {
            assert_relative_eq!(x[0], 3.0, epsilon = 1e-140);
            assert_relative_eq!(x[1], -1.0, epsilon = 1e-140);
        }
    }

    #[test]
    fn sampling_is_deterministic_and_stream_consistent() {
        let (_, p1) = benchmark_specs();
        let a = gen_mixture_samples(&p1, 50, 7);
        let b = gen_mixture_samples(&p1, 50, 7);
        assert_eq!(a, b);
        let prefix: Vec<_> = sample_stream(&p1, 7).take(50).collect();
        assert_eq!(a, prefix);
        let other: Vec<_> = sample_stream(&p1, 8).take(50).collect();
        assert_ne!(a, other);
    }

    #[test]
    fn stream_is_unbounded() {
        let (p0, _) = benchmark_specs();
        let n = sample_stream(&p0, 1).take(1_000_000).count();
        assert_eq!(n, 1_000_000);
    }

    #[test]
    fn component_frequencies_match_weights() {
        // distinguishable components: mean tells which one fired
        let spec = GaussianMixtureSpec::new(vec![
            MixtureComponent { weight: 0.3, mean: vec![-100.0], cov: vec![vec![1.0]] },
            MixtureComponent { weight: 0.7, mean: vec![100.0], cov: vec![vec![1.0]] },
        ])
        .unwrap();
        let n = 100_000;
        let hits = gen_mixture_samples(&spec, n, 5)
            .iter()
            .filter(|x| x[0] < 0.0)
            .count();
        let p = hits as f64 / n as f64;
        let se = (0.3f64 * 0.7 / n as f64).sqrt();
        assert!((p - 0.3).abs() <= 3.0 * se, "freq {p} vs 0.3 ± {}", 3.0 * se);
    }

    #[test]
    fn log_density_matches_hand_values() {
        let (p0, p1) = benchmark_specs();
        // p0([1,1]) = 1/π; p1([1,1]) = (1/π)·½·(e^{−2} + e^{−1/2})
        let lp0 = p0.log_density(&[1.0, 1.0]).unwrap();
        assert_relative_eq!(lp0, -(std::f64::consts::PI).ln(), max_relative = 1e-14);
        let lp1 = p1.log_density(&[1.0, 1.0]).unwrap();
        let expect = (0.5 / std::f64::consts::PI * ((-2.0f64).exp() + (-0.5f64).exp())).ln();
        assert_relative_eq!(lp1, expect, max_relative = 1e-13);
    }

    #[test]
    fn two_class_doc_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spec.json");
        let doc = TwoClassSpecDoc {
            class0: MixtureSpecDoc {
                components: vec![MixtureComponent {
                    weight: 1.0,
                    mean: vec![1.0, 1.0],
                    cov: vec![vec![0.5, 0.0], vec![0.0, 0.5]],
                }],
            },
            class1: MixtureSpecDoc {
                components: vec![MixtureComponent {
                    weight: 1.0,
                    mean: vec![0.0, 0.0],
                    cov: vec![vec![0.5, 0.0], vec![0.0, 0.5]],
                }],
            },
        };
        std::fs::write(&path, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
        let (s0, s1) = load_two_class_spec(&path).unwrap();
        assert_eq!(s0.dim(), 2);
        assert_eq!(s1.components()[0].mean, vec![0.0, 0.0]);
    }
}
