//! Monte Carlo evaluation of sequential detectors: run many independent SPRT
//! trials per hypothesis against a sample source, summarize error rates and
//! stopping times, sweep target operating points into performance curves, and
//! compare several scorers under common random numbers (per-trial sample
//! streams depend only on the root seed, the hypothesis, and the trial index,
//! never on the scorer, so paired differences between methods are low-noise).

use serde::Serialize;
use std::io::Write as _;
use std::path::Path;

use crate::data::mixture::{sample_stream, GaussianMixtureSpec};
use crate::data::Sample;
use crate::error::{Error, Result};
use crate::numeric::{binomial_se, mean_and_se, median};
use crate::rng::{derive_seed, rng_from, TAG_DIVERGENCE, TAG_SWEEP_POINT, TAG_TRIAL};
use crate::scorer::Scorer;
use crate::sprt::{
    run_sprt, thresholds_from_errors, Decision, ErrorTargets, OutcomeRow, SprtOutcome, Thresholds,
};

/// Where evaluation samples come from: exact draws from a mixture density, or
/// i.i.d. resampling (with replacement) of a fixed set of rows — the honest
/// way to evaluate on real data without a generative model.
pub enum StreamSource {
    Mixture(GaussianMixtureSpec),
    Resample { rows: Vec<Sample>, dim: usize },
}

impl StreamSource {
    pub fn mixture(spec: GaussianMixtureSpec) -> Self {
        StreamSource::Mixture(spec)
    }

    pub fn resample(rows: Vec<Sample>) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::InvalidParameter("resample source needs at least one row".into()));
        };
        let dim = first.len();
        if dim == 0 {
            return Err(Error::InvalidParameter("resample rows must have at least one feature".into()));
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: rows[bad].len() });
        }
        Ok(StreamSource::Resample { rows, dim })
    }

    pub fn dim(&self) -> usize {
        match self {
            StreamSource::Mixture(spec) => spec.dim(),
            StreamSource::Resample { dim, .. } => *dim,
        }
    }

    /// An unbounded sample stream, fully determined by `seed`.
    pub fn stream(&self, seed: u64) -> Box<dyn Iterator<Item = Sample> + Send + '_> {
        match self {
            StreamSource::Mixture(spec) => Box::new(sample_stream(spec, seed)),
            StreamSource::Resample { rows, .. } => {
                let mut rng = rng_from(seed, &[]);
                Box::new(std::iter::from_fn(move || {
                    use rand::Rng;
                    Some(rows[rng.random_range(0..rows.len())].clone())
                }))
            }
        }
    }
}

/// Per-class summary of a Monte Carlo batch at one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalSummary {
    pub trials_per_class: usize,
    pub n_max: usize,
    pub a: f64,
    pub b: f64,
    /// Empirical false-alarm rate (H1 decisions under H0) and its binomial SE.
    pub pf_emp: f64,
    pub pf_se: f64,
    /// Empirical miss rate (H0 decisions under H1) and its binomial SE.
    pub pm_emp: f64,
    pub pm_se: f64,
    pub mean_n0: f64,
    pub se_n0: f64,
    pub median_n0: f64,
    pub mean_n1: f64,
    pub se_n1: f64,
    pub median_n1: f64,
    pub trunc_frac0: f64,
    pub trunc_frac1: f64,
}

/// A full Monte Carlo batch: the summary plus every per-trial outcome, in
/// trial order, for CSV export or deeper analysis.
pub struct McBatch {
    pub summary: EvalSummary,
    pub outcomes0: Vec<SprtOutcome>,
    pub outcomes1: Vec<SprtOutcome>,
}

impl McBatch {
    /// Flatten to CSV rows: all class-0 trials, then all class-1 trials.
    pub fn outcome_rows(&self) -> Vec<OutcomeRow> {
        self.outcomes0
            .iter()
            .map(|&outcome| (0u8, outcome))
            .chain(self.outcomes1.iter().map(|&outcome| (1u8, outcome)))
            .enumerate()
            .map(|(trial, (true_class, outcome))| OutcomeRow { trial, true_class, outcome })
            .collect()
    }
}

fn summarize(
    outcomes0: &[SprtOutcome],
    outcomes1: &[SprtOutcome],
    t: Thresholds,
    n_max: usize,
) -> EvalSummary {
    let trials = outcomes0.len();
    let frac = |outs: &[SprtOutcome], f: &dyn Fn(&SprtOutcome) -> bool| {
        outs.iter().filter(|o| f(o)).count() as f64 / outs.len() as f64
    };
    let pf_emp = frac(outcomes0, &|o| o.decision == Decision::H1);
    let pm_emp = frac(outcomes1, &|o| o.decision == Decision::H0);
    let ns0: Vec<f64> = outcomes0.iter().map(|o| o.n_samples as f64).collect();
    let ns1: Vec<f64> = outcomes1.iter().map(|o| o.n_samples as f64).collect();
    let (mean_n0, se_n0) = mean_and_se(&ns0);
    let (mean_n1, se_n1) = mean_and_se(&ns1);
    EvalSummary {
        trials_per_class: trials,
        n_max,
        a: t.a,
        b: t.b,
        pf_emp,
        pf_se: binomial_se(pf_emp, trials),
        pm_emp,
        pm_se: binomial_se(pm_emp, trials),
        mean_n0,
        se_n0,
        median_n0: median(&ns0),
        mean_n1,
        se_n1,
        median_n1: median(&ns1),
        trunc_frac0: frac(outcomes0, &|o| o.truncated),
        trunc_frac1: frac(outcomes1, &|o| o.truncated),
    }
}

/// Run `trials` independent SPRTs per hypothesis. Trial t under hypothesis h
/// reads a stream seeded by (seed, h, t) only, so results are identical for
/// any thread count and for any scorer evaluated at the same root seed.
pub fn monte_carlo(
    scorer: &dyn Scorer,
    src0: &StreamSource,
    src1: &StreamSource,
    t: Thresholds,
    trials: usize,
    n_max: usize,
    seed: u64,
) -> Result<McBatch> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    for (name, d) in [("H0", src0.dim()), ("H1", src1.dim())] {
        if d != scorer.dim() {
            let _ = name;
            return Err(Error::DimensionMismatch { expected: scorer.dim(), got: d });
        }
    }
    use rayon::prelude::*;
    let run_class = |class: u64, src: &StreamSource| -> Result<Vec<SprtOutcome>> {
        (0..trials)
            .into_par_iter()
            .map(|trial| {
                let s = derive_seed(seed, &[TAG_TRIAL, class, trial as u64]);
                let mut stream = src.stream(s);
                run_sprt(scorer, &mut *stream, t, n_max)
            })
            .collect()
    };
    let outcomes0 = run_class(0, src0)?;
    let outcomes1 = run_class(1, src1)?;
    let summary = summarize(&outcomes0, &outcomes1, t, n_max);
    Ok(McBatch { summary, outcomes0, outcomes1 })
}

/// One row of a performance curve: targets, the thresholds they imply, and
/// the prior-weighted empirical behavior at that operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatingPoint {
    pub pf_target: f64,
    pub pm_target: f64,
    pub a: f64,
    pub b: f64,
    pub pf_emp: f64,
    pub pm_emp: f64,
    /// π0·pf_emp + π1·pm_emp.
    pub err_emp: f64,
    /// π0·mean_n0 + π1·mean_n1 and its standard error.
    pub mean_n: f64,
    pub se_n: f64,
    /// π0·trunc_frac0 + π1·trunc_frac1.
    pub trunc_frac: f64,
}

impl OperatingPoint {
    /// Truncation above 1% makes stopping-time comparisons untrustworthy at
    /// this point; callers should surface this.
    pub fn truncation_flagged(&self) -> bool {
        self.trunc_frac > 0.01
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PerformanceCurve {
    pub scorer: String,
    pub prior0: f64,
    pub points: Vec<OperatingPoint>,
}

impl PerformanceCurve {
    pub fn flagged_points(&self) -> Vec<&OperatingPoint> {
        self.points.iter().filter(|p| p.truncation_flagged()).collect()
    }
}

/// Symmetric default target grid for sweeps.
pub fn default_target_grid() -> Vec<ErrorTargets> {
    [0.01, 0.02, 0.05, 0.1, 0.15, 0.2]
        .iter()
        .map(|&e| ErrorTargets::symmetric(e).expect("grid values lie in (0, 0.5)"))
        .collect()
}

fn operating_point(targets: ErrorTargets, s: &EvalSummary, pi0: f64) -> OperatingPoint {
    let pi1 = 1.0 - pi0;
    OperatingPoint {
        pf_target: targets.pf,
        pm_target: targets.pm,
        a: s.a,
        b: s.b,
        pf_emp: s.pf_emp,
        pm_emp: s.pm_emp,
        err_emp: pi0 * s.pf_emp + pi1 * s.pm_emp,
        mean_n: pi0 * s.mean_n0 + pi1 * s.mean_n1,
        se_n: (pi0 * pi0 * s.se_n0 * s.se_n0 + pi1 * pi1 * s.se_n1 * s.se_n1).sqrt(),
        trunc_frac: pi0 * s.trunc_frac0 + pi1 * s.trunc_frac1,
    }
}

/// Evaluate one scorer across a grid of target operating points. Point i uses
/// a seed derived from (seed, i), so adding or removing grid points never
/// perturbs the others.
pub fn sweep(
    scorer: &dyn Scorer,
    src0: &StreamSource,
    src1: &StreamSource,
    targets: &[ErrorTargets],
    prior0: f64,
    trials: usize,
    n_max: usize,
    seed: u64,
) -> Result<PerformanceCurve> {
    if targets.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one target point".into()));
    }
    if !(prior0 > 0.0 && prior0 < 1.0) {
        return Err(Error::InvalidParameter(format!("prior0 must lie in (0, 1), got {prior0}")));
    }
    let mut points = Vec::with_capacity(targets.len());
    for (i, &tg) in targets.iter().enumerate() {
        let point_seed = derive_seed(seed, &[TAG_SWEEP_POINT, i as u64]);
        let batch = monte_carlo(
            scorer,
            src0,
            src1,
            thresholds_from_errors(tg),
            trials,
            n_max,
            point_seed,
        )?;
        points.push(operating_point(tg, &batch.summary, prior0));
    }
    Ok(PerformanceCurve { scorer: scorer.describe(), prior0, points })
}

/// Sweep several scorers over the same grid with the same root seed: common
/// random numbers by construction, since per-trial stream seeds never involve
/// the scorer. `labels` override `describe()` in the output (useful for
/// stable CSV keys).
pub fn compare(
    scorers: &[(&str, &dyn Scorer)],
    src0: &StreamSource,
    src1: &StreamSource,
    targets: &[ErrorTargets],
    prior0: f64,
    trials: usize,
    n_max: usize,
    seed: u64,
) -> Result<Vec<PerformanceCurve>> {
    scorers
        .iter()
        .map(|&(label, scorer)| {
            let mut curve = sweep(scorer, src0, src1, targets, prior0, trials, n_max, seed)?;
            curve.scorer = label.to_string();
            Ok(curve)
        })
        .collect()
}

/// Monte Carlo estimates of the per-sample mean score displacements
/// d01 = −E[score | H0] and d10 = E[score | H1], with standard errors. For
/// the exact log-ratio these are the true KL divergences KL(p0‖p1), KL(p1‖p0).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DivergenceEstimate {
    pub d01: f64,
    pub d01_se: f64,
    pub d10: f64,
    pub d10_se: f64,
    pub samples: usize,
}

pub fn estimate_divergences(
    scorer: &dyn Scorer,
    src0: &StreamSource,
    src1: &StreamSource,
    samples: usize,
    seed: u64,
) -> Result<DivergenceEstimate> {
    if samples < 2 {
        return Err(Error::InvalidParameter("divergence estimation needs >= 2 samples".into()));
    }
    let side = |src: &StreamSource, class: u64, sign: f64| -> Result<(f64, f64)> {
        let mut vals = Vec::with_capacity(samples);
        for (i, x) in src.stream(derive_seed(seed, &[TAG_DIVERGENCE, class])).take(samples).enumerate() {
            let z = scorer.score(&x)?;
            if !z.is_finite() {
                return Err(Error::NonFiniteScore { index: i + 1 });
            }
            vals.push(sign * z);
        }
        Ok(mean_and_se(&vals))
    };
    let (d01, d01_se) = side(src0, 0, -1.0)?;
    let (d10, d10_se) = side(src1, 1, 1.0)?;
    Ok(DivergenceEstimate { d01, d01_se, d10, d10_se, samples })
}

/// CSV with one row per (curve, point); header
/// `scorer,pf_target,pm_target,a,b,pf_emp,pm_emp,err_emp,mean_n,se_n,trunc_frac`.
pub fn write_curves_csv(path: &Path, curves: &[PerformanceCurve]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "scorer,pf_target,pm_target,a,b,pf_emp,pm_emp,err_emp,mean_n,se_n,trunc_frac")?;
    for curve in curves {
        for p in &curve.points {
            writeln!(
                f,
                "{},{},{},{},{},{},{},{},{},{},{}",
                curve.scorer,
                p.pf_target,
                p.pm_target,
                p.a,
                p.b,
                p.pf_emp,
                p.pm_emp,
                p.err_emp,
                p.mean_n,
                p.se_n,
                p.trunc_frac
            )?;
        }
    }
    f.flush()?;
    Ok(())
}
