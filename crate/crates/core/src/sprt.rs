//! The sequential probability ratio test engine: threshold algebra, the
//! zero-overshoot error/cost formulas, execution of a test over a sample
//! stream, and the Wald-identity Monte Carlo diagnostic.

use serde::Serialize;
use std::io::Write;
use std::path::Path;

use crate::data::mixture::{sample_stream, GaussianMixtureSpec};
use crate::data::Sample;
use crate::error::{Error, Result};
use crate::numeric::mean_and_se;
use crate::rng::{derive_seed, TAG_TRIAL};
use crate::scorer::Scorer;

/// Stopping boundaries for the accumulated log-ratio: declare H0 at or below
/// `a`, H1 at or above `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub a: f64,
    pub b: f64,
}

impl Thresholds {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < 0.0 && b > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "thresholds must satisfy a < 0 < b, got a={a}, b={b}"
            )));
        }
        Ok(Self { a, b })
    }
}

/// Target error pair: `pf` = false-alarm probability (declare H1 under H0),
/// `pm` = miss probability (declare H0 under H1). Targets used to derive
/// thresholds must each lie in (0, 0.5).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorTargets {
    pub pf: f64,
    pub pm: f64,
}

impl ErrorTargets {
    pub fn new(pf: f64, pm: f64) -> Result<Self> {
        if !(pf > 0.0 && pf < 0.5 && pm > 0.0 && pm < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "error targets must lie in (0, 0.5), got pf={pf}, pm={pm}"
            )));
        }
        Ok(Self { pf, pm })
    }

    /// Symmetric targets pf = pm = e.
    pub fn symmetric(e: f64) -> Result<Self> {
        Self::new(e, e)
    }
}

/// a = log(pm/(1−pf)), b = log((1−pm)/pf): the unique boundaries whose
/// zero-overshoot error rates are exactly the targets.
pub fn thresholds_from_errors(t: ErrorTargets) -> Thresholds {
    let a = (t.pm / (1.0 - t.pf)).ln();
    let b = ((1.0 - t.pm) / t.pf).ln();
    Thresholds { a, b }
}

/// Zero-overshoot error rates of given boundaries:
/// P_F = (1−e^a)/(e^b−e^a), P_M = e^a(e^b−1)/(e^b−e^a).
///
/// Always satisfies P_F + P_M < 1, but an extreme threshold pair can push one
/// rate above 0.5, so the result is returned as plain rates rather than
/// revalidated targets.
pub fn errors_from_thresholds(t: Thresholds) -> ErrorTargets {
    let ea = t.a.exp();
    let eb = t.b.exp();
    ErrorTargets {
        pf: (1.0 - ea) / (eb - ea),
        pm: ea * (eb - 1.0) / (eb - ea),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Decision {
    H0,
    H1,
}

/// Result of one sequential run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SprtOutcome {
    pub decision: Decision,
    /// Stopping time N: number of samples consumed.
    pub n_samples: usize,
    /// Final accumulated statistic Λ̂_N.
    pub final_stat: f64,
    /// True when the run hit `n_max` without crossing a boundary; the
    /// decision is then the sign of Λ̂ (tie → H0).
    pub truncated: bool,
}

/// Run one SPRT: accumulate scores until the statistic leaves (a, b) —
/// boundary comparisons inclusive — or `n_max` samples are consumed.
/// Consumes exactly `n_samples` items from the stream.
pub fn run_sprt(
    scorer: &dyn Scorer,
    stream: &mut dyn Iterator<Item = Sample>,
    t: Thresholds,
    n_max: usize,
) -> Result<SprtOutcome> {
    if n_max == 0 {
        return Err(Error::InvalidParameter("n_max must be >= 1".into()));
    }
    let mut acc = 0.0;
    for n in 1..=n_max {
        let x = stream.next().ok_or_else(|| {
            Error::InvalidParameter(format!("sample stream ended after {} items", n - 1))
        })?;
        let z = scorer.score(&x)?;
        if !z.is_finite() {
            return Err(Error::NonFiniteScore { index: n });
        }
        acc += z;
        if acc <= t.a {
            return Ok(SprtOutcome { decision: Decision::H0, n_samples: n, final_stat: acc, truncated: false });
        }
        if acc >= t.b {
            return Ok(SprtOutcome { decision: Decision::H1, n_samples: n, final_stat: acc, truncated: false });
        }
    }
    let decision = if acc > 0.0 { Decision::H1 } else { Decision::H0 };
    Ok(SprtOutcome { decision, n_samples: n_max, final_stat: acc, truncated: true })
}

/// Expected stopping times and prior-weighted cost of an ideal SPRT with the
/// given per-sample divergences (zero-overshoot approximation).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TheoreticalCost {
    /// E[N | H0] = bracket0 / d01.
    pub n0: f64,
    /// E[N | H1] = bracket1 / d10.
    pub n1: f64,
    /// π0·n0 + π1·n1.
    pub total: f64,
}

/// pf·log(pf/(1−pm)) + (1−pf)·log((1−pf)/pm): the magnitude of E[Λ̂_N | H0]
/// at the target operating point (numerator of E[N | H0]).
pub(crate) fn cost_bracket0(pf: f64, pm: f64) -> f64 {
    pf * (pf / (1.0 - pm)).ln() + (1.0 - pf) * ((1.0 - pf) / pm).ln()
}

/// pm·log(pm/(1−pf)) + (1−pm)·log((1−pm)/pf): E[Λ̂_N | H1] at the target
/// operating point (numerator of E[N | H1]).
pub(crate) fn cost_bracket1(pf: f64, pm: f64) -> f64 {
    pm * (pm / (1.0 - pf)).ln() + (1.0 - pm) * ((1.0 - pm) / pf).ln()
}

pub fn theoretical_cost(
    targets: ErrorTargets,
    d01: f64,
    d10: f64,
    pi0: f64,
    pi1: f64,
) -> Result<TheoreticalCost> {
    if !(d01 > 0.0 && d10 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "divergences must be positive, got d01={d01}, d10={d10}"
        )));
    }
    if !(pi0 > 0.0 && pi1 > 0.0 && (pi0 + pi1 - 1.0).abs() <= 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "priors must be positive and sum to 1, got pi0={pi0}, pi1={pi1}"
        )));
    }
    let n0 = cost_bracket0(targets.pf, targets.pm) / d01;
    let n1 = cost_bracket1(targets.pf, targets.pm) / d10;
    Ok(TheoreticalCost { n0, n1, total: pi0 * n0 + pi1 * n1 })
}

/// Monte Carlo estimates of E[e^{Λ̂_N} | H0] and E[e^{−Λ̂_N} | H1] over
/// non-truncated runs. For a correctly normalized scorer both are exactly 1
/// by optional stopping; drift beyond sampling error flags a mis-scaled or
/// badly normalized scorer.
#[derive(Debug, Clone, Serialize)]
pub struct WaldIdentityReport {
    pub mean_exp_lambda_h0: f64,
    pub se_h0: f64,
    pub mean_exp_neg_lambda_h1: f64,
    pub se_h1: f64,
    pub trials: usize,
    pub truncated_h0: usize,
    pub truncated_h1: usize,
}

impl WaldIdentityReport {
    /// Whether both estimates are within `k` reported standard errors of 1.
    pub fn within(&self, k: f64) -> bool {
        (self.mean_exp_lambda_h0 - 1.0).abs() <= k * self.se_h0
            && (self.mean_exp_neg_lambda_h1 - 1.0).abs() <= k * self.se_h1
    }
}

pub fn wald_identity_check(
    scorer: &dyn Scorer,
    spec_h0: &GaussianMixtureSpec,
    spec_h1: &GaussianMixtureSpec,
    t: Thresholds,
    trials: usize,
    n_max: usize,
    seed: u64,
) -> Result<WaldIdentityReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    let run_side = |spec: &GaussianMixtureSpec, class: u64, sign: f64| -> Result<(f64, f64, usize)> {
        let mut vals = Vec::with_capacity(trials);
        let mut truncated = 0usize;
        for trial in 0..trials {
            let mut stream = sample_stream(spec, derive_seed(seed, &[TAG_TRIAL, class, trial as u64]));
            let out = run_sprt(scorer, &mut stream, t, n_max)?;
            if out.truncated {
                truncated += 1;
            } else {
                vals.push((sign * out.final_stat).exp());
            }
        }
        if vals.is_empty() {
            return Err(Error::AllTruncated { trials, n_max });
        }
        let (mean, se) = mean_and_se(&vals);
        Ok((mean, se, truncated))
    };
    let (mean0, se0, trunc0) = run_side(spec_h0, 0, 1.0)?;
    let (mean1, se1, trunc1) = run_side(spec_h1, 1, -1.0)?;
    Ok(WaldIdentityReport {
        mean_exp_lambda_h0: mean0,
        se_h0: se0,
        mean_exp_neg_lambda_h1: mean1,
        se_h1: se1,
        trials,
        truncated_h0: trunc0,
        truncated_h1: trunc1,
    })
}

/// One row of an outcome batch: which trial, which hypothesis generated the
/// data, and what the test did.
#[derive(Debug, Clone, Copy)]
pub struct OutcomeRow {
    pub trial: usize,
    pub true_class: u8,
    pub outcome: SprtOutcome,
}

/// CSV with header `trial,true_class,decision,n_samples,final_stat,truncated`.
pub fn write_outcomes_csv(path: &Path, rows: &[OutcomeRow]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "trial,true_class,decision,n_samples,final_stat,truncated")?;
    for r in rows {
        let d = match r.outcome.decision {
            Decision::H0 => "H0",
            Decision::H1 => "H1",
        };
        writeln!(
            f,
            "{},{},{},{},{},{}",
            r.trial, r.true_class, d, r.outcome.n_samples, r.outcome.final_stat, r.outcome.truncated
        )?;
    }
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::mixture::benchmark_specs;
    use crate::scorer::{OracleScorer, Scaled};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const LN_9: f64 = 2.1972245773362196;

    struct ConstantScorer(f64);
    impl Scorer for ConstantScorer {
        fn dim(&self) -> usize {
            1
        }
        fn describe(&self) -> String {
            "constant".into()
        }
        fn score(&self, _x: &[f64]) -> Result<f64> {
            Ok(self.0)
        }
    }

    /// Scores 1-D samples by their own value; turns a number stream into a
    /// score stream for threshold tests.
    struct IdentityScorer;
    impl Scorer for IdentityScorer {
        fn dim(&self) -> usize {
            1
        }
        fn describe(&self) -> String {
            "identity".into()
        }
        fn score(&self, x: &[f64]) -> Result<f64> {
            Ok(x[0])
        }
    }

    fn ones() -> impl Iterator<Item = Sample> {
        std::iter::repeat(vec![0.0])
    }

    #[test]
    fn threshold_hand_values() {
        let t = thresholds_from_errors(ErrorTargets::symmetric(0.1).unwrap());
        assert_relative_eq!(t.a, -LN_9, max_relative = 1e-14);
        assert_relative_eq!(t.b, LN_9, max_relative = 1e-14);

        let t = thresholds_from_errors(ErrorTargets::new(0.01, 0.05).unwrap());
        assert_relative_eq!(t.a, -2.9856819377004893, max_relative = 1e-14);
        assert_relative_eq!(t.b, 4.553876891600541, max_relative = 1e-14);

        let e = errors_from_thresholds(Thresholds::new(-LN_9, LN_9).unwrap());
        assert_relative_eq!(e.pf, 0.1, max_relative = 1e-13);
        assert_relative_eq!(e.pm, 0.1, max_relative = 1e-13);
    }

    #[test]
    fn miss_rate_approaches_exp_a_for_large_b() {
        let t = Thresholds::new(-1.5, 200.0).unwrap();
        let e = errors_from_thresholds(t);
        assert_relative_eq!(e.pm, (-1.5f64).exp(), max_relative = 1e-12);
        assert!(e.pf < 1e-80);
    }

    #[test]
    fn round_trip_identity_on_valid_grid() {
        for i in 0..20 {
            for j in 0..20 {
                let pf = 0.0125 + 0.025 * i as f64;
                let pm = 0.0125 + 0.025 * j as f64;
                let t = thresholds_from_errors(ErrorTargets::new(pf, pm).unwrap());
                let e = errors_from_thresholds(t);
                assert!((e.pf - pf).abs() <= 1e-12, "pf {pf}: got {}", e.pf);
                assert!((e.pm - pm).abs() <= 1e-12, "pm {pm}: got {}", e.pm);
            }
        }
    }

    #[test]
    fn run_sprt_constant_scorers() {
        let t = Thresholds::new(-2.5, 2.5).unwrap();
        let up = run_sprt(&ConstantScorer(1.0), &mut ones(), t, 100).unwrap();
        assert_eq!(
            up,
            SprtOutcome { decision: Decision::H1, n_samples: 3, final_stat: 3.0, truncated: false }
        );
        let down = run_sprt(&ConstantScorer(-1.0), &mut ones(), t, 100).unwrap();
        assert_eq!(down.decision, Decision::H0);
        assert_eq!(down.n_samples, 3);

        let stuck = run_sprt(&ConstantScorer(0.0), &mut ones(), t, 50).unwrap();
        assert!(stuck.truncated);
        assert_eq!(stuck.n_samples, 50);
        assert_eq!(stuck.decision, Decision::H0, "tie goes to H0");
    }

    #[test]
    fn run_sprt_consumes_exactly_n_samples() {
        struct Counting<'a> {
            inner: &'a mut dyn Iterator<Item = Sample>,
            consumed: usize,
        }
        impl Iterator for Counting<'_> {
            type Item = Sample;
            fn next(&mut self) -> Option<Sample> {
                self.consumed += 1;
                self.inner.next()
            }
        }
        let mut base = ones();
        let mut stream = Counting { inner: &mut base, consumed: 0 };
        let out = run_sprt(&ConstantScorer(0.9), &mut stream, Thresholds::new(-3.0, 3.0).unwrap(), 100).unwrap();
        assert_eq!(out.n_samples, 4); // 4 × 0.9 = 3.6 ≥ 3
        assert_eq!(stream.consumed, 4);
    }

    #[test]
    fn run_sprt_rejects_non_finite_scores() {
        let err = run_sprt(&ConstantScorer(f64::NAN), &mut ones(), Thresholds::new(-1.0, 1.0).unwrap(), 10)
            .unwrap_err();
        assert!(matches!(err, Error::NonFiniteScore { index: 1 }));
    }

    proptest! {
        // Widening the boundaries never shortens a run on a fixed sequence.
        #[test]
        fn stopping_time_monotone_in_thresholds(
            zs in proptest::collection::vec(-1.5f64..1.5, 1..60),
            a1 in -4.0f64..-0.1, b1 in 0.1f64..4.0,
            da in 0.0f64..2.0, db in 0.0f64..2.0,
        ) {
            let narrow = Thresholds::new(a1, b1).unwrap();
            let wide = Thresholds::new(a1 - da, b1 + db).unwrap();
            let run = |t| {
                let mut stream = zs.iter().map(|&z| vec![z]);
                run_sprt(&IdentityScorer, &mut stream, t, zs.len()).unwrap()
            };
            prop_assert!(run(wide).n_samples >= run(narrow).n_samples);
        }
    }

    #[test]
    fn theoretical_cost_hand_values() {
        let sym = ErrorTargets::symmetric(0.1).unwrap();
        let c = theoretical_cost(sym, 1.0, 1.0, 0.5, 0.5).unwrap();
        assert_relative_eq!(c.n0, 0.8 * LN_9, max_relative = 1e-13);
        assert_relative_eq!(c.n1, 0.8 * LN_9, max_relative = 1e-13);
        assert_relative_eq!(c.total, 0.8 * LN_9, max_relative = 1e-13);

        let c2 = theoretical_cost(sym, 2.0, 2.0, 0.5, 0.5).unwrap();
        assert_relative_eq!(c2.total, c.total / 2.0, max_relative = 1e-13);

        let asym = ErrorTargets::new(0.01, 0.05).unwrap();
        let c3 = theoretical_cost(asym, 0.7, 1.0, 0.5, 0.5).unwrap();
        assert_relative_eq!(c3.n1, 4.176898950135489, max_relative = 1e-12);
        assert!((c3.n1 - 4.176903).abs() < 1e-4, "matches the hand-rounded value");

        assert!(theoretical_cost(sym, 0.0, 1.0, 0.5, 0.5).is_err());
        assert!(theoretical_cost(sym, 1.0, 1.0, 0.6, 0.5).is_err());
    }

    #[test]
    fn wald_identity_holds_for_oracle_and_breaks_when_scaled() {
        let (p0, p1) = benchmark_specs();
        let oracle = OracleScorer::new(p0.clone(), p1.clone()).unwrap();
        let t = thresholds_from_errors(ErrorTargets::symmetric(0.1).unwrap());
        let r = wald_identity_check(&oracle, &p0, &p1, t, 4000, 10_000, 21).unwrap();
        assert!(r.within(3.0), "oracle should satisfy the identity: {r:?}");
        assert_eq!(r.truncated_h0 + r.truncated_h1, 0);

        let scaled = Scaled { inner: OracleScorer::new(p0.clone(), p1.clone()).unwrap(), factor: 2.0 };
        let r2 = wald_identity_check(&scaled, &p0, &p1, t, 4000, 10_000, 21).unwrap();
        assert!(!r2.within(3.0), "x2 control should drift: {r2:?}");
    }

    #[test]
    fn wald_identity_errors_when_everything_truncates() {
        let (p0, p1) = benchmark_specs();
        let zero = ConstantScorer(0.0);
        // dim mismatch doesn't matter: constant scorer ignores x
        let t = Thresholds::new(-1.0, 1.0).unwrap();
        let err = wald_identity_check(&zero, &p0, &p1, t, 10, 20, 0).unwrap_err();
        assert!(matches!(err, Error::AllTruncated { .. }));
    }

    #[test]
    fn outcome_csv_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("outcomes.csv");
        let rows = vec![
            OutcomeRow {
                trial: 0,
                true_class: 0,
                outcome: SprtOutcome {
                    decision: Decision::H0,
                    n_samples: 7,
                    final_stat: -2.375,
                    truncated: false,
                },
            },
            OutcomeRow {
                trial: 1,
                true_class: 1,
                outcome: SprtOutcome {
                    decision: Decision::H1,
                    n_samples: 400,
                    final_stat: 0.5,
                    truncated: true,
                },
            },
        ];
        write_outcomes_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "trial,true_class,decision,n_samples,final_stat,truncated\n\
             0,0,H0,7,-2.375,false\n\
             1,1,H1,400,0.5,true\n"
        );
    }
}
