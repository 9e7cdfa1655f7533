//! Boosted-stump baseline: discrete AdaBoost over decision stumps, with the
//! staged classifier response converted into an approximate per-sample
//! log-likelihood ratio for sequential testing,
//!
//! ```text
//! score(x) = 2·Σ_t c_t·h_t(x) + log(π0/π1),
//! ```
//!
//! using the standard posterior-odds reading of the boosted margin. Stump
//! search is exact over all (feature, threshold, polarity) candidates, with
//! thresholds at midpoints between consecutive distinct feature values plus
//! one sentinel on each side, and fully deterministic tie-breaking: lowest
//! feature index, then lowest threshold, then polarity +1.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::scorer::Scorer;

/// One weak learner with its round weight. `polarity` is +1 or −1; the stump
/// votes +1 when polarity·(x[feature] − threshold) > 0 and −1 otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedStump {
    pub feature: usize,
    pub threshold: f64,
    pub polarity: i8,
    pub weight: f64,
}

impl WeightedStump {
    pub fn vote(&self, x: &[f64]) -> f64 {
        if (x[self.feature] - self.threshold) * f64::from(self.polarity) > 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    /// log(π0/π1), the constant that turns posterior log-odds into a
    /// log-likelihood ratio.
    pub prior_log_odds: f64,
    pub stumps: Vec<WeightedStump>,
}

impl Ensemble {
    /// Boosted margin F(x) = Σ c_t·h_t(x).
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.stumps.iter().map(|s| s.weight * s.vote(x)).sum()
    }

    /// Approximate log p1(x)/p0(x).
    pub fn score(&self, x: &[f64]) -> f64 {
        2.0 * self.margin(x) + self.prior_log_odds
    }

    pub fn rounds(&self) -> usize {
        self.stumps.len()
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.stumps.is_empty() {
            return Err(Error::InvalidParameter("ensemble has no stumps".into()));
        }
        if !self.prior_log_odds.is_finite() {
            return Err(Error::InvalidParameter("prior_log_odds must be finite".into()));
        }
        for (i, s) in self.stumps.iter().enumerate() {
            if s.feature >= dim {
                return Err(Error::DimensionMismatch { expected: dim, got: s.feature + 1 });
            }
            if !s.threshold.is_finite() || !s.weight.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "stump {i} has a non-finite threshold or weight"
                )));
            }
            if s.polarity != 1 && s.polarity != -1 {
                return Err(Error::InvalidParameter(format!(
                    "stump {i} has polarity {}, expected +1 or -1",
                    s.polarity
                )));
            }
        }
        Ok(())
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load_json(path: &Path, dim: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let ensemble: Ensemble = serde_json::from_str(&text)?;
        ensemble.validate(dim)?;
        Ok(ensemble)
    }
}

/// Per-round training record: the weighted error of each chosen stump (before
/// clamping) and the training exponential loss mean exp(−y·F_t(x)) after each
/// round.
#[derive(Debug, Clone, Serialize)]
pub struct TrainingReport {
    pub round_errors: Vec<f64>,
    pub losses: Vec<f64>,
}

/// Weighted error is clamped into [EPS_CLAMP, 1 − EPS_CLAMP] before the round
/// weight c = ½·log((1−ε)/ε), so separable rounds get a large but finite
/// weight.
pub const EPS_CLAMP: f64 = 1e-10;

struct BestStump {
    feature: usize,
    threshold: f64,
    polarity: i8,
    error: f64,
}

/// Exact best stump for the given sample weights. `order[f]` lists sample
/// indices sorted by feature f. Candidates are visited in the documented
/// tie-break order and only a strictly smaller error replaces the incumbent.
fn search_stump(
    xs: &[&[f64]],
    ys: &[f64],
    weights: &[f64],
    order: &[Vec<usize>],
) -> BestStump {
    let n = xs.len();
    let mut best: Option<BestStump> = None;
    for (f, idx) in order.iter().enumerate() {
        // prefix[p] = (weight of positives, weight of negatives) among the
        // first p samples in sorted order (those with x[f] <= threshold)
        let mut pos_prefix = 0.0;
        let mut neg_prefix = 0.0;
        let total_pos: f64 =
            weights.iter().zip(ys).filter(|(_, &y)| y > 0.0).map(|(w, _)| w).sum();
        let total_neg: f64 =
            weights.iter().zip(ys).filter(|(_, &y)| y < 0.0).map(|(w, _)| w).sum();
        let lo = xs[idx[0]][f];
        let hi = xs[idx[n - 1]][f];
        for p in 0..=n {
            // a candidate split exists before position p only at distinct-value
            // boundaries (plus the two sentinels)
            let threshold = if p == 0 {
                lo - 1.0
            } else if p == n {
                hi + 1.0
            } else {
                let (a, b) = (xs[idx[p - 1]][f], xs[idx[p]][f]);
                if a == b {
                    // not a boundary; accumulate and move on
                    if ys[idx[p - 1]] > 0.0 {
                        pos_prefix += weights[idx[p - 1]];
                    } else {
                        neg_prefix += weights[idx[p - 1]];
                    }
                    continue;
                }
                if ys[idx[p - 1]] > 0.0 {
                    pos_prefix += weights[idx[p - 1]];
                } else {
                    neg_prefix += weights[idx[p - 1]];
                }
                0.5 * (a + b)
            };
            if p == n {
                if ys[idx[n - 1]] > 0.0 {
                    pos_prefix += weights[idx[n - 1]];
                } else {
                    neg_prefix += weights[idx[n - 1]];
                }
            }
            // polarity +1 votes +1 above the threshold: errors are positives
            // at or below it plus negatives above it
            let err_plus = pos_prefix + (total_neg - neg_prefix);
            let err_minus = (total_pos - pos_prefix) + neg_prefix;
            for (polarity, error) in [(1i8, err_plus), (-1i8, err_minus)] {
                let better = match &best {
                    None => true,
                    Some(b) => error < b.error,
                };
                if better {
                    best = Some(BestStump { feature: f, threshold, polarity, error });
                }
            }
        }
    }
    best.expect("at least one candidate stump exists")
}

/// Train a discrete-AdaBoost stump ensemble on the pooled dataset (class 0
/// labeled −1, class 1 labeled +1, uniform initial weights) and attach the
/// prior offset for sequential scoring.
pub fn train_adaboost(
    train: &LabeledDataset,
    rounds: usize,
    prior0: f64,
) -> Result<(Ensemble, TrainingReport)> {
    if rounds == 0 {
        return Err(Error::InvalidParameter("rounds must be >= 1".into()));
    }
    if !(prior0 > 0.0 && prior0 < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "prior0 must lie in (0, 1), got {prior0}"
        )));
    }
    let xs: Vec<&[f64]> = train
        .class0()
        .iter()
        .chain(train.class1().iter())
        .map(|v| v.as_slice())
        .collect();
    let ys: Vec<f64> = std::iter::repeat_n(-1.0, train.m())
        .chain(std::iter::repeat_n(1.0, train.n()))
        .collect();
    let n = xs.len();
    let d = train.dim();

    // per-feature sort orders, computed once; ties keep index order so the
    // search is deterministic
    let order: Vec<Vec<usize>> = (0..d)
        .map(|f| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| xs[a][f].total_cmp(&xs[b][f]).then(a.cmp(&b)));
            idx
        })
        .collect();

    let mut weights = vec![1.0 / n as f64; n];
    let mut margins = vec![0.0; n];
    let mut stumps = Vec::with_capacity(rounds);
    let mut round_errors = Vec::with_capacity(rounds);
    let mut losses = Vec::with_capacity(rounds);

    for _ in 0..rounds {
        let found = search_stump(&xs, &ys, &weights, &order);
        let eps = found.error.clamp(EPS_CLAMP, 1.0 - EPS_CLAMP);
        let c = 0.5 * ((1.0 - eps) / eps).ln();
        let stump = WeightedStump {
            feature: found.feature,
            threshold: found.threshold,
            polarity: found.polarity,
            weight: c,
        };

        let mut z = 0.0;
        for i in 0..n {
            let h = stump.vote(xs[i]);
            margins[i] += c * h;
            weights[i] *= (-c * ys[i] * h).exp();
            z += weights[i];
        }
        weights.iter_mut().for_each(|w| *w /= z);

        round_errors.push(found.error);
        losses.push(
            margins.iter().zip(&ys).map(|(m, y)| (-y * m).exp()).sum::<f64>() / n as f64,
        );
        stumps.push(stump);
    }

    let ensemble = Ensemble {
        prior_log_odds: (prior0 / (1.0 - prior0)).ln(),
        stumps,
    };
    Ok((ensemble, TrainingReport { round_errors, losses }))
}

/// The ensemble as a sequential scorer.
pub struct EnsembleScorer {
    ensemble: Ensemble,
    dim: usize,
}

impl EnsembleScorer {
    pub fn new(ensemble: Ensemble, dim: usize) -> Result<Self> {
        ensemble.validate(dim)?;
        Ok(Self { ensemble, dim })
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }
}

impl Scorer for EnsembleScorer {
    fn dim(&self) -> usize {
        self.dim
    }

    fn describe(&self) -> String {
        format!("adaboost (T={})", self.ensemble.rounds())
    }

    fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(self.ensemble.score(x))
    }
}
