//! The three Monte Carlo commands — `eval`, `sweep`, `compare` — plus their
//! shared plumbing: building per-class sample streams, loading scorers from
//! model files, and parsing target grids.

use std::path::Path;

use seqdet::data::mixture::{load_two_class_spec, GaussianMixtureSpec};
use seqdet::data::LabeledDataset;
use seqdet::eval::{self, PerformanceCurve, StreamSource, write_curves_csv};
use seqdet::kernel::KernelModel;
use seqdet::scorer::{ModelScorer, OracleScorer, Scorer};
use seqdet::sprt::{thresholds_from_errors, write_outcomes_csv, ErrorTargets};
use seqdet::waldboost::{Ensemble, EnsembleScorer};
use seqdet::{Error, Result};

use crate::config::{ConfigMap, Resolver};
use crate::manifest::write_manifest;
use crate::{CompareArgs, EvalArgs, SweepArgs};

use super::{check_input, ensure_out_dir, init_threads, write_json_pretty};

const DEFAULT_TARGETS: &str = "0.01,0.02,0.05,0.1,0.15,0.2";

/// Per-class sample streams plus, for synthetic sources, the exact mixture
/// specs (needed to build the oracle scorer).
struct Sources {
    src0: StreamSource,
    src1: StreamSource,
    specs: Option<(GaussianMixtureSpec, GaussianMixtureSpec)>,
}

impl Sources {
    fn dim(&self) -> usize {
        self.src0.dim()
    }
}

/// Exactly one of `spec` (exact mixture streams) or `data` (per-class
/// bootstrap resampling of a labeled CSV) must be given.
fn build_sources(spec: Option<&str>, data: Option<&str>) -> Result<Sources> {
    match (spec, data) {
        (Some(_), Some(_)) => Err(Error::InvalidParameter(
            "pass exactly one sample source: spec or data, not both".into(),
        )),
        (None, None) => Err(Error::InvalidParameter(
            "a sample source is required: pass spec (synthetic) or data (resampled CSV)".into(),
        )),
        (Some(p), None) => {
            let (s0, s1) = load_two_class_spec(&check_input(p)?)?;
            Ok(Sources {
                src0: StreamSource::mixture(s0.clone()),
                src1: StreamSource::mixture(s1.clone()),
                specs: Some((s0, s1)),
            })
        }
        (None, Some(p)) => {
            let ds = LabeledDataset::load_csv(&check_input(p)?)?;
            Ok(Sources {
                src0: StreamSource::resample(ds.class0().to_vec())?,
                src1: StreamSource::resample(ds.class1().to_vec())?,
                specs: None,
            })
        }
    }
}

/// A scorer owned by the command, behind one of the three concrete types.
enum LoadedScorer {
    Kernel(ModelScorer),
    Boosted(EnsembleScorer),
    Oracle(OracleScorer),
}

impl LoadedScorer {
    fn as_dyn(&self) -> &dyn Scorer {
        match self {
            LoadedScorer::Kernel(s) => s,
            LoadedScorer::Boosted(s) => s,
            LoadedScorer::Oracle(s) => s,
        }
    }
}

/// Load a model file, detecting its kind from the JSON shape: boosted
/// ensembles carry a `stumps` array, kernel models a `centers` array. The
/// model's feature dimension must match the sample source's.
fn load_model(path: &str, dim: usize, label: &str) -> Result<LoadedScorer> {
    let checked = check_input(path)?;
    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&checked)?)?;
    if value.get("stumps").is_some() {
        let ensemble = Ensemble::load_json(&checked, dim)?;
        Ok(LoadedScorer::Boosted(EnsembleScorer::new(ensemble, dim)?))
    } else {
        let model = KernelModel::load_json(&checked)?;
        if model.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: model.dim() });
        }
        Ok(LoadedScorer::Kernel(ModelScorer::new(model, label)))
    }
}

fn file_stem(path: &str) -> String {
    Path::new(path)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string())
}

/// Pick the single scorer for `eval`/`sweep`: either the oracle (synthetic
/// sources only) or a trained model file.
fn resolve_scorer(
    sources: &Sources,
    oracle: bool,
    model: Option<&str>,
    label: Option<String>,
) -> Result<(LoadedScorer, String)> {
    match (oracle, model) {
        (true, Some(_)) => Err(Error::InvalidParameter(
            "oracle = true replaces the model file; pass one or the other".into(),
        )),
        (true, None) => {
            let (s0, s1) = sources.specs.clone().ok_or_else(|| {
                Error::InvalidParameter(
                    "the oracle scorer needs exact densities: pass spec, not data".into(),
                )
            })?;
            let label = label.unwrap_or_else(|| "oracle".into());
            Ok((LoadedScorer::Oracle(OracleScorer::new(s0, s1)?), label))
        }
        (false, Some(path)) => {
            let label = label.unwrap_or_else(|| file_stem(path));
            Ok((load_model(path, sources.dim(), &label)?, label))
        }
        (false, None) => Err(Error::InvalidParameter(
            "a scorer is required: pass model or oracle = true".into(),
        )),
    }
}

fn parse_f64(key: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|e| Error::InvalidParameter(format!("key `{key}`: bad value `{s}`: {e}")))
}

/// Parse a target grid: comma-separated entries, each either a symmetric
/// error `e` or an asymmetric `pf:pm` pair.
fn parse_targets(raw: &str) -> Result<Vec<ErrorTargets>> {
    let mut out = Vec::new();
    for entry in raw.split(',').map(str::trim).filter(|e| !e.is_empty()) {
        out.push(match entry.split_once(':') {
            Some((pf, pm)) => {
                ErrorTargets::new(parse_f64("targets", pf)?, parse_f64("targets", pm)?)?
            }
            None => ErrorTargets::symmetric(parse_f64("targets", entry)?)?,
        });
    }
    if out.is_empty() {
        return Err(Error::InvalidParameter("targets list is empty".into()));
    }
    Ok(out)
}

/// Stderr warning for each operating point where more than 1% of trials hit
/// the truncation cap; such points under-report errors and stopping times.
fn report_flagged(curve: &PerformanceCurve) {
    for p in curve.flagged_points() {
        eprintln!(
            "warning: {} at targets ({}, {}): {:.2}% of trials truncated at n_max; \
             estimates at this point are biased toward the cap",
            curve.scorer,
            p.pf_target,
            p.pm_target,
            100.0 * p.trunc_frac
        );
    }
}

const EVAL_KEYS: &[&str] = &[
    "spec", "data", "model", "oracle", "label", "target_pf", "target_pm", "prior0", "trials",
    "n_max", "seed", "out", "threads",
];

pub fn eval(args: EvalArgs) -> Result<()> {
    let cfg = ConfigMap::load(args.config.as_deref(), EVAL_KEYS)?;
    let mut r = Resolver::new(cfg);
    let spec = r.optional::<String>("spec", args.spec)?;
    let data = r.optional::<String>("data", args.data)?;
    let model = r.optional::<String>("model", args.model)?;
    let oracle = r.get("oracle", args.oracle, false)?;
    let label = r.optional::<String>("label", args.label)?;
    let target_pf = r.get("target_pf", args.target_pf, 0.1)?;
    let target_pm = r.get("target_pm", args.target_pm, 0.1)?;
    let prior0 = r.get("prior0", args.prior0, 0.5)?;
    let trials = r.get("trials", args.trials, 10_000)?;
    let n_max = r.get("n_max", args.n_max, 10_000)?;
    let seed = r.get("seed", args.seed, 0)?;
    let out = r.require::<String>("out", args.out)?;
    let threads = r.get("threads", args.threads, 0)?;
    init_threads(threads)?;

    let sources = build_sources(spec.as_deref(), data.as_deref())?;
    let (scorer, label) = resolve_scorer(&sources, oracle, model.as_deref(), label)?;
    r.note("label", &label);

    let t = thresholds_from_errors(ErrorTargets::new(target_pf, target_pm)?);
    let dir = ensure_out_dir(&out)?;
    let batch =
        eval::monte_carlo(scorer.as_dyn(), &sources.src0, &sources.src1, t, trials, n_max, seed)?;
    write_json_pretty(&dir.join("summary.json"), &batch.summary)?;
    write_outcomes_csv(&dir.join("outcomes.csv"), &batch.outcome_rows())?;
    write_manifest(&dir, "eval", r.effective())?;

    let s = &batch.summary;
    for (class, frac) in [(0, s.trunc_frac0), (1, s.trunc_frac1)] {
        if frac > 0.01 {
            eprintln!(
                "warning: {:.2}% of H{class} trials truncated at n_max = {n_max}; \
                 error and stopping-time estimates are biased toward the cap",
                100.0 * frac
            );
        }
    }
    println!(
        "{label}: pf {:.4} (se {:.4}), pm {:.4} (se {:.4}), err {:.4}, mean n = ({:.1}, {:.1})",
        s.pf_emp,
        s.pf_se,
        s.pm_emp,
        s.pm_se,
        prior0 * s.pf_emp + (1.0 - prior0) * s.pm_emp,
        s.mean_n0,
        s.mean_n1
    );
    Ok(())
}

const SWEEP_KEYS: &[&str] = &[
    "spec", "data", "model", "oracle", "label", "targets", "prior0", "trials", "n_max", "seed",
    "out", "threads",
];

pub fn sweep(args: SweepArgs) -> Result<()> {
    let cfg = ConfigMap::load(args.config.as_deref(), SWEEP_KEYS)?;
    let mut r = Resolver::new(cfg);
    let spec = r.optional::<String>("spec", args.spec)?;
    let data = r.optional::<String>("data", args.data)?;
    let model = r.optional::<String>("model", args.model)?;
    let oracle = r.get("oracle", args.oracle, false)?;
    let label = r.optional::<String>("label", args.label)?;
    let targets = r.get("targets", args.targets, DEFAULT_TARGETS.to_string())?;
    let prior0 = r.get("prior0", args.prior0, 0.5)?;
    let trials = r.get("trials", args.trials, 10_000)?;
    let n_max = r.get("n_max", args.n_max, 10_000)?;
    let seed = r.get("seed", args.seed, 0)?;
    let out = r.require::<String>("out", args.out)?;
    let threads = r.get("threads", args.threads, 0)?;
    init_threads(threads)?;

    let sources = build_sources(spec.as_deref(), data.as_deref())?;
    let (scorer, label) = resolve_scorer(&sources, oracle, model.as_deref(), label)?;
    r.note("label", &label);
    let grid = parse_targets(&targets)?;

    let dir = ensure_out_dir(&out)?;
    let mut curve = eval::sweep(
        scorer.as_dyn(),
        &sources.src0,
        &sources.src1,
        &grid,
        prior0,
        trials,
        n_max,
        seed,
    )?;
    curve.scorer = label.clone();
    write_curves_csv(&dir.join("curve.csv"), std::slice::from_ref(&curve))?;
    write_manifest(&dir, "sweep", r.effective())?;
    report_flagged(&curve);
    println!(
        "{label}: swept {} operating points, {} trials per class each -> {}",
        curve.points.len(),
        trials,
        dir.join("curve.csv").display()
    );
    Ok(())
}

const COMPARE_KEYS: &[&str] = &[
    "spec", "data", "models", "labels", "oracle", "targets", "prior0", "trials", "n_max", "seed",
    "out", "threads",
];

/// Turn a curve label into a safe `curve_<label>.csv` filename component.
fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect()
}

pub fn compare(args: CompareArgs) -> Result<()> {
    let cfg = ConfigMap::load(args.config.as_deref(), COMPARE_KEYS)?;
    let mut r = Resolver::new(cfg);
    let spec = r.optional::<String>("spec", args.spec)?;
    let data = r.optional::<String>("data", args.data)?;
    let models = r.optional::<String>("models", args.models)?;
    let labels = r.optional::<String>("labels", args.labels)?;
    let oracle = r.get("oracle", args.oracle, false)?;
    let targets = r.get("targets", args.targets, DEFAULT_TARGETS.to_string())?;
    let prior0 = r.get("prior0", args.prior0, 0.5)?;
    let trials = r.get("trials", args.trials, 10_000)?;
    let n_max = r.get("n_max", args.n_max, 10_000)?;
    let seed = r.get("seed", args.seed, 0)?;
    let out = r.require::<String>("out", args.out)?;
    let threads = r.get("threads", args.threads, 0)?;
    init_threads(threads)?;

    let sources = build_sources(spec.as_deref(), data.as_deref())?;
    let grid = parse_targets(&targets)?;

    let model_paths: Vec<String> = models
        .as_deref()
        .map(|s| s.split(',').map(str::trim).filter(|p| !p.is_empty()).map(String::from).collect())
        .unwrap_or_default();
    if model_paths.is_empty() && !oracle {
        return Err(Error::InvalidParameter(
            "nothing to compare: pass models and/or oracle = true".into(),
        ));
    }
    let model_labels: Vec<String> = match labels.as_deref() {
        Some(s) => s.split(',').map(|l| l.trim().to_string()).collect(),
        None => model_paths.iter().map(|p| file_stem(p)).collect(),
    };
    if model_labels.len() != model_paths.len() {
        return Err(Error::InvalidParameter(format!(
            "labels lists {} entries for {} models",
            model_labels.len(),
            model_paths.len()
        )));
    }

    // oracle first, then the models in the order given
    let mut entries: Vec<(String, LoadedScorer)> = Vec::new();
    if oracle {
        let (s0, s1) = sources.specs.clone().ok_or_else(|| {
            Error::InvalidParameter(
                "the oracle scorer needs exact densities: pass spec, not data".into(),
            )
        })?;
        entries.push(("oracle".into(), LoadedScorer::Oracle(OracleScorer::new(s0, s1)?)));
    }
    for (path, label) in model_paths.iter().zip(&model_labels) {
        entries.push((label.clone(), load_model(path, sources.dim(), label)?));
    }
    let mut seen = std::collections::BTreeSet::new();
    for (label, _) in &entries {
        if !seen.insert(label.clone()) {
            return Err(Error::InvalidParameter(format!(
                "duplicate scorer label `{label}`; give each model a distinct label"
            )));
        }
    }
    r.note("labels", entries.iter().map(|(l, _)| l.as_str()).collect::<Vec<_>>().join(","));

    let pairs: Vec<(&str, &dyn Scorer)> =
        entries.iter().map(|(l, s)| (l.as_str(), s.as_dyn())).collect();
    let dir = ensure_out_dir(&out)?;
    let curves = eval::compare(
        &pairs,
        &sources.src0,
        &sources.src1,
        &grid,
        prior0,
        trials,
        n_max,
        seed,
    )?;
    write_curves_csv(&dir.join("combined.csv"), &curves)?;
    for curve in &curves {
        write_curves_csv(
            &dir.join(format!("curve_{}.csv", sanitize(&curve.scorer))),
            std::slice::from_ref(curve),
        )?;
        report_flagged(curve);
    }
    write_manifest(&dir, "compare", r.effective())?;
    println!(
        "compared {} scorers over {} operating points, {} trials per class -> {}",
        curves.len(),
        grid.len(),
        trials,
        dir.join("combined.csv").display()
    );
    Ok(())
}
