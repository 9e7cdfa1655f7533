use std::io::Write as _;
use std::path::Path;

use seqdet::data::{LabeledDataset, Sample};
use seqdet::wkdrf::CvSelection;
use seqdet::{klfit, waldboost, wkdrf, Error, Result};

use crate::config::{parse_list, ConfigMap, Resolver};
use crate::manifest::write_manifest;
use crate::TrainArgs;

use super::{check_input, ensure_out_dir, init_threads, write_json_pretty};

const KEYS: &[&str] = &[
    "data",
    "method",
    "sigma",
    "lambda",
    "sigma_grid",
    "lambda_grid",
    "holdout_fraction",
    "centers",
    "centers_file",
    "target_pf",
    "target_pm",
    "prior0",
    "rounds",
    "inner_iters",
    "max_iters",
    "seed",
    "out",
    "threads",
];

fn write_cv_table(path: &Path, sel: &CvSelection) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "sigma,lambda,score")?;
    for p in &sel.table {
        writeln!(f, "{},{},{}", p.sigma, p.lambda, p.score)?;
    }
    Ok(())
}

pub fn run(args: TrainArgs) -> Result<()> {
    let cfg = ConfigMap::load(args.config.as_deref(), KEYS)?;
    let mut r = Resolver::new(cfg);
    let data_path = r.require::<String>("data", args.data)?;
    let method = r.require::<String>("method", args.method)?;
    let sigma = r.get("sigma", args.sigma, 1.0)?;
    let lambda = r.get("lambda", args.lambda, 1e-3)?;
    let sigma_grid = r.optional::<String>("sigma_grid", args.sigma_grid)?;
    let lambda_grid = r.optional::<String>("lambda_grid", args.lambda_grid)?;
    let holdout_fraction = r.get("holdout_fraction", args.holdout_fraction, 0.5)?;
    let centers = r.get("centers", args.centers, 25)?;
    let centers_file = r.optional::<String>("centers_file", args.centers_file)?;
    let target_pf = r.get("target_pf", args.target_pf, 0.1)?;
    let target_pm = r.get("target_pm", args.target_pm, 0.1)?;
    let prior0 = r.get("prior0", args.prior0, 0.5)?;
    let rounds = r.get("rounds", args.rounds, 200)?;
    let inner_iters = r.get("inner_iters", args.inner_iters, 500)?;
    let max_iters = r.get("max_iters", args.max_iters, 20_000)?;
    let seed = r.get("seed", args.seed, 0)?;
    let out = r.require::<String>("out", args.out)?;
    let threads = r.get("threads", args.threads, 0)?;
    init_threads(threads)?;

    let data = LabeledDataset::load_csv(&check_input(&data_path)?)?;
    let dir = ensure_out_dir(&out)?;

    // grids present → cross-validate first; a missing grid falls back to the
    // corresponding scalar as a singleton
    let grids: Option<(Vec<f64>, Vec<f64>)> = match (&sigma_grid, &lambda_grid) {
        (None, None) => None,
        (s, l) => Some((
            s.as_ref().map_or(Ok(vec![sigma]), |v| parse_list("sigma_grid", v))?,
            l.as_ref().map_or(Ok(vec![lambda]), |v| parse_list("lambda_grid", v))?,
        )),
    };

    if method != "klfit" && centers_file.is_some() {
        return Err(Error::InvalidParameter(
            "centers_file is only meaningful for method = klfit".into(),
        ));
    }

    let mut non_converged: Option<String> = None;
    match method.as_str() {
        "wkdrf" => {
            let mut c = wkdrf::WkdrfConfig {
                target_pf,
                target_pm,
                prior0,
                lambda,
                sigma,
                num_centers: centers,
                seed,
                ..wkdrf::WkdrfConfig::default()
            };
            c.solver.max_inner_iters = inner_iters;
            if let Some((sg, lg)) = &grids {
                let sel = wkdrf::cross_validate(&data, &c, sg, lg, holdout_fraction)?;
                write_cv_table(&dir.join("cv_table.csv"), &sel)?;
                r.note("selected_sigma", sel.sigma);
                r.note("selected_lambda", sel.lambda);
                c.sigma = sel.sigma;
                c.lambda = sel.lambda;
            }
            let (model, diag) = wkdrf::fit(&data, &c)?;
            model.save_json(&dir.join("model.json"))?;
            write_json_pretty(&dir.join("centers.json"), &model.centers)?;
            write_json_pretty(&dir.join("diagnostics.json"), &diag)?;
            println!(
                "wkdrf fit: objective {:.6}, divergence estimates ({:.4}, {:.4}), converged {}",
                diag.objective, diag.d01_hat, diag.d10_hat, diag.converged
            );
            if !diag.converged {
                non_converged = Some("the final barrier stage stopped on its iteration budget".into());
            }
        }
        "klfit" => {
            let mut c = klfit::KlFitConfig {
                lambda,
                sigma,
                num_centers: centers,
                seed,
                ..klfit::KlFitConfig::default()
            };
            c.solver.max_iters = max_iters;
            if let Some((sg, lg)) = &grids {
                if centers_file.is_some() {
                    return Err(Error::InvalidParameter(
                        "cross-validation cannot be combined with centers_file; \
                         pass scalar sigma and lambda"
                            .into(),
                    ));
                }
                let sel = klfit::cross_validate(&data, &c, sg, lg, holdout_fraction)?;
                write_cv_table(&dir.join("cv_table.csv"), &sel)?;
                r.note("selected_sigma", sel.sigma);
                r.note("selected_lambda", sel.lambda);
                c.sigma = sel.sigma;
                c.lambda = sel.lambda;
            }
            let (model, diag) = match &centers_file {
                Some(path) => {
                    let text = std::fs::read_to_string(check_input(path)?)?;
                    let loaded: Vec<Sample> = serde_json::from_str(&text)?;
                    klfit::fit_kl_with_centers(&data, loaded, &c)?
                }
                None => klfit::fit_kl(&data, &c)?,
            };
            model.save_json(&dir.join("model.json"))?;
            write_json_pretty(&dir.join("centers.json"), &model.centers)?;
            write_json_pretty(&dir.join("diagnostics.json"), &diag)?;
            println!(
                "klfit: objective {:.6} after {} iterations, converged {}",
                diag.objective, diag.iterations, diag.converged
            );
            if !diag.converged {
                non_converged = Some("gradient ascent stopped on its iteration budget".into());
            }
        }
        "waldboost" => {
            let (ensemble, report) = waldboost::train_adaboost(&data, rounds, prior0)?;
            ensemble.save_json(&dir.join("model.json"))?;
            write_json_pretty(&dir.join("diagnostics.json"), &report)?;
            let final_loss = report.losses.last().copied().unwrap_or(f64::NAN);
            println!("waldboost: {} rounds, final exponential loss {final_loss:.6}", rounds);
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown method `{other}` (expected wkdrf, klfit, or waldboost)"
            )))
        }
    }

    write_manifest(&dir, "train", r.effective())?;
    if let Some(why) = non_converged {
        return Err(Error::NotConverged(format!(
            "{why}; model, diagnostics, and manifest were still written to {}",
            dir.display()
        )));
    }
    Ok(())
}
