use std::collections::BTreeSet;

use seqdet::data::har::{load_har, HarTask};
use seqdet::{Error, Result};

use crate::config::{parse_list, ConfigMap, Resolver};
use crate::manifest::write_manifest;
use crate::HarPrepareArgs;

use super::{check_input, ensure_out_dir, init_threads, write_json_pretty};

const KEYS: &[&str] = &[
    "features",
    "labels",
    "task",
    "feature_indices",
    "positive",
    "negative",
    "seed",
    "out",
    "threads",
];

pub fn run(args: HarPrepareArgs) -> Result<()> {
    let cfg = ConfigMap::load(args.config.as_deref(), KEYS)?;
    let mut r = Resolver::new(cfg);
    let features = r.require::<String>("features", args.features)?;
    let labels = r.require::<String>("labels", args.labels)?;
    let task_name = r.get("task", args.task, "moving".to_string())?;
    let indices: Vec<usize> =
        parse_list("feature_indices", &r.get("feature_indices", args.feature_indices, "1,2,3".to_string())?)?;
    let positive = r.optional::<String>("positive", args.positive)?;
    let negative = r.optional::<String>("negative", args.negative)?;
    let _seed = r.get("seed", args.seed, 0u64)?; // ingestion is deterministic; recorded for uniformity
    let out = r.require::<String>("out", args.out)?;
    let threads = r.get("threads", args.threads, 0)?;
    init_threads(threads)?;

    let task = match task_name.as_str() {
        "moving" => HarTask::new(indices, [1, 2, 3].into(), [4, 5, 6].into())?,
        "updown" => HarTask::new(indices, [2].into(), [3].into())?,
        "custom" => {
            let parse_labels = |key: &str, v: Option<String>| -> Result<BTreeSet<i32>> {
                let Some(v) = v else {
                    return Err(Error::InvalidParameter(format!(
                        "task = custom requires `{key}` (comma-separated activity codes)"
                    )));
                };
                Ok(parse_list::<i32>(key, &v)?.into_iter().collect())
            };
            HarTask::new(indices, parse_labels("positive", positive)?, parse_labels("negative", negative)?)?
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown task `{other}` (expected moving, updown, or custom)"
            )))
        }
    };

    let (data, report) = load_har(&check_input(&features)?, &check_input(&labels)?, &task)?;
    let dir = ensure_out_dir(&out)?;
    data.save_csv(&dir.join("dataset.csv"))?;
    write_json_pretty(&dir.join("ingestion.json"), &report)?;
    write_manifest(&dir, "har-prepare", r.effective())?;
    println!(
        "wrote {} ({} class-0 + {} class-1 rows, dim {}; {} rows outside the task dropped)",
        dir.join("dataset.csv").display(),
        report.rows_class0,
        report.rows_class1,
        data.dim(),
        report.rows_dropped
    );
    Ok(())
}
