//! UCI HAR (smartphone activity) text-file ingestion.
//!
//! Input layout: a features file with one whitespace-separated row of reals
//! per window (X_train.txt style) and a labels file with one integer activity
//! code in 1..6 per row (y_train.txt style). A `HarTask` selects feature
//! columns — 1-BASED, matching the dataset's own documentation — and maps
//! activity codes to the binary classes. Rows whose label is in neither set
//! are dropped but counted in the returned report.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

use super::LabeledDataset;

/// Column/label selection for one binary task over the six-activity files.
#[derive(Debug, Clone)]
pub struct HarTask {
    /// 1-based feature column indices, kept in the given order.
    pub feature_indices: Vec<usize>,
    /// Activity codes mapped to class 1.
    pub positive_labels: BTreeSet<i32>,
    /// Activity codes mapped to class 0.
    pub negative_labels: BTreeSet<i32>,
}

impl HarTask {
    pub fn new(
        feature_indices: Vec<usize>,
        positive_labels: BTreeSet<i32>,
        negative_labels: BTreeSet<i32>,
    ) -> Result<Self> {
        if feature_indices.is_empty() {
            return Err(Error::InvalidParameter("feature_indices must be non-empty".into()));
        }
        if positive_labels.is_empty() || negative_labels.is_empty() {
            return Err(Error::InvalidParameter("label sets must be non-empty".into()));
        }
        if positive_labels.intersection(&negative_labels).next().is_some() {
            return Err(Error::InvalidParameter(
                "positive and negative label sets must be disjoint".into(),
            ));
        }
        Ok(Self { feature_indices, positive_labels, negative_labels })
    }

    /// Moving (1=walking, 2=upstairs, 3=downstairs → class 1) versus static
    /// (4=sitting, 5=standing, 6=laying → class 0), on feature columns 1–3.
    pub fn moving_vs_static() -> Self {
        Self::new(vec![1, 2, 3], [1, 2, 3].into(), [4, 5, 6].into()).expect("valid preset")
    }

    /// Walking upstairs (2 → class 1) versus downstairs (3 → class 0), on
    /// feature columns 1–3.
    pub fn upstairs_vs_downstairs() -> Self {
        Self::new(vec![1, 2, 3], [2].into(), [3].into()).expect("valid preset")
    }
}

/// What happened during ingestion; `rows_dropped` counts labels outside both
/// sets (expected when one binary task reads the six-activity file).
#[derive(Debug, Clone, Serialize)]
pub struct IngestionReport {
    pub rows_total: usize,
    pub rows_class0: usize,
    pub rows_class1: usize,
    pub rows_dropped: usize,
    pub per_label_counts: BTreeMap<i32, usize>,
}

/// Read a features/labels file pair into a `LabeledDataset` according to
/// `task`. Errors name the offending row (1-based) of the offending file.
pub fn load_har(
    features_path: &Path,
    labels_path: &Path,
    task: &HarTask,
) -> Result<(LabeledDataset, IngestionReport)> {
    let labels = read_labels(labels_path)?;
    let floc = |line: usize, msg: String| Error::Parse {
        path: features_path.display().to_string(),
        line,
        msg,
    };

    let reader = BufReader::new(std::fs::File::open(features_path)?);
    let mut class0 = Vec::new();
    let mut class1 = Vec::new();
    let mut report = IngestionReport {
        rows_total: 0,
        rows_class0: 0,
        rows_class1: 0,
        rows_dropped: 0,
        per_label_counts: BTreeMap::new(),
    };
    let mut width: Option<usize> = None;

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let row = report.rows_total;
        report.rows_total += 1;
        if row >= labels.len() {
            return Err(floc(
                lineno,
                format!("more feature rows than the {} labels in {}", labels.len(), labels_path.display()),
            ));
        }

        let tokens: Vec<&str> = line.split_whitespace().collect();
        let w = *width.get_or_insert(tokens.len());
        if tokens.len() != w {
            return Err(floc(lineno, format!("expected {w} columns, got {}", tokens.len())));
        }
        for &i in &task.feature_indices {
            if i == 0 || i > w {
                return Err(floc(lineno, format!("feature index {i} outside 1..={w}")));
            }
        }

        let label = labels[row];
        *report.per_label_counts.entry(label).or_insert(0) += 1;
        let dest = if task.negative_labels.contains(&label) {
            report.rows_class0 += 1;
            &mut class0
        } else if task.positive_labels.contains(&label) {
            report.rows_class1 += 1;
            &mut class1
        } else {
            report.rows_dropped += 1;
            continue;
        };

        let mut coords = Vec::with_capacity(task.feature_indices.len());
        for &i in &task.feature_indices {
            let tok = tokens[i - 1];
            let v: f64 = tok.parse().map_err(|_| {
                floc(lineno, format!("column {i} is not a number: `{tok}`"))
            })?;
            coords.push(v);
        }
        dest.push(coords);
    }

    if report.rows_total != labels.len() {
        return Err(Error::Parse {
            path: labels_path.display().to_string(),
            line: report.rows_total + 1,
            msg: format!(
                "{} labels but {} feature rows",
                labels.len(),
                report.rows_total
            ),
        });
    }
    if class0.is_empty() || class1.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "task selected {} class-0 and {} class-1 rows; both classes must be non-empty",
            class0.len(),
            class1.len()
        )));
    }
    Ok((LabeledDataset::new(class0, class1)?, report))
}

fn read_labels(path: &Path) -> Result<Vec<i32>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut labels = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: i32 = t.parse().map_err(|_| Error::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            msg: format!("label is not an integer: `{t}`"),
        })?;
        if !(1..=6).contains(&v) {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: idx + 1,
                msg: format!("label {v} outside 1..6"),
            });
        }
        labels.push(v);
    }
    Ok(labels)
}
