//! Dataset representation and plumbing: labeled two-class feature data, CSV
//! persistence, per-class holdout splitting, synthetic Gaussian-mixture
//! generation (`mixture`), and UCI HAR text-file ingestion (`har`).

pub mod har;
pub mod mixture;

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng;

/// A d-dimensional feature vector. Validity (finiteness, consistent length)
/// is enforced where samples enter the system: dataset construction, file
/// ingestion, and mixture sampling.
pub type Sample = Vec<f64>;

/// Two lists of feature vectors: class 0 (M samples) and class 1 (N samples),
/// all sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    class0: Vec<Sample>,
    class1: Vec<Sample>,
    dim: usize,
}

impl LabeledDataset {
    /// Build a dataset, checking both classes are non-empty and every sample
    /// is finite with a consistent dimension.
    pub fn new(class0: Vec<Sample>, class1: Vec<Sample>) -> Result<Self> {
        if class0.is_empty() || class1.is_empty() {
            return Err(Error::InvalidParameter(
                "both classes must contain at least one sample".into(),
            ));
        }
        let dim = class0[0].len();
        if dim == 0 {
            return Err(Error::InvalidParameter("samples must have dimension >= 1".into()));
        }
        for s in class0.iter().chain(class1.iter()) {
            if s.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: s.len() });
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("samples must be finite".into()));
            }
        }
        Ok(Self { class0, class1, dim })
    }

    pub fn class0(&self) -> &[Sample] {
        &self.class0
    }

    pub fn class1(&self) -> &[Sample] {
        &self.class1
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// M, the class-0 sample count.
    pub fn m(&self) -> usize {
        self.class0.len()
    }

    /// N, the class-1 sample count.
    pub fn n(&self) -> usize {
        self.class1.len()
    }

    /// Split into (train, holdout) with `holdout_fraction` of each class
    /// (rounded) going to the holdout side after a seeded per-class shuffle.
    /// Each side must end up non-empty in both classes.
    pub fn split(&self, holdout_fraction: f64, seed: u64) -> Result<(Self, Self)> {
        if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "holdout_fraction must lie in (0,1), got {holdout_fraction}"
            )));
        }
        let mut train = (Vec::new(), Vec::new());
        let mut hold = (Vec::new(), Vec::new());
        for (class_idx, samples) in [(0u64, &self.class0), (1u64, &self.class1)] {
            let k = (samples.len() as f64 * holdout_fraction).round() as usize;
            if k == 0 || k == samples.len() {
                return Err(Error::InvalidParameter(format!(
                    "holdout_fraction {holdout_fraction} empties one side of a class of {} samples",
                    samples.len()
                )));
            }
            let mut order: Vec<usize> = (0..samples.len()).collect();
            shuffle(&mut order, &mut rng::rng_from(seed, &[class_idx]));
            let (h_idx, t_idx) = order.split_at(k);
            let dst = if class_idx == 0 { (&mut train.0, &mut hold.0) } else { (&mut train.1, &mut hold.1) };
            for &i in t_idx {
                dst.0.push(samples[i].clone());
            }
            for &i in h_idx {
                dst.1.push(samples[i].clone());
            }
        }
        Ok((Self::new(train.0, train.1)?, Self::new(hold.0, hold.1)?))
    }

    /// Write as CSV with header `class,f1,...,fd`; floats use shortest
    /// round-trip formatting so save→load is lossless.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(f, "class")?;
        for j in 1..=self.dim {
            write!(f, ",f{j}")?;
        }
        writeln!(f)?;
        for (label, samples) in [(0, &self.class0), (1, &self.class1)] {
            for s in samples {
                write!(f, "{label}")?;
                for v in s {
                    write!(f, ",{v}")?;
                }
                writeln!(f)?;
            }
        }
        f.flush()?;
        Ok(())
    }

    /// Read the `class,f1,...,fd` format written by `save_csv`.
    pub fn load_csv(path: &Path) -> Result<Self> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let loc = |line: usize, msg: String| Error::Parse {
            path: path.display().to_string(),
            line,
            msg,
        };
        let mut lines = reader.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| loc(1, "empty file".into()))?;
        let header = header?;
        let cols: Vec<&str> = header.trim_end().split(',').collect();
        if cols.first() != Some(&"class") || cols.len() < 2 {
            return Err(loc(1, format!("expected header `class,f1,...`, got `{header}`")));
        }
        let dim = cols.len() - 1;
        let mut class0 = Vec::new();
        let mut class1 = Vec::new();
        for (idx, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let fields: Vec<&str> = line.trim_end().split(',').collect();
            if fields.len() != dim + 1 {
                return Err(loc(lineno, format!("expected {} fields, got {}", dim + 1, fields.len())));
            }
            let mut coords = Vec::with_capacity(dim);
            for (col, tok) in fields[1..].iter().enumerate() {
                let v: f64 = tok.parse().map_err(|_| {
                    loc(lineno, format!("column {} is not a number: `{tok}`", col + 2))
                })?;
                coords.push(v);
            }
            match fields[0] {
                "0" => class0.push(coords),
                "1" => class1.push(coords),
                other => {
                    return Err(loc(lineno, format!("class must be 0 or 1, got `{other}`")));
                }
            }
        }
        Self::new(class0, class1)
    }
}

/// Fisher–Yates shuffle driven by the given generator.
pub(crate) fn shuffle<T>(xs: &mut [T], rng: &mut impl rand::Rng) {
    for i in (1..xs.len()).rev() {
        let j = rng.random_range(0..=i);
        xs.swap(i, j);
    }
}
