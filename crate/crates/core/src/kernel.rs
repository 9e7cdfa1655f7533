//! Gaussian kernel machinery: scalar kernel, random center selection,
//! per-sample feature vectors, the center Gram matrix, and the kernel
//! log-ratio model g(x) = Σ_c α_c·k(x, center_c).
//!
//! The kernel is k(x,y) = exp(−‖x−y‖²/σ²). Note the σ² denominator: this
//! crate deliberately does NOT use the common 2σ² convention, so bandwidths
//! from other libraries need rescaling by √2 before they are comparable.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::data::{LabeledDataset, Sample};
use crate::error::{Error, Result};
use crate::numeric::{dot, squared_distance};
use crate::rng;

/// k(x,y) = exp(−‖x−y‖²/σ²), in (0,1].
pub fn gauss_kernel(x: &[f64], y: &[f64], sigma: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    Ok((-squared_distance(x, y) / (sigma * sigma)).exp())
}

/// Draw `c` training samples uniformly without replacement from the pooled
/// classes (class 0 rows first, then class 1). Distinctness is by pool index,
/// so duplicate values may both be chosen if the data contains duplicates.
pub fn pick_centers(data: &LabeledDataset, c: usize, seed: u64) -> Result<Vec<Sample>> {
    let pool = data.m() + data.n();
    if c == 0 || c > pool {
        return Err(Error::InvalidParameter(format!(
            "center count {c} outside 1..={pool} (pooled sample count)"
        )));
    }
    let mut order: Vec<usize> = (0..pool).collect();
    crate::data::shuffle(&mut order, &mut rng::rng_from(seed, &[]));
    let fetch = |i: usize| {
        if i < data.m() { data.class0()[i].clone() } else { data.class1()[i - data.m()].clone() }
    };
    Ok(order[..c].iter().map(|&i| fetch(i)).collect())
}

/// Feature vector φ(x) with entry c = k(x, center_c).
pub fn feature_vec(x: &[f64], centers: &[Sample], sigma: f64) -> Result<Vec<f64>> {
    centers.iter().map(|c| gauss_kernel(x, c, sigma)).collect()
}

/// The learned log-ratio model: centers, bandwidth, and coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelModel {
    pub sigma: f64,
    pub centers: Vec<Sample>,
    pub alpha: Vec<f64>,
}

impl KernelModel {
    pub fn new(sigma: f64, centers: Vec<Sample>, alpha: Vec<f64>) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::InvalidParameter("model needs at least one center".into()));
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        if alpha.len() != centers.len() {
            return Err(Error::DimensionMismatch { expected: centers.len(), got: alpha.len() });
        }
        let dim = centers[0].len();
        if centers.iter().any(|c| c.len() != dim) {
            return Err(Error::InvalidParameter("centers must share one dimension".into()));
        }
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidParameter("alpha must be finite".into()));
        }
        Ok(Self { sigma, centers, alpha })
    }

    pub fn dim(&self) -> usize {
        self.centers[0].len()
    }

    pub fn num_centers(&self) -> usize {
        self.centers.len()
    }

    /// g(x) = αᵀφ(x).
    pub fn log_ratio(&self, x: &[f64]) -> Result<f64> {
        Ok(dot(&self.alpha, &feature_vec(x, &self.centers, self.sigma)?))
    }

    /// JSON document `{sigma, centers: [[...]], alpha: [...]}` with
    /// round-trip-exact floats.
    pub fn save_json(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let doc: Self = serde_json::from_reader(std::fs::File::open(path)?)?;
        Self::new(doc.sigma, doc.centers, doc.alpha)
    }
}

/// Gram matrix of the centers: K(i,j) = k(center_i, center_j). Symmetric with
/// unit diagonal; positive semidefinite up to roundoff.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    entries: DMatrix<f64>,
}

impl KernelMatrix {
    pub fn new(centers: &[Sample], sigma: f64) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::InvalidParameter("kernel matrix needs at least one center".into()));
        }
        let c = centers.len();
        let mut entries = DMatrix::zeros(c, c);
        for i in 0..c {
            entries[(i, i)] = 1.0;
            for j in (i + 1)..c {
                let v = gauss_kernel(&centers[i], &centers[j], sigma)?;
                entries[(i, j)] = v;
                entries[(j, i)] = v;
            }
        }
        Ok(Self { entries })
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// K·α.
    pub fn mul_vec(&self, alpha: &[f64]) -> Vec<f64> {
        let v = nalgebra::DVector::from_column_slice(alpha);
        (&self.entries * v).iter().cloned().collect()
    }

    /// αᵀKα. The matrix is used as-is; only if roundoff drives the form
    /// negative is a 1e-10 diagonal jitter applied to keep the regularizer
    /// nonnegative.
    pub fn quad_form(&self, alpha: &[f64]) -> f64 {
        let q = dot(alpha, &self.mul_vec(alpha));
        if q < 0.0 { q + 1e-10 * dot(alpha, alpha) } else { q }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const E_NEG_1: f64 = 0.36787944117144233;

    #[test]
    fn kernel_hand_values() {
        assert_relative_eq!(gauss_kernel(&[0.3, -1.0], &[0.3, -1.0], 2.0).unwrap(), 1.0);
        // ‖x−y‖² = 2, σ² = 2 ⇒ e^{−1}
        let v = gauss_kernel(&[0.0, 0.0], &[1.0, 1.0], std::f64::consts::SQRT_2).unwrap();
        assert_relative_eq!(v, E_NEG_1, max_relative = 1e-15);
        assert!(gauss_kernel(&[0.0], &[0.0, 1.0], 1.0).is_err());
        assert!(gauss_kernel(&[0.0], &[1.0], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn kernel_is_symmetric_and_in_range(
            x in proptest::collection::vec(-50.0f64..50.0, 3),
            y in proptest::collection::vec(-50.0f64..50.0, 3),
            sigma in 0.1f64..10.0,
        ) {
            let a = gauss_kernel(&x, &y, sigma).unwrap();
            let b = gauss_kernel(&y, &x, sigma).unwrap();
            prop_assert_eq!(a.to_bits(), b.to_bits());
            // mathematically (0, 1]; exactly 0 is reachable for far-apart
            // points via f64 underflow, never anything negative
            prop_assert!((0.0..=1.0).contains(&a));
            if crate::numeric::squared_distance(&x, &y) / (sigma * sigma) < 700.0 {
                prop_assert!(a > 0.0);
            }
        }
    }

    fn toy_data() -> LabeledDataset {
        LabeledDataset::new(
            (0..6).map(|i| vec![i as f64, 1.0]).collect(),
            (0..4).map(|i| vec![i as f64, -1.0]).collect(),
        )
        .unwrap()
    }

    #[test]
    fn pick_centers_draws_without_replacement() {
        let data = toy_data();
        let all = pick_centers(&data, 10, 3).unwrap();
        assert_eq!(all.len(), 10);
        // exhaustive draw is a permutation of the pool
        let mut sorted: Vec<_> = all.iter().map(|s| (s[0] as i64, s[1] as i64)).collect();
        sorted.sort();
        let mut pool: Vec<_> = data
            .class0()
            .iter()
            .chain(data.class1())
            .map(|s| (s[0] as i64, s[1] as i64))
            .collect();
        pool.sort();
        assert_eq!(sorted, pool);

        assert!(pick_centers(&data, 11, 3).is_err());
        assert!(pick_centers(&data, 0, 3).is_err());
        assert_eq!(pick_centers(&data, 5, 9).unwrap(), pick_centers(&data, 5, 9).unwrap());
    }

    #[test]
    fn feature_vec_matches_scalar_kernel() {
        let centers: Vec<Sample> = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![-2.0, 0.5]];
        let x = vec![0.3, -0.7];
        let batch = feature_vec(&x, &centers, 1.3).unwrap();
        for (i, c) in centers.iter().enumerate() {
            assert_relative_eq!(batch[i], gauss_kernel(&x, c, 1.3).unwrap(), max_relative = 1e-15);
        }
        // center hit
        let hit = feature_vec(&centers[1], &centers, 1.3).unwrap();
        assert_eq!(hit[1], 1.0);
        assert!(hit.iter().all(|&v| v > 0.0 && v <= 1.0));
    }

    #[test]
    fn log_ratio_hand_values() {
        let zero = KernelModel::new(1.0, vec![vec![0.0, 0.0], vec![1.0, 1.0]], vec![0.0, 0.0]).unwrap();
        assert_eq!(zero.log_ratio(&[0.4, 0.9]).unwrap(), 0.0);

        let single = KernelModel::new(0.7, vec![vec![2.0, -1.0]], vec![2.5]).unwrap();
        assert_relative_eq!(single.log_ratio(&[2.0, -1.0]).unwrap(), 2.5);

        // two centers distance √2 apart, σ=√2, α=(−1,1), x at the first center:
        // g = −1·1 + 1·e^{−1}
        let m = KernelModel::new(
            std::f64::consts::SQRT_2,
            vec![vec![0.0, 0.0], vec![1.0, 1.0]],
            vec![-1.0, 1.0],
        )
        .unwrap();
        assert_relative_eq!(m.log_ratio(&[0.0, 0.0]).unwrap(), -1.0 + E_NEG_1, max_relative = 1e-15);
    }

    proptest! {
        #[test]
        fn log_ratio_is_linear_in_alpha(
            a1 in proptest::collection::vec(-3.0f64..3.0, 4),
            a2 in proptest::collection::vec(-3.0f64..3.0, 4),
            x in proptest::collection::vec(-2.0f64..2.0, 2),
        ) {
            let centers: Vec<Sample> =
                vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
            let sum: Vec<f64> = a1.iter().zip(&a2).map(|(p, q)| p + q).collect();
            let g = |alpha: Vec<f64>| {
                KernelModel::new(1.0, centers.clone(), alpha).unwrap().log_ratio(&x).unwrap()
            };
            prop_assert!((g(sum) - (g(a1) + g(a2))).abs() <= 1e-12);
        }
    }

    #[test]
    fn kernel_matrix_structure() {
        let one = KernelMatrix::new(&[vec![5.0]], 1.0).unwrap();
        assert_eq!(one.size(), 1);
        assert_eq!(one.entry(0, 0), 1.0);

        let k = KernelMatrix::new(&[vec![0.0, 0.0], vec![1.0, 1.0]], std::f64::consts::SQRT_2).unwrap();
        assert_relative_eq!(k.entry(0, 1), E_NEG_1, max_relative = 1e-15);
        assert_eq!(k.entry(0, 1), k.entry(1, 0));
        assert_eq!(k.entry(0, 0), 1.0);
    }

    #[test]
    fn kernel_matrix_is_positive_semidefinite() {
        let mut rng = crate::rng::rng_from(11, &[]);
        for trial in 0..20 {
            let c = 2 + (trial % 7);
            let centers: Vec<Sample> = (0..c)
                .map(|_| (0..3).map(|_| rand::Rng::random_range(&mut rng, -2.0..2.0)).collect())
                .collect();
            let k = KernelMatrix::new(&centers, 0.8).unwrap();
            let m = DMatrix::from_fn(c, c, |i, j| k.entry(i, j));
            let eig = nalgebra::SymmetricEigen::new(m);
            let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min >= -1e-10, "trial {trial}: min eigenvalue {min}");

            // quadratic form stays essentially nonnegative for random alpha
            let alpha: Vec<f64> =
                (0..c).map(|_| rand::Rng::random_range(&mut rng, -5.0..5.0)).collect();
            let q = k.quad_form(&alpha);
            assert!(q >= -1e-9 * dot(&alpha, &alpha), "q = {q}");
        }
    }

    #[test]
    fn model_json_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let m = KernelModel::new(
            0.30000000000000004,
            vec![vec![1.0 / 3.0, -2.5e-17], vec![7.0, 1e300]],
            vec![-1.2345678901234567, 0.1],
        )
        .unwrap();
        m.save_json(&path).unwrap();
        let back = KernelModel::load_json(&path).unwrap();
        assert_eq!(m, back);
    }
}
