//! Affinity matrix construction and Markov normalization.
//!
//! The affinity between two points is `exp(-||x_i - x_j||^2 / (2 eps))` for
//! the Gaussian family. The self-tuning variant replaces the global scale by
//! the product of per-point local scales taken from the k-th nearest
//! neighbor. Rows of the Markov matrix `M = D^{-1} L` sum to one.

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::cloud::{sq_dist, PointCloud};
use crate::error::{DiffmapError, Result};

pub const DEFAULT_SELF_TUNING_K: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    Gaussian,
    SelfTuning,
}

#[derive(Debug, Clone)]
pub struct KernelConfig {
    /// Squared length scale; doubles as the random-walk time step.
    pub epsilon: f64,
    pub family: KernelFamily,
    /// Neighbor rank used for the local scale of the self-tuning kernel.
    pub self_tuning_k: usize,
    /// Entries strictly below this value are zeroed after kernel evaluation.
    pub sparsify_tol: f64,
}

impl KernelConfig {
    pub fn gaussian(epsilon: f64) -> Self {
        Self {
            epsilon,
            family: KernelFamily::Gaussian,
            self_tuning_k: DEFAULT_SELF_TUNING_K,
            sparsify_tol: 0.0,
        }
    }

    pub fn self_tuning(k: usize) -> Self {
        Self {
            epsilon: 1.0,
            family: KernelFamily::SelfTuning,
            self_tuning_k: k,
            sparsify_tol: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(DiffmapError::Range(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.sparsify_tol >= 0.0 && self.sparsify_tol < 1.0) {
            return Err(DiffmapError::Range(format!(
                "sparsify_tol must lie in [0, 1), got {}",
                self.sparsify_tol
            )));
        }
        if self.family == KernelFamily::SelfTuning && self.self_tuning_k == 0 {
            return Err(DiffmapError::Range("self_tuning_k must be >= 1".into()));
        }
        Ok(())
    }
}

/// Symmetric nonnegative kernel matrix together with its degree vector.
#[derive(Debug, Clone)]
pub struct AffinityGraph {
    matrix: Array2<f64>,
    degrees: Array1<f64>,
}

impl AffinityGraph {
    #[cfg(test)]
    pub(crate) fn from_parts_for_tests(matrix: Array2<f64>, degrees: Array1<f64>) -> Self {
        AffinityGraph { matrix, degrees }
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn degrees(&self) -> &Array1<f64> {
        &self.degrees
    }
}

/// Row-stochastic transition matrix `M = D^{-1} L`.
#[derive(Debug, Clone)]
pub struct MarkovMatrix {
    matrix: Array2<f64>,
    degrees: Array1<f64>,
}

impl MarkovMatrix {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn degrees(&self) -> &Array1<f64> {
        &self.degrees
    }
}

/// Builds the pairwise affinity matrix for a point cloud.
///
/// Rows are assembled in parallel; each entry is a function of one (i, j)
/// pair only, so the result is bitwise independent of the thread count.
/// Degrees are fixed sequential-order row sums.
pub fn build_affinity(cloud: &PointCloud, config: &KernelConfig) -> Result<AffinityGraph> {
    config.validate()?;
    let n = cloud.n();
    let pts = cloud.points();

    let scales: Option<Vec<f64>> = match config.family {
        KernelFamily::Gaussian => None,
        KernelFamily::SelfTuning => {
            let k = config.self_tuning_k.min(n - 1);
            let sigmas: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut d2: Vec<f64> =
                        (0..n).map(|j| sq_dist(pts.row(i), pts.row(j))).collect();
                    d2.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
                    d2[k] // d2[0] == 0 is the point itself
                })
                .collect();
            if sigmas.iter().any(|&s| s <= 0.0) {
                return Err(DiffmapError::ZeroScale);
            }
            Some(sigmas)
        }
    };

    let tol = config.sparsify_tol;
    let eps = config.epsilon;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    let d2 = sq_dist(pts.row(i), pts.row(j));
                    let denom = match &scales {
                        None => 2.0 * eps,
                        Some(s) => 2.0 * s[i] * s[j],
                    };
                    let v = (-d2 / denom).exp();
                    if v < tol {
                        0.0
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect();

    let mut matrix = Array2::zeros((n, n));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            matrix[[i, j]] = v;
        }
    }
    // Entries are symmetric functions of (i, j); mirror the upper triangle so
    // L = L^T holds exactly regardless of rounding.
    for i in 0..n {
        for j in (i + 1)..n {
            let v = matrix[[i, j]];
            matrix[[j, i]] = v;
        }
    }

    let mut degrees = Array1::zeros(n);
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            acc += matrix[[i, j]];
        }
        if acc <= 0.0 {
            return Err(DiffmapError::IsolatedPoint { index: i });
        }
        degrees[i] = acc;
    }

    Ok(AffinityGraph { matrix, degrees })
}

/// Normalizes an affinity graph into the row-stochastic Markov matrix.
pub fn normalize_markov(graph: &AffinityGraph) -> Result<MarkovMatrix> {
    let n = graph.n();
    for i in 0..n {
        let d = graph.degrees[i];
        if !(d > 0.0) {
            return Err(DiffmapError::DegenerateDegree {
                index: i,
                degree: d,
            });
        }
    }
    let mut matrix = graph.matrix.clone();
    for i in 0..n {
        let d = graph.degrees[i];
        for j in 0..n {
            matrix[[i, j]] /= d;
        }
    }
    Ok(MarkovMatrix {
        matrix,
        degrees: graph.degrees.clone(),
    })
}

#[derive(Debug, Clone, Copy)]
pub enum EpsilonRule {
    /// Median of all n(n-1)/2 squared pairwise distances.
    MedianSqDist,
    /// Mean over i of the squared distance to the k-th nearest neighbor.
    KnnScale(usize),
}

/// Picks a kernel scale from the data.
pub fn select_epsilon(cloud: &PointCloud, rule: EpsilonRule) -> Result<f64> {
    let n = cloud.n();
    let pts = cloud.points();
    let value = match rule {
        EpsilonRule::MedianSqDist => {
            let mut d2: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
            for i in 0..n {
                for j in (i + 1)..n {
                    d2.push(sq_dist(pts.row(i), pts.row(j)));
                }
            }
            d2.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
            let m = d2.len();
            if m % 2 == 1 {
                d2[m / 2]
            } else {
                0.5 * (d2[m / 2 - 1] + d2[m / 2])
            }
        }
        EpsilonRule::KnnScale(k) => {
            if k == 0 || k >= n {
                return Err(DiffmapError::Range(format!(
                    "knn_scale rank k = {k} must satisfy 1 <= k <= n-1 = {}",
                    n - 1
                )));
            }
            let mut acc = 0.0;
            for i in 0..n {
                let mut d2: Vec<f64> = (0..n).map(|j| sq_dist(pts.row(i), pts.row(j))).collect();
                d2.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
                acc += d2[k];
            }
            acc / n as f64
        }
    };
    if value <= 0.0 {
        return Err(DiffmapError::ZeroScale);
    }
    Ok(value)
}
