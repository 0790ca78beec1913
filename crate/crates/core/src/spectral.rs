//! Eigenstructure of the Markov matrix through its symmetric conjugate
//! `M_s = D^{1/2} M D^{-1/2}`, exposing the bi-orthonormal left/right
//! eigenvector pairs and the stationary distribution.

use ndarray::{Array1, Array2};

use crate::eigh::{dense_symmetric_eigh, lanczos_symmetric_top};
use crate::error::{DiffmapError, Result};
use crate::kernel::MarkovMatrix;

/// Largest size for which the full dense solver is used; above this a
/// Lanczos iteration computes only the requested top-m pairs.
pub const DENSE_SOLVER_LIMIT: usize = 2000;

const REDUCIBILITY_THRESHOLD: f64 = 1.0 - 1e-8;

/// Top-m eigenpairs of a Markov matrix.
///
/// Eigenvalues are sorted descending with `lambda_0 = 1`. Right eigenvectors
/// `psi_j` and left eigenvectors `phi_j` are stored as columns, normalized so
/// that `psi_0` is the all-ones vector and `phi_0` is a probability vector.
/// Each `psi_j` has its largest-magnitude entry positive.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Array1<f64>,
    right_vectors: Array2<f64>,
    left_vectors: Array2<f64>,
    degrees: Array1<f64>,
}

impl SpectralDecomposition {
    pub fn n(&self) -> usize {
        self.right_vectors.nrows()
    }

    /// Number of computed eigenpairs.
    pub fn m(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &Array1<f64> {
        &self.eigenvalues
    }

    /// Right eigenvectors psi_j, one per column.
    pub fn right_vectors(&self) -> &Array2<f64> {
        &self.right_vectors
    }

    /// Left eigenvectors phi_j, one per column.
    pub fn left_vectors(&self) -> &Array2<f64> {
        &self.left_vectors
    }

    pub fn degrees(&self) -> &Array1<f64> {
        &self.degrees
    }

    pub fn psi(&self, j: usize) -> ndarray::ArrayView1<'_, f64> {
        self.right_vectors.column(j)
    }

    pub fn phi(&self, j: usize) -> ndarray::ArrayView1<'_, f64> {
        self.left_vectors.column(j)
    }
}

/// Computes the top-m eigenpairs of `M` via the symmetric conjugate.
pub fn decompose(markov: &MarkovMatrix, m: usize) -> Result<SpectralDecomposition> {
    let solver = if markov.n() <= DENSE_SOLVER_LIMIT {
        SolverKind::Dense
    } else {
        SolverKind::Lanczos
    };
    decompose_with(markov, m, solver)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Dense,
    Lanczos,
}

/// Same as [`decompose`] with an explicit solver choice. Both solvers must
/// agree within 1e-8 on sizes where both apply.
pub fn decompose_with(
    markov: &MarkovMatrix,
    m: usize,
    solver: SolverKind,
) -> Result<SpectralDecomposition> {
    let n = markov.n();
    if m == 0 || m > n {
        return Err(DiffmapError::Dimension(format!(
            "requested m = {m} eigenpairs for an n = {n} matrix"
        )));
    }

    // M_s[i,j] = sqrt(d_i) M[i,j] / sqrt(d_j); symmetric because L is.
    let degrees = markov.degrees().clone();
    let sqrt_d = degrees.mapv(f64::sqrt);
    let ms = {
        let mut ms = markov.matrix().clone();
        for i in 0..n {
            for j in 0..n {
                ms[[i, j]] *= sqrt_d[i] / sqrt_d[j];
            }
        }
        // Kill rounding asymmetry so the symmetric solvers see one value.
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (ms[[i, j]] + ms[[j, i]]);
                ms[[i, j]] = v;
                ms[[j, i]] = v;
            }
        }
        ms
    };

    let (values, vectors) = match solver {
        SolverKind::Dense => {
            let (vals, vecs) = dense_symmetric_eigh(&ms)?;
            (
                vals.slice(ndarray::s![..m]).to_owned(),
                vecs.slice(ndarray::s![.., ..m]).to_owned(),
            )
        }
        SolverKind::Lanczos => lanczos_symmetric_top(|v| ms.dot(v), n, m, 1e-10)?,
    };

    if (values[0] - 1.0).abs() > 1e-10 {
        return Err(DiffmapError::Solver(format!(
            "leading eigenvalue {} is not 1 within 1e-10",
            values[0]
        )));
    }
    if m > 1 && values[1] > REDUCIBILITY_THRESHOLD {
        return Err(DiffmapError::ReducibleGraph { lambda1: values[1] });
    }

    let total_degree: f64 = degrees.iter().sum();
    let mut right = Array2::zeros((n, m));
    let mut left = Array2::zeros((n, m));

    // j = 0: fixed normalization psi_0 = 1, phi_0 = d / sum(d).
    for i in 0..n {
        right[[i, 0]] = 1.0;
        left[[i, 0]] = degrees[i] / total_degree;
    }

    // Scaling by the stationary weights pi = d / sum(d) (not raw degrees)
    // keeps psi_0 = 1 and the weighted-L2 distance identity exact.
    let sqrt_total = total_degree.sqrt();
    for j in 1..m {
        for i in 0..n {
            right[[i, j]] = vectors[[i, j]] * sqrt_total / sqrt_d[i];
            left[[i, j]] = vectors[[i, j]] * sqrt_d[i] / sqrt_total;
        }
        // Sign convention: largest-|entry| of psi_j positive, ties at the
        // lowest index.
        let mut best = 0;
        let mut best_abs = right[[0, j]].abs();
        for i in 1..n {
            let a = right[[i, j]].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if right[[best, j]] < 0.0 {
            for i in 0..n {
                right[[i, j]] = -right[[i, j]];
                left[[i, j]] = -left[[i, j]];
            }
        }
    }

    Ok(SpectralDecomposition {
        eigenvalues: values,
        right_vectors: right,
        left_vectors: left,
        degrees,
    })
}

/// The stationary distribution phi_0 = degrees / sum(degrees).
pub fn stationary_distribution(decomp: &SpectralDecomposition) -> Array1<f64> {
    decomp.left_vectors.column(0).to_owned()
}

/// t-step transition distribution reconstructed in the eigenbasis.
#[derive(Debug, Clone)]
pub struct TransitionDistribution {
    pub probabilities: Array1<f64>,
    /// True when the decomposition holds fewer than n eigenpairs, so the
    /// reconstruction drops modes.
    pub truncated: bool,
}

/// p(t, .|x_i) = phi_0 + sum_{j>=1} psi_j(x_i) lambda_j^t phi_j.
///
/// `steps = 0` returns the indicator at `i`.
pub fn transition_probability(
    decomp: &SpectralDecomposition,
    i: usize,
    steps: usize,
) -> Result<TransitionDistribution> {
    let n = decomp.n();
    if i >= n {
        return Err(DiffmapError::Range(format!(
            "point index {i} out of range for n = {n}"
        )));
    }
    if steps == 0 {
        let mut e = Array1::zeros(n);
        e[i] = 1.0;
        return Ok(TransitionDistribution {
            probabilities: e,
            truncated: false,
        });
    }
    let m = decomp.m();
    let mut p = decomp.left_vectors.column(0).to_owned();
    for j in 1..m {
        let w = decomp.right_vectors[[i, j]] * decomp.eigenvalues[j].powi(steps as i32);
        for y in 0..n {
            p[y] += w * decomp.left_vectors[[y, j]];
        }
    }
    Ok(TransitionDistribution {
        probabilities: p,
        truncated: m < n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{build_affinity, normalize_markov, AffinityGraph, KernelConfig};
    use ndarray::array;

    pub(crate) fn markov_from_affinity(l: Array2<f64>) -> MarkovMatrix {
        let n = l.nrows();
        let degrees = Array1::from_shape_fn(n, |i| l.row(i).sum());
        let graph = AffinityGraph::from_parts_for_tests(l, degrees);
        normalize_markov(&graph).unwrap()
    }

    fn seeded_decomposition(n: usize, seed: u64) -> (MarkovMatrix, SpectralDecomposition) {
        let c = crate::datasets::test_cloud(n, 2, seed);
        let g = build_affinity(&c, &KernelConfig::gaussian(1.0)).unwrap();
        let m = normalize_markov(&g).unwrap();
        let d = decompose(&m, n).unwrap();
        (m, d)
    }

    #[test]
    fn two_point_chain_analytic() {
        let a = 0.5;
        let m = markov_from_affinity(array![[1.0, a], [a, 1.0]]);
        let d = decompose(&m, 2).unwrap();
        assert!((d.eigenvalues()[0] - 1.0).abs() < 1e-12);
        assert!((d.eigenvalues()[1] - 1.0 / 3.0).abs() < 1e-12);
        // psi_1 proportional to (1, -1)
        let r = d.psi(1)[0] / d.psi(1)[1];
        assert!((r + 1.0).abs() < 1e-10);
    }

    #[test]
    fn rank_one_stochastic() {
        let m = markov_from_affinity(Array2::ones((3, 3)));
        let d = decompose(&m, 3).unwrap();
        assert!((d.eigenvalues()[0] - 1.0).abs() < 1e-12);
        assert!(d.eigenvalues()[1].abs() < 1e-12);
        assert!(d.eigenvalues()[2].abs() < 1e-12);
        assert!(d.psi(0).iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn bi_orthonormality_on_seeded_cloud() {
        let (_, d) = seeded_decomposition(50, 3);
        for i in 0..50 {
            for j in 0..50 {
                let dot = d.phi(i).dot(&d.psi(j));
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (dot - expected).abs() < 1e-10,
                    "<phi_{i}, psi_{j}> = {dot}"
                );
            }
        }
    }

    #[test]
    fn eigenvector_residuals() {
        let (m, d) = seeded_decomposition(40, 8);
        for j in 0..d.m() {
            let lambda = d.eigenvalues()[j];
            let mpsi = m.matrix().dot(&d.psi(j).to_owned());
            let phim = d.phi(j).to_owned().dot(m.matrix());
            for i in 0..40 {
                assert!((mpsi[i] - lambda * d.psi(j)[i]).abs() < 1e-8);
                assert!((phim[i] - lambda * d.phi(j)[i]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn conjugation_consistency() {
        // phi_j(i) == psi_j(i) * d_i up to one global scalar per j.
        let (_, d) = seeded_decomposition(30, 5);
        for j in 0..d.m() {
            let mut scale = None;
            for i in 0..30 {
                let psi_d = d.psi(j)[i] * d.degrees()[i];
                if psi_d.abs() < 1e-12 {
                    continue;
                }
                let r = d.phi(j)[i] / psi_d;
                match scale {
                    None => scale = Some(r),
                    Some(s) => assert!(
                        ((r - s) / s).abs() < 1e-8,
                        "mode {j}: ratio {r} vs {s}"
                    ),
                }
            }
        }
    }

    #[test]
    fn stationary_uniform_degrees() {
        let m = markov_from_affinity(Array2::ones((4, 4)));
        let d = decompose(&m, 4).unwrap();
        let pi = stationary_distribution(&d);
        for v in pi.iter() {
            assert!((v - 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn stationary_equal_degrees_two_points() {
        let m = markov_from_affinity(array![[1.0, 0.5], [0.5, 1.0]]);
        let d = decompose(&m, 2).unwrap();
        let pi = stationary_distribution(&d);
        assert!((pi[0] - 0.5).abs() < 1e-14);
        assert!((pi[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn stationary_matches_degree_oracle_and_is_invariant() {
        let (m, d) = seeded_decomposition(35, 17);
        let pi = stationary_distribution(&d);
        let total: f64 = d.degrees().iter().sum();
        for i in 0..35 {
            assert!((pi[i] - d.degrees()[i] / total).abs() < 1e-12);
        }
        let pim = pi.dot(m.matrix());
        for i in 0..35 {
            assert!((pim[i] - pi[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn transition_zero_steps_is_indicator() {
        let (_, d) = seeded_decomposition(10, 2);
        let t = transition_probability(&d, 3, 0).unwrap();
        for i in 0..10 {
            assert_eq!(t.probabilities[i], if i == 3 { 1.0 } else { 0.0 });
        }
        assert!(!t.truncated);
    }

    #[test]
    fn transition_matches_matrix_power_oracle() {
        let (m, d) = seeded_decomposition(25, 13);
        let mut power = Array2::eye(25);
        for steps in 1..=6usize {
            power = power.dot(m.matrix());
            for i in 0..25 {
                let t = transition_probability(&d, i, steps).unwrap();
                assert!(!t.truncated);
                let s: f64 = t.probabilities.sum();
                assert!((s - 1.0).abs() < 1e-8);
                for y in 0..25 {
                    assert!(
                        (t.probabilities[y] - power[[i, y]]).abs() < 1e-10,
                        "steps {steps}, ({i},{y})"
                    );
                }
            }
        }
    }

    #[test]
    fn transition_converges_to_stationary() {
        let (_, d) = seeded_decomposition(20, 4);
        assert!(d.eigenvalues()[1] <= 0.9, "test premise: lambda_1 <= 0.9");
        let pi = stationary_distribution(&d);
        let t = transition_probability(&d, 0, 10_000).unwrap();
        for i in 0..20 {
            assert!((t.probabilities[i] - pi[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn sign_convention_is_applied() {
        let (_, d) = seeded_decomposition(15, 6);
        for j in 0..d.m() {
            let col = d.psi(j);
            let (mut best, mut best_abs) = (0, col[0].abs());
            for i in 1..15 {
                if col[i].abs() > best_abs {
                    best_abs = col[i].abs();
                    best = i;
                }
            }
            assert!(col[best] > 0.0, "mode {j}");
        }
    }

    #[test]
    fn disconnected_graph_is_reducible() {
        // Two components: lambda_1 = 1.
        let l = array![
            [1.0, 0.9, 0.0, 0.0],
            [0.9, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.9],
            [0.0, 0.0, 0.9, 1.0]
        ];
        let m = markov_from_affinity(l);
        match decompose(&m, 4) {
            Err(DiffmapError::ReducibleGraph { .. }) => {}
            other => panic!("expected ReducibleGraphError, got {other:?}"),
        }
    }

    #[test]
    fn dense_and_lanczos_agree() {
        let c = crate::datasets::test_cloud(300, 2, 21);
        let g = build_affinity(&c, &KernelConfig::gaussian(1.5)).unwrap();
        let m = normalize_markov(&g).unwrap();
        let dd = decompose_with(&m, 6, SolverKind::Dense).unwrap();
        let dl = decompose_with(&m, 6, SolverKind::Lanczos).unwrap();
        for j in 0..6 {
            assert!(
                (dd.eigenvalues()[j] - dl.eigenvalues()[j]).abs() < 1e-8,
                "mode {j}: {} vs {}",
                dd.eigenvalues()[j],
                dl.eigenvalues()[j]
            );
            for i in 0..300 {
                assert!((dd.psi(j)[i] - dl.psi(j)[i]).abs() < 1e-6);
            }
        }
    }
}
