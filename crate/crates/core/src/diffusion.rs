//! Diffusion maps, diffusion distances and the optimal truncated kernel.

use ndarray::{Array1, Array2};

use crate::error::{DiffmapError, Result};
use crate::kernel::MarkovMatrix;
use crate::spectral::SpectralDecomposition;

/// lambda^t with the convention that negative or zero eigenvalues are only
/// admissible at integer times (fractional powers would be NaN).
pub fn eig_pow(lambda: f64, t: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(1.0);
    }
    if lambda > 0.0 {
        Ok(lambda.powf(t))
    } else if t.fract() == 0.0 {
        Ok(lambda.powi(t as i32))
    } else {
        Err(DiffmapError::Range(format!(
            "eigenvalue {lambda} <= 0 with non-integer time {t}"
        )))
    }
}

/// The embedding `Psi_t(x_i) = (lambda_j^t psi_j(x_i))_{j=1..k}` at all points.
#[derive(Debug, Clone)]
pub struct DiffusionMap {
    pub t: f64,
    pub k: usize,
    /// n x k coordinates; row i is Psi_t(x_i).
    pub coords: Array2<f64>,
}

pub fn diffusion_map(decomp: &SpectralDecomposition, t: f64, k: usize) -> Result<DiffusionMap> {
    let m = decomp.m();
    if k == 0 || k > m - 1 {
        return Err(DiffmapError::Dimension(format!(
            "embedding dimension k = {k} must satisfy 1 <= k <= m-1 = {}",
            m - 1
        )));
    }
    if t < 0.0 {
        return Err(DiffmapError::Range(format!("time t = {t} must be >= 0")));
    }
    let n = decomp.n();
    let mut coords = Array2::zeros((n, k));
    for j in 1..=k {
        let w = eig_pow(decomp.eigenvalues()[j], t)?;
        for i in 0..n {
            coords[[i, j - 1]] = w * decomp.psi(j)[i];
        }
    }
    Ok(DiffusionMap { t, k, coords })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceMethod {
    /// Weighted L2 distance between explicitly propagated t-step
    /// distributions (matrix powers of M); requires a full decomposition
    /// and integer t.
    Direct,
    /// The eigen-sum identity `sum_j lambda_j^{2t} (psi_j(i) - psi_j(j))^2`.
    Spectral,
}

/// Diffusion distance `D_t(x_i, x_j)` (the square root; squared values are
/// used internally).
pub fn diffusion_distance(
    decomp: &SpectralDecomposition,
    markov: Option<&MarkovMatrix>,
    i: usize,
    j: usize,
    t: f64,
    method: DistanceMethod,
) -> Result<f64> {
    let n = decomp.n();
    if i >= n || j >= n {
        return Err(DiffmapError::Range(format!(
            "indices ({i}, {j}) out of range for n = {n}"
        )));
    }
    match method {
        DistanceMethod::Spectral => {
            let mut acc = 0.0;
            for l in 1..decomp.m() {
                let w = eig_pow(decomp.eigenvalues()[l], 2.0 * t)?;
                let d = decomp.psi(l)[i] - decomp.psi(l)[j];
                acc += w * d * d;
            }
            Ok(acc.sqrt())
        }
        DistanceMethod::Direct => {
            let markov = markov.ok_or_else(|| {
                DiffmapError::Range("direct method requires the Markov matrix".into())
            })?;
            if decomp.m() != n {
                return Err(DiffmapError::Dimension(
                    "direct method requires a full decomposition (m = n)".into(),
                ));
            }
            if t < 0.0 || t.fract() != 0.0 {
                return Err(DiffmapError::Range(format!(
                    "direct method requires integer t, got {t}"
                )));
            }
            let steps = t as usize;
            let mut pi = indicator(n, i);
            let mut pj = indicator(n, j);
            for _ in 0..steps {
                pi = pi.dot(markov.matrix());
                pj = pj.dot(markov.matrix());
            }
            let phi0 = decomp.phi(0);
            let mut acc = 0.0;
            for y in 0..n {
                let d = pi[y] - pj[y];
                acc += d * d / phi0[y];
            }
            Ok(acc.sqrt())
        }
    }
}

fn indicator(n: usize, i: usize) -> Array1<f64> {
    let mut e = Array1::zeros(n);
    e[i] = 1.0;
    e
}

/// Rank-k truncation of the transition kernel,
/// `p_hat(y, t | x) = phi_0(y) + sum_{j=1}^k lambda_j^t psi_j(x) phi_j(y)`.
#[derive(Debug, Clone, Copy)]
pub struct TruncatedKernel {
    pub k: usize,
    pub t: f64,
}

impl TruncatedKernel {
    pub fn new(decomp: &SpectralDecomposition, k: usize, t: f64) -> Result<Self> {
        if k == 0 || k > decomp.m() - 1 {
            return Err(DiffmapError::Dimension(format!(
                "rank k = {k} must satisfy 1 <= k <= m-1 = {}",
                decomp.m() - 1
            )));
        }
        Ok(Self { k, t })
    }

    /// Rank-k approximation of p(t, .|x_i). Entries may be slightly negative
    /// from truncation and are not clipped.
    pub fn evaluate(&self, decomp: &SpectralDecomposition, i: usize) -> Result<Array1<f64>> {
        let n = decomp.n();
        if i >= n {
            return Err(DiffmapError::Range(format!(
                "point index {i} out of range for n = {n}"
            )));
        }
        let mut p = decomp.phi(0).to_owned();
        for j in 1..=self.k {
            let w = decomp.psi(j)[i] * eig_pow(decomp.eigenvalues()[j], self.t)?;
            for y in 0..n {
                p[y] += w * decomp.phi(j)[y];
            }
        }
        Ok(p)
    }
}

pub fn truncated_kernel(
    decomp: &SpectralDecomposition,
    k: usize,
    t: f64,
    i: usize,
) -> Result<Array1<f64>> {
    TruncatedKernel::new(decomp, k, t)?.evaluate(decomp, i)
}

/// The relative truncation error scale `(lambda_{k+1} / lambda_k)^t`.
pub fn truncation_error_ratio(decomp: &SpectralDecomposition, k: usize, t: f64) -> Result<f64> {
    if k + 1 > decomp.m() - 1 {
        return Err(DiffmapError::Dimension(format!(
            "need k+1 = {} <= m-1 = {}",
            k + 1,
            decomp.m() - 1
        )));
    }
    let lk = decomp.eigenvalues()[k];
    let lk1 = decomp.eigenvalues()[k + 1];
    if lk <= 0.0 {
        return Err(DiffmapError::UndefinedRatio {
            index: k,
            value: lk,
        });
    }
    Ok((lk1 / lk).powf(t))
}
