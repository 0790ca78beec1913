//! Symmetric eigensolvers: a dense solver backed by faer and a Lanczos
//! iteration with full reorthogonalization for large matrices.

use faer::{Mat, Side};
use ndarray::{Array1, Array2};

use crate::error::{DiffmapError, Result};

/// Full eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues sorted descending and the matching orthonormal
/// eigenvectors as columns.
pub(crate) fn dense_symmetric_eigh(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    // Run the factorization sequentially: parallel reductions reassociate
    // floating-point sums, so the last bits of the eigenvalues would
    // otherwise vary with the thread count.
    static PIN_SEQUENTIAL: std::sync::Once = std::sync::Once::new();
    PIN_SEQUENTIAL.call_once(|| faer::set_global_parallelism(faer::Par::Seq));

    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    let m = Mat::from_fn(n, n, |i, j| a[[i, j]]);
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| DiffmapError::Solver(format!("dense symmetric eigensolver: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    // faer returns ascending order; flip to descending.
    let mut values = Array1::zeros(n);
    let mut vectors = Array2::zeros((n, n));
    for j in 0..n {
        let src = n - 1 - j;
        values[j] = s[src];
        for i in 0..n {
            vectors[[i, j]] = u[(i, src)];
        }
    }
    Ok((values, vectors))
}

/// Top-k eigenpairs of a symmetric operator given through its
/// matrix-vector product, via Lanczos with full reorthogonalization.
///
/// "Top" means largest algebraic eigenvalues. The starting vector is fixed,
/// so the iteration is deterministic.
pub(crate) fn lanczos_symmetric_top<F>(
    matvec: F,
    n: usize,
    k: usize,
    tol: f64,
) -> Result<(Array1<f64>, Array2<f64>)>
where
    F: Fn(&Array1<f64>) -> Array1<f64>,
{
    assert!(k >= 1 && k <= n);
    let max_dim = n.min((4 * k + 40).max(80));

    // Deterministic generic start vector.
    let mut v = Array1::from_shape_fn(n, |i| (1.3 * (i as f64 + 1.0)).sin());
    let norm = v.dot(&v).sqrt();
    v.mapv_inplace(|x| x / norm);

    let mut basis: Vec<Array1<f64>> = vec![v];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();

    loop {
        let j = alphas.len();
        let vj = basis[j].clone();
        let mut w = matvec(&vj);
        let alpha = vj.dot(&w);
        alphas.push(alpha);
        w.scaled_add(-alpha, &vj);
        if j > 0 {
            let b = betas[j - 1];
            w.scaled_add(-b, &basis[j - 1]);
        }
        // Full reorthogonalization, two passes.
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&w);
                w.scaled_add(-c, q);
            }
        }
        let beta = w.dot(&w).sqrt();

        let dim = alphas.len();
        if dim >= k.max(2) {
            let (theta, s) = tridiag_eigh(&alphas, &betas)?;
            // Residual bound |beta * s[last, j]| for the top-k Ritz pairs.
            let mut converged = true;
            for jj in 0..k.min(dim) {
                let resid = (beta * s[[dim - 1, jj]]).abs();
                if resid > tol * theta[jj].abs().max(1.0) {
                    converged = false;
                    break;
                }
            }
            if (converged && dim >= k) || dim == max_dim || beta < 1e-14 || dim == n {
                if !(converged || beta < 1e-14 || dim == n) {
                    return Err(DiffmapError::Solver(format!(
                        "Lanczos did not converge in {dim} iterations"
                    )));
                }
                let take = k.min(dim);
                let mut values = Array1::zeros(take);
                let mut vectors = Array2::zeros((n, take));
                for jj in 0..take {
                    values[jj] = theta[jj];
                    for (q, row) in basis.iter().enumerate().take(dim) {
                        let c = s[[q, jj]];
                        for i in 0..n {
                            vectors[[i, jj]] += c * row[i];
                        }
                    }
                }
                return Ok((values, vectors));
            }
        }

        betas.push(beta);
        basis.push(w.mapv(|x| x / beta));
    }
}

/// Eigendecomposition of the symmetric tridiagonal Lanczos matrix, sorted
/// descending. Sizes here are tiny, so a dense solve is fine.
fn tridiag_eigh(alphas: &[f64], betas: &[f64]) -> Result<(Array1<f64>, Array2<f64>)> {
    let d = alphas.len();
    let mut t = Array2::zeros((d, d));
    for i in 0..d {
        t[[i, i]] = alphas[i];
        if i + 1 < d {
            t[[i, i + 1]] = betas[i];
            t[[i + 1, i]] = betas[i];
        }
    }
    dense_symmetric_eigh(&t)
}
