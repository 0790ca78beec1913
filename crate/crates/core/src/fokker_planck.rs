//! Finite-difference oracle for the backward operator
//! `H_b psi = Laplacian(psi) - 2 grad(U) . grad(psi)` with reflecting
//! (zero-flux) boundaries, and spectrum comparison against graph eigenvalues.
//!
//! The discretization is a flux form on cell-centered nodes: the flux across
//! the face between cells i and j carries the weight `exp(-(U_i + U_j))`,
//! i.e. the Boltzmann factor of the face midpoint to second order. This keeps
//! two structural identities exact at machine precision: the constant vector
//! is in the kernel, and `diag(e^{-2U}) H` is symmetric (detailed balance).
//! Zero-flux boundaries come out of simply having no face there.

use ndarray::Array2;
use serde::Serialize;

use crate::eigh::dense_symmetric_eigh;
use crate::error::{DiffmapError, Result};
use crate::potential::Potential;
use crate::spectral::SpectralDecomposition;

pub const MIN_NODES_PER_AXIS: usize = 16;

/// One uniform grid axis; cells are centered at `lo + (i + 1/2) h`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub nodes: usize,
}

impl GridAxis {
    pub fn new(lo: f64, hi: f64, nodes: usize) -> Result<Self> {
        if !(hi > lo) {
            return Err(DiffmapError::Grid(format!(
                "degenerate axis: hi = {hi} <= lo = {lo}"
            )));
        }
        if nodes < MIN_NODES_PER_AXIS {
            return Err(DiffmapError::Grid(format!(
                "need at least {MIN_NODES_PER_AXIS} nodes per axis, got {nodes}"
            )));
        }
        Ok(Self { lo, hi, nodes })
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / self.nodes as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.step()
    }
}

/// Potential values on a 1D or 2D tensor grid, with an optional mask that
/// carves a non-rectangular domain out of the bounding box.
#[derive(Debug, Clone)]
pub struct PotentialGrid {
    axes: Vec<GridAxis>,
    u: Vec<f64>,
    mask: Option<Vec<bool>>,
}

impl PotentialGrid {
    pub fn new(axes: Vec<GridAxis>, u: Vec<f64>, mask: Option<Vec<bool>>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(DiffmapError::Grid(format!(
                "only 1D and 2D grids are supported, got {} axes",
                axes.len()
            )));
        }
        let total: usize = axes.iter().map(|a| a.nodes).product();
        if u.len() != total {
            return Err(DiffmapError::Grid(format!(
                "potential has {} values for {total} grid cells",
                u.len()
            )));
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(DiffmapError::Grid("potential must be finite".into()));
        }
        if let Some(ref m) = mask {
            if m.len() != total {
                return Err(DiffmapError::Grid("mask length mismatch".into()));
            }
            if m.iter().filter(|&&b| b).count() < 2 {
                return Err(DiffmapError::Grid("mask leaves fewer than 2 cells".into()));
            }
        }
        Ok(Self { axes, u, mask })
    }

    pub fn from_potential_1d(pot: &Potential, lo: f64, hi: f64, nodes: usize) -> Result<Self> {
        let axis = GridAxis::new(lo, hi, nodes)?;
        let u = (0..nodes).map(|i| pot.value(axis.coord(i))).collect();
        Self::new(vec![axis], u, None)
    }

    /// 2D grid from a potential function and an inside predicate.
    pub fn masked_2d(
        x_axis: GridAxis,
        y_axis: GridAxis,
        u_fn: impl Fn(f64, f64) -> f64,
        inside: impl Fn(f64, f64) -> bool,
    ) -> Result<Self> {
        let (nx, ny) = (x_axis.nodes, y_axis.nodes);
        let mut u = Vec::with_capacity(nx * ny);
        let mut mask = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                let (x, y) = (x_axis.coord(ix), y_axis.coord(iy));
                u.push(u_fn(x, y));
                mask.push(inside(x, y));
            }
        }
        Self::new(vec![x_axis, y_axis], u, Some(mask))
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[GridAxis] {
        &self.axes
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }
}

/// Dense discretization of the backward operator on the active cells.
#[derive(Debug, Clone)]
pub struct FPOperator {
    matrix: Array2<f64>,
    /// Flat grid index of every active cell, in row-major order.
    active: Vec<usize>,
    grid: PotentialGrid,
}

impl FPOperator {
    pub fn n(&self) -> usize {
        self.active.len()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn grid(&self) -> &PotentialGrid {
        &self.grid
    }

    /// Coordinates of active cell `a`.
    pub fn cell_coord(&self, a: usize) -> Vec<f64> {
        let flat = self.active[a];
        match self.grid.dims() {
            1 => vec![self.grid.axes[0].coord(flat)],
            2 => {
                let nx = self.grid.axes[0].nodes;
                vec![
                    self.grid.axes[0].coord(flat % nx),
                    self.grid.axes[1].coord(flat / nx),
                ]
            }
            _ => unreachable!(),
        }
    }

    /// Active-cell potential values.
    pub fn cell_potential(&self, a: usize) -> f64 {
        self.grid.u[self.active[a]]
    }

    /// Index of the active cell nearest to `x` (used to read eigenfunctions
    /// off the grid at arbitrary sample locations).
    pub fn nearest_cell(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for a in 0..self.n() {
            let c = self.cell_coord(a);
            let d: f64 = c
                .iter()
                .zip(x.iter())
                .map(|(ci, xi)| (ci - xi) * (ci - xi))
                .sum();
            if d < best_d {
                best_d = d;
                best = a;
            }
        }
        best
    }
}

/// Assembles the flux-form discretization of `H_b` on the grid.
pub fn discretize_fp(grid: &PotentialGrid) -> Result<FPOperator> {
    let total: usize = grid.axes.iter().map(|a| a.nodes).product();
    let is_active = |flat: usize| grid.mask.as_ref().map_or(true, |m| m[flat]);

    let active: Vec<usize> = (0..total).filter(|&f| is_active(f)).collect();
    let mut to_active = vec![usize::MAX; total];
    for (a, &f) in active.iter().enumerate() {
        to_active[f] = a;
    }

    let n = active.len();
    let mut matrix = Array2::zeros((n, n));

    let neighbors = |flat: usize| -> Vec<(usize, f64)> {
        let mut out = Vec::with_capacity(4);
        match grid.dims() {
            1 => {
                let h2 = grid.axes[0].step().powi(2);
                if flat > 0 {
                    out.push((flat - 1, h2));
                }
                if flat + 1 < grid.axes[0].nodes {
                    out.push((flat + 1, h2));
                }
            }
            2 => {
                let nx = grid.axes[0].nodes;
                let ny = grid.axes[1].nodes;
                let (ix, iy) = (flat % nx, flat / nx);
                let hx2 = grid.axes[0].step().powi(2);
                let hy2 = grid.axes[1].step().powi(2);
                if ix > 0 {
                    out.push((flat - 1, hx2));
                }
                if ix + 1 < nx {
                    out.push((flat + 1, hx2));
                }
                if iy > 0 {
                    out.push((flat - nx, hy2));
                }
                if iy + 1 < ny {
                    out.push((flat + nx, hy2));
                }
            }
            _ => unreachable!(),
        }
        out
    };

    for (a, &flat) in active.iter().enumerate() {
        let ui = grid.u[flat];
        for (nb, h2) in neighbors(flat) {
            if !is_active(nb) {
                continue; // zero-flux face into masked-out cells
            }
            let uj = grid.u[nb];
            let w = (ui - uj).exp() / h2;
            matrix[[a, to_active[nb]]] += w;
            matrix[[a, a]] -= w;
        }
    }

    Ok(FPOperator {
        matrix,
        active,
        grid: grid.clone(),
    })
}

/// Eigenpairs of the backward operator, smallest magnitude first.
#[derive(Debug, Clone)]
pub struct FpEigenpairs {
    /// mu_0 ~ 0 >= mu_1 >= ... (all nonpositive up to rounding).
    pub rates: Vec<f64>,
    /// Eigenfunctions at the active cells, one per column, max-abs
    /// normalized with the largest-|entry| positive.
    pub functions: Array2<f64>,
}

/// Solves for the `count` smallest-magnitude eigenpairs by conjugating with
/// `e^{-U}` so a symmetric solver applies.
pub fn fp_eigenpairs(op: &FPOperator, count: usize) -> Result<FpEigenpairs> {
    let n = op.n();
    if count == 0 || count > n {
        return Err(DiffmapError::Range(format!(
            "requested {count} eigenpairs from an operator of size {n}"
        )));
    }
    // S = diag(e^{-U}) H diag(e^{U}) is symmetric for the flux-form H.
    let mut s = op.matrix.clone();
    for a in 0..n {
        let ua = op.cell_potential(a);
        for b in 0..n {
            if a != b {
                s[[a, b]] *= (op.cell_potential(b) - ua).exp();
            }
        }
    }
    // Kill residual rounding asymmetry.
    for a in 0..n {
        for b in (a + 1)..n {
            let v = 0.5 * (s[[a, b]] + s[[b, a]]);
            s[[a, b]] = v;
            s[[b, a]] = v;
        }
    }
    let (values, vectors) = dense_symmetric_eigh(&s)?;
    // Descending order == ascending magnitude for a nonpositive spectrum.
    let mut rates = Vec::with_capacity(count);
    let mut functions = Array2::zeros((n, count));
    for j in 0..count {
        rates.push(values[j]);
        for a in 0..n {
            functions[[a, j]] = vectors[[a, j]] * op.cell_potential(a).exp();
        }
        // max-abs normalization + sign convention
        let mut best = 0;
        for a in 1..n {
            if functions[[a, j]].abs() > functions[[best, j]].abs() {
                best = a;
            }
        }
        let scale = functions[[best, j]];
        for a in 0..n {
            functions[[a, j]] /= scale;
        }
    }
    Ok(FpEigenpairs { rates, functions })
}

/// Graph rates `(lambda_j - 1) / epsilon` against continuum rates `mu_j`.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumComparison {
    pub graph_rates: Vec<f64>,
    pub fp_rates: Vec<f64>,
    /// Per-mode ratio graph_rate_j / mu_j for j >= 1. A constant ratio
    /// across modes indicates agreement up to the kernel's time
    /// normalization.
    pub ratios: Vec<f64>,
    /// Fitted time-normalization constant (mean ratio).
    pub calibration: f64,
    /// max/min of the per-mode ratios; 1 means perfect cross-mode
    /// consistency.
    pub spread: f64,
}

pub fn compare_spectra(
    decomp: &SpectralDecomposition,
    epsilon: f64,
    fp_rates: &[f64],
    count: usize,
) -> Result<SpectrumComparison> {
    if count + 1 > decomp.m() || count + 1 > fp_rates.len() {
        return Err(DiffmapError::Range(format!(
            "count = {count} exceeds available modes (graph {}, fp {})",
            decomp.m(),
            fp_rates.len()
        )));
    }
    let graph_rates: Vec<f64> = (0..=count)
        .map(|j| (decomp.eigenvalues()[j] - 1.0) / epsilon)
        .collect();
    let fp: Vec<f64> = fp_rates[..=count].to_vec();
    let mut ratios = Vec::with_capacity(count);
    for j in 1..=count {
        if fp[j] == 0.0 {
            return Err(DiffmapError::Range(format!(
                "fp rate mu_{j} is zero; cannot form ratio"
            )));
        }
        ratios.push(graph_rates[j] / fp[j]);
    }
    let calibration = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &r in &ratios {
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok(SpectrumComparison {
        graph_rates,
        fp_rates: fp,
        ratios,
        calibration,
        spread: hi / lo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;
    use std::f64::consts::PI;

    fn uniform_1d(nodes: usize) -> FPOperator {
        let grid = PotentialGrid::from_potential_1d(&Potential::Const, 0.0, 1.0, nodes).unwrap();
        discretize_fp(&grid).unwrap()
    }

    #[test]
    fn degenerate_axis_rejected() {
        match GridAxis::new(1.0, 1.0, 32) {
            Err(DiffmapError::Grid(_)) => {}
            other => panic!("expected GridError, got {other:?}"),
        }
    }

    #[test]
    fn constant_is_in_kernel() {
        let grid = PotentialGrid::from_potential_1d(
            &Potential::DoubleWell { a: 4.0, b: 0.5 },
            -2.0,
            2.0,
            128,
        )
        .unwrap();
        let op = discretize_fp(&grid).unwrap();
        let ones = Array1::ones(op.n());
        let hv = op.matrix().dot(&ones);
        for v in hv.iter() {
            assert!(v.abs() < 1e-10);
        }
    }

    #[test]
    fn const_potential_has_pure_laplacian_rows() {
        let op = uniform_1d(64);
        let h2 = (1.0f64 / 64.0).powi(2);
        for i in 0..64usize {
            for j in 0..64usize {
                let expected = if i == j {
                    let nb = if i == 0 || i == 63 { 1.0 } else { 2.0 };
                    -nb / h2
                } else if i.abs_diff(j) == 1 {
                    1.0 / h2
                } else {
                    0.0
                };
                assert!((op.matrix()[[i, j]] - expected).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn neumann_laplacian_spectrum_and_modes() {
        let op = uniform_1d(200);
        let eig = fp_eigenpairs(&op, 3).unwrap();
        assert!(eig.rates[0].abs() < 1e-8);
        for (j, expected) in [(1usize, -PI * PI), (2, -4.0 * PI * PI)] {
            let rel = (eig.rates[j] - expected).abs() / expected.abs();
            assert!(rel < 1e-3, "mu_{j} = {} vs {expected}", eig.rates[j]);
            // eigenfunction ~ cos(j pi x)
            for a in 0..op.n() {
                let x = op.cell_coord(a)[0];
                let c = (j as f64 * PI * x).cos();
                assert!((eig.functions[[a, j]] - c).abs() < 5e-3);
            }
        }
    }

    #[test]
    fn mode_ratio_four_at_400_nodes() {
        let op = uniform_1d(400);
        let eig = fp_eigenpairs(&op, 3).unwrap();
        let ratio = eig.rates[2] / eig.rates[1];
        assert!((ratio - 4.0).abs() / 4.0 < 0.005, "ratio {ratio}");
    }

    #[test]
    fn detailed_balance_symmetry_is_exact() {
        let grid = PotentialGrid::from_potential_1d(
            &Potential::DoubleWell { a: 4.0, b: 0.8 },
            -2.0,
            2.0,
            128,
        )
        .unwrap();
        let op = discretize_fp(&grid).unwrap();
        for a in 0..op.n() {
            for b in 0..op.n() {
                let lhs = (-2.0 * op.cell_potential(a)).exp() * op.matrix()[[a, b]];
                let rhs = (-2.0 * op.cell_potential(b)).exp() * op.matrix()[[b, a]];
                assert!((lhs - rhs).abs() <= 1e-8 * lhs.abs().max(1.0));
            }
        }
    }

    #[test]
    fn double_well_has_two_near_zero_modes() {
        let rates = |nodes: usize| {
            let grid = PotentialGrid::from_potential_1d(
                &Potential::DoubleWell { a: 4.0, b: 0.0 },
                -2.0,
                2.0,
                nodes,
            )
            .unwrap();
            fp_eigenpairs(&discretize_fp(&grid).unwrap(), 4).unwrap().rates
        };
        // Two resolutions; Richardson-consistent values.
        let r1 = rates(256);
        let r2 = rates(512);
        for r in [&r1, &r2] {
            assert!(r[0].abs() < 1e-2 * r[2].abs());
            assert!(r[1].abs() < 1e-2 * r[2].abs());
            assert!(r[2].abs() > 20.0 * r[1].abs(), "gap: {} vs {}", r[2], r[1]);
        }
        assert!((r1[1] - r2[1]).abs() / r2[1].abs() < 0.05);
    }

    #[test]
    fn deep_well_eigenfunction_is_piecewise_constant() {
        let grid = PotentialGrid::from_potential_1d(
            &Potential::DoubleWell { a: 4.0, b: 0.0 },
            -2.0,
            2.0,
            256,
        )
        .unwrap();
        let op = discretize_fp(&grid).unwrap();
        let eig = fp_eigenpairs(&op, 2).unwrap();
        // Roughly constant in each well, sharp transition near the saddle.
        let mut left = Vec::new();
        let mut right = Vec::new();
        for a in 0..op.n() {
            let x = op.cell_coord(a)[0];
            if (-1.3..=-0.7).contains(&x) {
                left.push(eig.functions[[a, 1]]);
            } else if (0.7..=1.3).contains(&x) {
                right.push(eig.functions[[a, 1]]);
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let std = |v: &[f64], m: f64| {
            (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
        };
        let (ml, mr) = (mean(&left), mean(&right));
        assert!(ml * mr < 0.0, "opposite signs in the two wells");
        let gap = (ml - mr).abs();
        assert!(std(&left, ml) < 0.02 * gap);
        assert!(std(&right, mr) < 0.02 * gap);
    }

    #[test]
    fn eigenvalues_converge_under_refinement() {
        for pot in [
            Potential::Harmonic { k: 2.0 },
            Potential::DoubleWell { a: 1.0, b: 0.2 },
        ] {
            let rates = |nodes: usize| {
                let grid = PotentialGrid::from_potential_1d(&pot, -3.0, 3.0, nodes).unwrap();
                fp_eigenpairs(&discretize_fp(&grid).unwrap(), 4).unwrap().rates
            };
            let coarse = rates(200);
            let fine = rates(400);
            for j in 1..=3 {
                let rel = (coarse[j] - fine[j]).abs() / fine[j].abs();
                assert!(rel < 0.01, "{pot:?} mode {j}: {rel}");
            }
        }
    }

    #[test]
    fn rate_ratios_invariant_under_potential_shift() {
        let base = Potential::DoubleWell { a: 2.0, b: 0.3 };
        let grid1 = PotentialGrid::from_potential_1d(&base, -2.0, 2.0, 128).unwrap();
        let shifted: Vec<f64> = grid1.u().iter().map(|u| u + 5.0).collect();
        let grid2 = PotentialGrid::new(grid1.axes().to_vec(), shifted, None).unwrap();
        let r1 = fp_eigenpairs(&discretize_fp(&grid1).unwrap(), 4).unwrap().rates;
        let r2 = fp_eigenpairs(&discretize_fp(&grid2).unwrap(), 4).unwrap().rates;
        for j in 2..4 {
            let a = r1[j] / r1[1];
            let b = r2[j] / r2[1];
            // the shifted potential values round differently, so compare
            // relatively, not absolutely
            assert!(((a - b) / b).abs() < 1e-10, "mode {j}: {a} vs {b}");
        }
    }

    #[test]
    fn fp_rates_are_nonpositive() {
        let grid = PotentialGrid::from_potential_1d(
            &Potential::Harmonic { k: 1.0 },
            -4.0,
            4.0,
            128,
        )
        .unwrap();
        let eig = fp_eigenpairs(&discretize_fp(&grid).unwrap(), 10).unwrap();
        for r in &eig.rates {
            assert!(*r <= 1e-8);
        }
    }
}
