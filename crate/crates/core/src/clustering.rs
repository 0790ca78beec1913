//! Spectral-gap detection and k-means assignment in diffusion coordinates.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::diffusion::DiffusionMap;
use crate::error::{DiffmapError, Result};

/// Eigenvalue ratios and the chosen cluster count.
#[derive(Debug, Clone, Serialize)]
pub struct GapReport {
    pub eigenvalues: Vec<f64>,
    /// Chosen cluster count: the index with the sharpest relative drop.
    pub k: usize,
    /// lambda_k / lambda_{k-1} at the chosen split.
    pub gap_ratio: f64,
    /// All candidate ratios (j, lambda_j / lambda_{j-1}) so callers can
    /// override the choice.
    pub ratios: Vec<(usize, f64)>,
}

/// Chooses k as the argmin over j in [1, max_k] of lambda_j / lambda_{j-1}.
/// Ties break at the smallest j.
pub fn detect_gap(eigenvalues: &[f64], max_k: usize) -> Result<GapReport> {
    let m = eigenvalues.len();
    if m < 3 {
        return Err(DiffmapError::InsufficientSpectrum(m));
    }
    if max_k < 2 || max_k > m - 1 {
        return Err(DiffmapError::Range(format!(
            "max_k = {max_k} must satisfy 2 <= max_k <= m-1 = {}",
            m - 1
        )));
    }
    if (eigenvalues[0] - 1.0).abs() > 1e-8 {
        return Err(DiffmapError::Range(format!(
            "spectrum must start at lambda_0 = 1, got {}",
            eigenvalues[0]
        )));
    }
    for w in eigenvalues.windows(2) {
        if w[1] > w[0] {
            return Err(DiffmapError::Range(
                "eigenvalues must be sorted descending".into(),
            ));
        }
    }

    let mut ratios = Vec::with_capacity(max_k);
    let mut best = 1usize;
    let mut best_ratio = f64::INFINITY;
    for j in 1..=max_k {
        let r = eigenvalues[j] / eigenvalues[j - 1];
        ratios.push((j, r));
        if r < best_ratio {
            best_ratio = r;
            best = j;
        }
    }
    Ok(GapReport {
        eigenvalues: eigenvalues.to_vec(),
        k: best,
        gap_ratio: best_ratio,
        ratios,
    })
}

/// Cluster labels with within-cluster inertia in diffusion coordinates.
#[derive(Debug, Clone, Serialize)]
pub struct ClusterResult {
    pub labels: Vec<usize>,
    pub k: usize,
    pub inertia: f64,
}

const KMEANS_MAX_ITER: usize = 500;
const KMEANS_REL_TOL: f64 = 1e-10;

/// k-means in diffusion coordinates with deterministic farthest-point
/// initialization: the seed picks the first center, every following center
/// is the point farthest from the chosen set (ties at the lowest index).
pub fn cluster(map: &DiffusionMap, k: usize, seed: u64) -> Result<ClusterResult> {
    let n = map.coords.nrows();
    let d = map.coords.ncols();
    if k < 2 {
        return Err(DiffmapError::Range(format!("k = {k} must be >= 2")));
    }
    let distinct = count_distinct_rows(&map.coords);
    if k > distinct {
        return Err(DiffmapError::DegenerateCluster { k });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let first = rng.gen_range(0..n);
    centers.push(map.coords.row(first).to_vec());
    while centers.len() < k {
        let mut best_i = 0;
        let mut best_d = -1.0;
        for i in 0..n {
            let nearest = centers
                .iter()
                .map(|c| row_sq_dist(map, i, c))
                .fold(f64::INFINITY, f64::min);
            if nearest > best_d {
                best_d = nearest;
                best_i = i;
            }
        }
        centers.push(map.coords.row(best_i).to_vec());
    }

    let mut labels = vec![0usize; n];
    let mut inertia = f64::INFINITY;
    for _ in 0..KMEANS_MAX_ITER {
        // Assignment, fixed iteration order; ties at the lowest center index.
        let mut new_inertia = 0.0;
        for i in 0..n {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let dist = row_sq_dist(map, i, center);
                if dist < best_d {
                    best_d = dist;
                    best = c;
                }
            }
            labels[i] = best;
            new_inertia += best_d;
        }
        // Update; an emptied cluster takes the point farthest from its
        // assigned center.
        let mut counts = vec![0usize; k];
        let mut sums = vec![vec![0.0; d]; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            for c in 0..d {
                sums[labels[i]][c] += map.coords[[i, c]];
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let mut far_i = 0;
                let mut far_d = -1.0;
                for i in 0..n {
                    let dist = row_sq_dist(map, i, &centers[labels[i]]);
                    if dist > far_d {
                        far_d = dist;
                        far_i = i;
                    }
                }
                centers[c] = map.coords.row(far_i).to_vec();
            } else {
                for j in 0..d {
                    centers[c][j] = sums[c][j] / counts[c] as f64;
                }
            }
        }
        let rel_change = (inertia - new_inertia).abs() / new_inertia.max(1e-300);
        let done = new_inertia == 0.0 || rel_change < KMEANS_REL_TOL;
        inertia = new_inertia;
        if done {
            break;
        }
    }

    let labels = canonicalize_labels(&labels, k);
    Ok(ClusterResult { labels, k, inertia })
}

fn row_sq_dist(map: &DiffusionMap, i: usize, center: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (c, &v) in center.iter().enumerate() {
        let d = map.coords[[i, c]] - v;
        acc += d * d;
    }
    acc
}

fn count_distinct_rows(coords: &Array2<f64>) -> usize {
    let n = coords.nrows();
    let mut distinct = 0;
    'outer: for i in 0..n {
        for j in 0..i {
            if coords.row(i) == coords.row(j) {
                continue 'outer;
            }
        }
        distinct += 1;
    }
    distinct
}

/// Renumbers clusters by ascending index of their first member.
fn canonicalize_labels(labels: &[usize], k: usize) -> Vec<usize> {
    let mut remap = vec![usize::MAX; k];
    let mut next = 0;
    let mut out = Vec::with_capacity(labels.len());
    for &l in labels {
        if remap[l] == usize::MAX {
            remap[l] = next;
            next += 1;
        }
        out.push(remap[l]);
    }
    out
}

/// Fraction of points whose predicted label matches the ground truth under
/// the best label permutation (exhaustive; k must stay small).
pub fn label_accuracy(pred: &[usize], truth: &[usize], k: usize) -> f64 {
    assert_eq!(pred.len(), truth.len());
    assert!(k <= 8, "exhaustive permutation matching limited to k <= 8");
    let n = pred.len();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = 0usize;
    permute(&mut perm, 0, &mut |p| {
        let hits = pred
            .iter()
            .zip(truth.iter())
            .filter(|(a, b)| p[**a] == **b)
            .count();
        if hits > best {
            best = hits;
        }
    });
    best as f64 / n as f64
}

fn permute(perm: &mut Vec<usize>, start: usize, visit: &mut impl FnMut(&[usize])) {
    if start == perm.len() {
        visit(perm);
        return;
    }
    for i in start..perm.len() {
        perm.swap(start, i);
        permute(perm, start + 1, visit);
        perm.swap(start, i);
    }
}
