//! Euler-Maruyama simulation of `dx = -grad(2U) dt + sqrt(2 D) dW` with
//! reflecting walls, and first-passage (exit time) statistics.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{DiffmapError, Result};
use crate::potential::Potential;

/// Energy landscape seen by the walker. One-dimensional potentials provide
/// the only built-in implementation; higher-dimensional landscapes implement
/// the trait directly.
pub trait EnergyLandscape: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], g: &mut [f64]);
}

impl EnergyLandscape for Potential {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, x: &[f64]) -> f64 {
        Potential::value(self, x[0])
    }

    fn gradient(&self, x: &[f64], g: &mut [f64]) {
        g[0] = Potential::gradient(self, x[0]);
    }
}

/// Axis-aligned box with reflecting walls.
#[derive(Debug, Clone, Serialize)]
pub struct Domain {
    pub bounds: Vec<(f64, f64)>,
}

impl Domain {
    pub fn interval(lo: f64, hi: f64) -> Self {
        Self {
            bounds: vec![(lo, hi)],
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.bounds.iter())
            .all(|(v, (lo, hi))| v >= lo && v <= hi)
    }

    /// Coordinate-wise mirror reflection back into the box.
    pub fn reflect(&self, x: &mut [f64]) {
        for (v, (lo, hi)) in x.iter_mut().zip(self.bounds.iter()) {
            // A step larger than the box can bounce more than once; each
            // fold shrinks the overshoot, so the loop terminates.
            while *v < *lo || *v > *hi {
                if *v < *lo {
                    *v = 2.0 * lo - *v;
                }
                if *v > *hi {
                    *v = 2.0 * hi - *v;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LangevinConfig {
    /// Noise strength D.
    pub diffusion: f64,
    pub dt: f64,
    pub max_steps: usize,
    pub seed: u64,
    pub domain: Domain,
    /// Keep every `thin`-th state in the recorded trajectory.
    pub thin: usize,
}

impl LangevinConfig {
    pub fn validate(&self, landscape: &dyn EnergyLandscape) -> Result<()> {
        if !(self.diffusion >= 0.0) {
            return Err(DiffmapError::Range(format!(
                "diffusion D = {} must be nonnegative",
                self.diffusion
            )));
        }
        if !(self.dt > 0.0) {
            return Err(DiffmapError::Range(format!(
                "dt = {} must be positive",
                self.dt
            )));
        }
        if self.thin == 0 {
            return Err(DiffmapError::Range("thin must be >= 1".into()));
        }
        if self.domain.bounds.len() != landscape.dim() {
            return Err(DiffmapError::Dimension(format!(
                "domain has {} axes but the landscape has dimension {}",
                self.domain.bounds.len(),
                landscape.dim()
            )));
        }
        // Stability guard: dt * max|grad(2U)| < 0.5 on a domain scan.
        let guard = self.dt * max_drift_norm(landscape, &self.domain);
        if guard >= 0.5 {
            return Err(DiffmapError::StepSize(guard));
        }
        Ok(())
    }
}

/// Max over a coarse domain grid of |grad(2U)|.
fn max_drift_norm(landscape: &dyn EnergyLandscape, domain: &Domain) -> f64 {
    const SCAN: usize = 257;
    let dim = domain.bounds.len();
    let mut g = vec![0.0; dim];
    let mut x = vec![0.0; dim];
    let mut max_norm: f64 = 0.0;
    let total = SCAN.pow(dim as u32);
    for flat in 0..total {
        let mut rem = flat;
        for (d, (lo, hi)) in domain.bounds.iter().enumerate() {
            let i = rem % SCAN;
            rem /= SCAN;
            x[d] = lo + (hi - lo) * i as f64 / (SCAN - 1) as f64;
        }
        landscape.gradient(&x, &mut g);
        let norm = g.iter().map(|v| 4.0 * v * v).sum::<f64>().sqrt();
        max_norm = max_norm.max(norm);
    }
    max_norm
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// One state per recorded step, row-major.
    pub positions: Array2<f64>,
}

/// Euler-Maruyama path from `start`, recorded every `thin` steps.
///
/// Identical (seed, config) gives a bit-identical trajectory.
pub fn simulate(
    landscape: &dyn EnergyLandscape,
    start: &[f64],
    config: &LangevinConfig,
) -> Result<Trajectory> {
    config.validate(landscape)?;
    if !config.domain.contains(start) {
        return Err(DiffmapError::Range("start lies outside the domain".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dim = landscape.dim();
    let mut x = start.to_vec();
    let mut g = vec![0.0; dim];
    let noise = (2.0 * config.diffusion * config.dt).sqrt();

    let recorded = config.max_steps / config.thin + 1;
    let mut times = Vec::with_capacity(recorded);
    let mut flat = Vec::with_capacity(recorded * dim);
    times.push(0.0);
    flat.extend_from_slice(&x);

    for step in 1..=config.max_steps {
        landscape.gradient(&x, &mut g);
        for d in 0..dim {
            let xi: f64 = StandardNormal.sample(&mut rng);
            x[d] += -2.0 * g[d] * config.dt + noise * xi;
        }
        config.domain.reflect(&mut x);
        assert!(config.domain.contains(&x), "reflection left the domain");
        if step % config.thin == 0 {
            times.push(step as f64 * config.dt);
            flat.extend_from_slice(&x);
        }
    }
    let rows = times.len();
    Ok(Trajectory {
        times,
        positions: Array2::from_shape_vec((rows, dim), flat)
            .expect("shape follows from construction"),
    })
}

/// Exit regions for first-passage runs.
#[derive(Debug, Clone, Serialize)]
pub enum Region {
    Below { axis: usize, threshold: f64 },
    Above { axis: usize, threshold: f64 },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Region {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Below { axis, threshold } => x[*axis] < *threshold,
            Region::Above { axis, threshold } => x[*axis] > *threshold,
            Region::Ball { center, radius } => {
                let d2: f64 = center
                    .iter()
                    .zip(x.iter())
                    .map(|(c, v)| (c - v) * (c - v))
                    .sum();
                d2 <= radius * radius
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExitTimeEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// Completed first-passage samples.
    pub samples: usize,
    /// Trajectories that hit max_steps without exiting; counted, not
    /// averaged in.
    pub truncated: usize,
    /// Empirical (p10, p50, p90) exit-time quantiles.
    pub quantiles: (f64, f64, f64),
    /// Coefficient of variation (std / mean); 1 for an exponential law.
    pub coefficient_of_variation: f64,
}

/// First-passage times from `start` into `exit` over independent trials.
///
/// Each trial draws from its own counter-based stream of the seeded
/// generator, so results do not depend on scheduling order.
pub fn mean_exit_time(
    landscape: &dyn EnergyLandscape,
    start: &[f64],
    exit: &Region,
    config: &LangevinConfig,
    trials: usize,
) -> Result<ExitTimeEstimate> {
    config.validate(landscape)?;
    if trials == 0 {
        return Err(DiffmapError::Range("trials must be >= 1".into()));
    }
    if !config.domain.contains(start) {
        return Err(DiffmapError::Range("start lies outside the domain".into()));
    }
    if exit.contains(start) {
        return Err(DiffmapError::Range(
            "start region and exit region must be disjoint".into(),
        ));
    }

    let dim = landscape.dim();
    let noise = (2.0 * config.diffusion * config.dt).sqrt();
    let outcomes: Vec<Option<f64>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(trial as u64 + 1);
            let mut x = start.to_vec();
            let mut g = vec![0.0; dim];
            for step in 1..=config.max_steps {
                landscape.gradient(&x, &mut g);
                for d in 0..dim {
                    let xi: f64 = StandardNormal.sample(&mut rng);
                    x[d] += -2.0 * g[d] * config.dt + noise * xi;
                }
                config.domain.reflect(&mut x);
                assert!(config.domain.contains(&x), "reflection left the domain");
                if exit.contains(&x) {
                    return Some(step as f64 * config.dt);
                }
            }
            None
        })
        .collect();

    let mut times: Vec<f64> = outcomes.iter().filter_map(|o| *o).collect();
    let truncated = trials - times.len();
    if times.is_empty() {
        return Err(DiffmapError::Range(
            "no trajectory exited within max_steps".into(),
        ));
    }
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = times.len() as f64;
    let mean = times.iter().sum::<f64>() / n;
    let var = times.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    let std = var.sqrt();
    let q = |p: f64| times[((p * (times.len() - 1) as f64).round() as usize).min(times.len() - 1)];
    Ok(ExitTimeEstimate {
        mean,
        std_error: std / n.sqrt(),
        samples: times.len(),
        truncated,
        quantiles: (q(0.1), q(0.5), q(0.9)),
        coefficient_of_variation: std / mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(diffusion: f64, dt: f64, max_steps: usize, seed: u64, lo: f64, hi: f64) -> LangevinConfig {
        LangevinConfig {
            diffusion,
            dt,
            max_steps,
            seed,
            domain: Domain::interval(lo, hi),
            thin: 1,
        }
    }

    #[test]
    fn no_drift_no_noise_stays_put() {
        let cfg = config(0.0, 1e-3, 100, 1, -1.0, 1.0);
        let traj = simulate(&Potential::Const, &[0.25], &cfg).unwrap();
        for i in 0..traj.times.len() {
            assert_eq!(traj.positions[[i, 0]], 0.25);
        }
    }

    #[test]
    fn harmonic_deterministic_decay() {
        // U = x^2/2 => grad(2U) = 2x, exact solution x0 e^{-2t}.
        let dt = 1e-4;
        let cfg = config(0.0, dt, 10_000, 1, -2.0, 2.0);
        let traj = simulate(&Potential::Harmonic { k: 1.0 }, &[1.0], &cfg).unwrap();
        let t_end = traj.times.last().unwrap();
        let exact = (-2.0 * t_end).exp();
        let got = traj.positions[[traj.times.len() - 1, 0]];
        assert!(
            (got - exact).abs() < 10.0 * dt,
            "got {got}, exact {exact}"
        );
    }

    #[test]
    fn trajectories_are_deterministic() {
        let cfg = config(1.0, 1e-3, 500, 42, -2.0, 2.0);
        let p = Potential::DoubleWell { a: 1.0, b: 0.0 };
        let t1 = simulate(&p, &[1.0], &cfg).unwrap();
        let t2 = simulate(&p, &[1.0], &cfg).unwrap();
        assert_eq!(t1.positions, t2.positions);
    }

    #[test]
    fn stability_guard_triggers() {
        // steep walls at the domain edge
        let cfg = config(1.0, 0.1, 10, 0, -3.0, 3.0);
        match simulate(&Potential::DoubleWell { a: 4.0, b: 0.0 }, &[0.0], &cfg) {
            Err(DiffmapError::StepSize(_)) => {}
            other => panic!("expected StepSizeError, got {other:?}"),
        }
    }

    #[test]
    fn pure_diffusion_first_passage_matches_analytic() {
        // Reflecting at 0, absorbing at L, start at 0: mean = L^2 / (2D).
        let l = 1.0;
        let d = 0.5;
        let cfg = LangevinConfig {
            diffusion: d,
            dt: 1e-4,
            max_steps: 2_000_000,
            seed: 7,
            domain: Domain::interval(0.0, 10.0 * l),
            thin: 1,
        };
        let exit = Region::Above {
            axis: 0,
            threshold: l,
        };
        let est = mean_exit_time(&Potential::Const, &[0.0], &exit, &cfg, 2000).unwrap();
        assert_eq!(est.truncated, 0);
        let expected = l * l / (2.0 * d);
        assert!(
            (est.mean - expected).abs() < 3.0 * est.std_error,
            "mean {} +- {}, expected {expected}",
            est.mean,
            est.std_error
        );
    }

    #[test]
    fn estimates_are_seed_deterministic() {
        let cfg = config(0.5, 1e-3, 200_000, 3, 0.0, 5.0);
        let exit = Region::Above {
            axis: 0,
            threshold: 1.0,
        };
        let e1 = mean_exit_time(&Potential::Const, &[0.0], &exit, &cfg, 64).unwrap();
        let e2 = mean_exit_time(&Potential::Const, &[0.0], &exit, &cfg, 64).unwrap();
        assert_eq!(e1.mean, e2.mean);
        assert_eq!(e1.quantiles, e2.quantiles);
    }

    #[test]
    fn disjointness_checked() {
        let cfg = config(1.0, 1e-3, 10, 0, -1.0, 1.0);
        let exit = Region::Above {
            axis: 0,
            threshold: 0.0,
        };
        assert!(mean_exit_time(&Potential::Const, &[0.5], &exit, &cfg, 1).is_err());
    }

    #[test]
    fn reflection_keeps_walkers_inside() {
        let cfg = config(2.0, 1e-3, 20_000, 9, -0.5, 0.5);
        let traj = simulate(&Potential::Const, &[0.0], &cfg).unwrap();
        for i in 0..traj.times.len() {
            let x = traj.positions[[i, 0]];
            assert!((-0.5..=0.5).contains(&x));
        }
    }
}
