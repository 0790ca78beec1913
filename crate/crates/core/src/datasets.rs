//! Seeded synthetic dataset generators and CSV ingestion.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{DiffmapError, Result};
use crate::potential::Potential;

pub use crate::cloud::PointCloud as Cloud;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub center: Vec<f64>,
    pub sigma: f64,
    pub count: usize,
}

/// Two square containers joined by a narrow channel, all in the plane.
/// Containers are `box_size` x `box_size`; the channel is
/// `channel_length` x `channel_width`, centered at the origin.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Dumbbell2d {
    pub box_size: f64,
    pub channel_width: f64,
    pub channel_length: f64,
}

impl Dumbbell2d {
    pub fn validate(&self) -> Result<()> {
        if !(self.box_size > 0.0 && self.channel_width > 0.0 && self.channel_length > 0.0) {
            return Err(DiffmapError::Geometry(
                "dumbbell dimensions must be positive".into(),
            ));
        }
        if self.channel_width >= self.box_size {
            return Err(DiffmapError::Geometry(
                "channel_width must be smaller than box_size".into(),
            ));
        }
        Ok(())
    }

    /// Bounding box (x, then y).
    pub fn bounds(&self) -> [(f64, f64); 2] {
        let half_len = self.channel_length / 2.0;
        let half_h = self.box_size / 2.0;
        [
            (-(half_len + self.box_size), half_len + self.box_size),
            (-half_h, half_h),
        ]
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let half_len = self.channel_length / 2.0;
        let half_h = self.box_size / 2.0;
        let in_container =
            x.abs() >= half_len && x.abs() <= half_len + self.box_size && y.abs() <= half_h;
        let in_channel = x.abs() <= half_len && y.abs() <= self.channel_width / 2.0;
        in_container || in_channel
    }

    /// Container label: 0 for x < 0, 1 for x >= 0 (channel points go to the
    /// nearest container).
    pub fn container(&self, x: f64) -> usize {
        usize::from(x >= 0.0)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetKind {
    Gaussians {
        components: Vec<GaussianComponent>,
    },
    Dumbbell2d {
        geometry: Dumbbell2d,
        count: usize,
    },
    Boltzmann1d {
        potential: Potential,
        lo: f64,
        hi: f64,
        count: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSpec {
    #[serde(flatten)]
    pub kind: DatasetKind,
    pub seed: u64,
}

const METROPOLIS_BURN_IN: usize = 1000;
const METROPOLIS_THINNING: usize = 10;

/// Deterministic generation: identical spec + seed gives a bitwise
/// identical cloud.
pub fn generate(spec: &DatasetSpec) -> Result<PointCloud> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match &spec.kind {
        DatasetKind::Gaussians { components } => {
            if components.is_empty() {
                return Err(DiffmapError::Geometry("no Gaussian components".into()));
            }
            if components.iter().any(|c| c.count == 0 || c.sigma <= 0.0) {
                return Err(DiffmapError::Geometry(
                    "component counts must be >= 1 and sigmas positive".into(),
                ));
            }
            let p = components[0].center.len();
            if components.iter().any(|c| c.center.len() != p) {
                return Err(DiffmapError::Geometry(
                    "all component centers must share one dimension".into(),
                ));
            }
            let n: usize = components.iter().map(|c| c.count).sum();
            let mut coords = Vec::with_capacity(n * p);
            let mut labels = Vec::with_capacity(n);
            for (idx, comp) in components.iter().enumerate() {
                for _ in 0..comp.count {
                    for d in 0..p {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        coords.push(comp.center[d] + comp.sigma * z);
                    }
                    labels.push(idx);
                }
            }
            let points = Array2::from_shape_vec((n, p), coords).expect("shape by construction");
            PointCloud::new(points, Some(labels))
        }
        DatasetKind::Dumbbell2d { geometry, count } => {
            geometry.validate()?;
            if *count < 2 {
                return Err(DiffmapError::Geometry("count must be >= 2".into()));
            }
            let [(x_lo, x_hi), (y_lo, y_hi)] = geometry.bounds();
            let mut coords = Vec::with_capacity(count * 2);
            let mut labels = Vec::with_capacity(*count);
            let mut accepted = 0usize;
            let mut proposed = 0usize;
            while accepted < *count {
                let x = rng.gen_range(x_lo..x_hi);
                let y = rng.gen_range(y_lo..y_hi);
                proposed += 1;
                if geometry.contains(x, y) {
                    coords.push(x);
                    coords.push(y);
                    labels.push(geometry.container(x));
                    accepted += 1;
                } else if proposed >= 1000 && (accepted as f64) < 0.01 * proposed as f64 {
                    return Err(DiffmapError::Geometry(format!(
                        "rejection acceptance below 1% ({accepted}/{proposed})"
                    )));
                }
            }
            let points =
                Array2::from_shape_vec((*count, 2), coords).expect("shape by construction");
            PointCloud::new(points, Some(labels))
        }
        DatasetKind::Boltzmann1d {
            potential,
            lo,
            hi,
            count,
        } => {
            potential.validate()?;
            if !(hi > lo) {
                return Err(DiffmapError::Geometry(format!(
                    "domain [{lo}, {hi}] is empty"
                )));
            }
            if *count < 2 {
                return Err(DiffmapError::Geometry("count must be >= 2".into()));
            }
            let step = 0.5 * (hi - lo);
            let mut x = 0.5 * (lo + hi);
            let mut u = potential.value(x);
            let mut samples = Vec::with_capacity(*count);
            let total = METROPOLIS_BURN_IN + METROPOLIS_THINNING * count;
            for it in 0..total {
                let z: f64 = StandardNormal.sample(&mut rng);
                let cand = x + step * z;
                // acceptance uses the target e^{-U}, zero outside the domain
                if cand >= *lo && cand <= *hi {
                    let u_cand = potential.value(cand);
                    let accept = if u_cand <= u {
                        true
                    } else {
                        rng.gen::<f64>() < (u - u_cand).exp()
                    };
                    if accept {
                        x = cand;
                        u = u_cand;
                    }
                }
                if it >= METROPOLIS_BURN_IN && (it - METROPOLIS_BURN_IN) % METROPOLIS_THINNING == 0
                {
                    samples.push(x);
                    if samples.len() == *count {
                        break;
                    }
                }
            }
            let barriers = potential.barriers(*lo, *hi);
            let labels: Vec<usize> = samples.iter().map(|&s| potential.basin(&barriers, s)).collect();
            let points =
                Array2::from_shape_vec((*count, 1), samples).expect("shape by construction");
            PointCloud::new(points, Some(labels))
        }
    }
}

pub fn load_csv<P: AsRef<std::path::Path>>(path: P) -> Result<PointCloud> {
    PointCloud::load_csv(path)
}

pub fn save_csv<P: AsRef<std::path::Path>>(cloud: &PointCloud, path: P) -> Result<()> {
    cloud.save_csv(path)
}

/// Seeded standard-normal cloud; shared by tests and benchmarks.
pub fn test_cloud(n: usize, p: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut rng));
    PointCloud::new(points, None).expect("valid by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tight_gaussian_concentrates() {
        let sigma = 1e-6;
        let spec = DatasetSpec {
            kind: DatasetKind::Gaussians {
                components: vec![GaussianComponent {
                    center: vec![2.0, -1.0],
                    sigma,
                    count: 200,
                }],
            },
            seed: 5,
        };
        let cloud = generate(&spec).unwrap();
        for i in 0..cloud.n() {
            let dx = cloud.points()[[i, 0]] - 2.0;
            let dy = cloud.points()[[i, 1]] + 1.0;
            assert!((dx * dx + dy * dy).sqrt() < 6.0 * sigma * 2.0f64.sqrt());
        }
    }

    #[test]
    fn dumbbell_points_lie_inside() {
        let geometry = Dumbbell2d {
            box_size: 2.0,
            channel_width: 0.4,
            channel_length: 1.0,
        };
        let spec = DatasetSpec {
            kind: DatasetKind::Dumbbell2d {
                geometry,
                count: 500,
            },
            seed: 2,
        };
        let cloud = generate(&spec).unwrap();
        let labels = cloud.labels().unwrap();
        for i in 0..cloud.n() {
            let (x, y) = (cloud.points()[[i, 0]], cloud.points()[[i, 1]]);
            assert!(geometry.contains(x, y), "({x}, {y}) outside");
            assert_eq!(labels[i], geometry.container(x));
        }
    }

    #[test]
    fn degenerate_dumbbell_rejected() {
        let geometry = Dumbbell2d {
            box_size: 1.0,
            channel_width: 1.5,
            channel_length: 1.0,
        };
        let spec = DatasetSpec {
            kind: DatasetKind::Dumbbell2d {
                geometry,
                count: 10,
            },
            seed: 0,
        };
        assert!(generate(&spec).is_err());
    }

    #[test]
    fn boltzmann_occupancy_matches_quadrature() {
        let potential = Potential::DoubleWell { a: 1.0, b: 0.5 };
        let (lo, hi) = (-2.0, 2.0);
        let spec = DatasetSpec {
            kind: DatasetKind::Boltzmann1d {
                potential: potential.clone(),
                lo,
                hi,
                count: 10_000,
            },
            seed: 11,
        };
        let cloud = generate(&spec).unwrap();
        let barriers = potential.barriers(lo, hi);
        assert_eq!(barriers.len(), 1);
        let split = barriers[0];
        let occupancy = cloud
            .points()
            .column(0)
            .iter()
            .filter(|&&x| x < split)
            .count() as f64
            / cloud.n() as f64;
        // trapezoid quadrature oracle for the Boltzmann weight
        let quad = |a: f64, b: f64| {
            let m = 20_000;
            let h = (b - a) / m as f64;
            let mut acc = 0.5 * ((-potential.value(a)).exp() + (-potential.value(b)).exp());
            for i in 1..m {
                acc += (-potential.value(a + i as f64 * h)).exp();
            }
            acc * h
        };
        let expected = quad(lo, split) / quad(lo, hi);
        assert!(
            (occupancy - expected).abs() < 0.05,
            "occupancy {occupancy}, expected {expected}"
        );
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = DatasetSpec {
            kind: DatasetKind::Gaussians {
                components: vec![
                    GaussianComponent {
                        center: vec![0.0],
                        sigma: 1.0,
                        count: 50,
                    },
                    GaussianComponent {
                        center: vec![5.0],
                        sigma: 0.5,
                        count: 30,
                    },
                ],
            },
            seed: 99,
        };
        let c1 = generate(&spec).unwrap();
        let c2 = generate(&spec).unwrap();
        assert_eq!(c1.points(), c2.points());
        assert_eq!(c1.labels(), c2.labels());
        let labels = c1.labels().unwrap();
        assert!(labels.iter().all(|&l| l < 2));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let cloud = test_cloud(100, 5, 31);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cloud.csv");
        save_csv(&cloud, &path).unwrap();
        let back = load_csv(&path).unwrap();
        assert_eq!(back.n(), 100);
        assert_eq!(back.dim(), 5);
        for (a, b) in cloud.points().iter().zip(back.points().iter()) {
            assert_eq!(a, b, "shortest round-trip serialization is exact");
        }
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = DatasetSpec {
            kind: DatasetKind::Boltzmann1d {
                potential: Potential::DoubleWell { a: 4.0, b: 0.0 },
                lo: -2.0,
                hi: 2.0,
                count: 100,
            },
            seed: 3,
        };
        let json = serde_json::to_string(&spec).unwrap();
        let back: DatasetSpec = serde_json::from_str(&json).unwrap();
        let c1 = generate(&spec).unwrap();
        let c2 = generate(&back).unwrap();
        assert_eq!(c1.points(), c2.points());
    }
}
