//! Diffusion-map toolkit: random-walk graphs on point clouds, spectral
//! embeddings and diffusion distances, spectral-gap clustering, and
//! validation of the graph spectrum against a drift-diffusion
//! finite-difference oracle and Langevin exit-time simulations.

pub mod cloud;
pub mod clustering;
pub mod datasets;
pub mod diffusion;
mod eigh;
pub mod error;
pub mod fokker_planck;
pub mod kernel;
pub mod langevin;
pub mod potential;
pub mod report;
pub mod spectral;

pub use cloud::PointCloud;
pub use error::{DiffmapError, Result};
pub use kernel::{build_affinity, normalize_markov, EpsilonRule, KernelConfig, KernelFamily};
pub use spectral::{decompose, SpectralDecomposition};
