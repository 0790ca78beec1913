//! Command-line pipeline: generate clouds, embed, cluster, and validate the
//! graph spectrum against the drift-diffusion oracle and exit-time runs.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use diffmap::clustering::{cluster, detect_gap};
use diffmap::datasets::{self, DatasetSpec};
use diffmap::diffusion::diffusion_map;
use diffmap::error::{DiffmapError, Result};
use diffmap::fokker_planck::{compare_spectra, discretize_fp, fp_eigenpairs, PotentialGrid};
use diffmap::kernel::{build_affinity, normalize_markov, select_epsilon, EpsilonRule, KernelConfig};
use diffmap::langevin::{mean_exit_time, Domain, LangevinConfig, Region};
use diffmap::potential::Potential;
use diffmap::report::{
    write_json, write_labels_csv, write_matrix_csv, write_spectrum_csv, RunReport,
};
use diffmap::spectral::decompose;
use diffmap::PointCloud;

#[derive(Parser)]
#[command(name = "diffmap", version, about = "Diffusion-map toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic point cloud from a JSON spec file.
    Generate {
        /// JSON dataset spec.
        #[arg(long)]
        spec: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the diffusion-map embedding of a point cloud.
    Embed {
        /// Input cloud CSV.
        #[arg(long)]
        input: PathBuf,
        /// Kernel scale; overrides --epsilon-rule.
        #[arg(long)]
        epsilon: Option<f64>,
        /// `median` or `knn:K` (mean squared distance to the K-th neighbor).
        #[arg(long, default_value = "median")]
        epsilon_rule: String,
        /// `gaussian` or `self-tuning:K`.
        #[arg(long, default_value = "gaussian")]
        kernel: String,
        /// Embedding dimension (nontrivial eigenvector count).
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Diffusion time.
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Output prefix; writes <prefix>_embedding.csv, <prefix>_spectrum.csv
        /// and <prefix>_report.json.
        #[arg(long)]
        out_prefix: String,
    },
    /// Spectral-gap clustering of a point cloud.
    Cluster {
        /// Input cloud CSV.
        #[arg(long)]
        input: PathBuf,
        /// `auto` (spectral-gap detection) or an explicit cluster count.
        #[arg(long, default_value = "auto")]
        k: String,
        /// Largest k considered by auto-detection.
        #[arg(long, default_value_t = 10)]
        max_k: usize,
        /// Kernel scale; overrides --epsilon-rule.
        #[arg(long)]
        epsilon: Option<f64>,
        /// `median` or `knn:K`.
        #[arg(long, default_value = "median")]
        epsilon_rule: String,
        /// `gaussian` or `self-tuning:K`.
        #[arg(long, default_value = "gaussian")]
        kernel: String,
        /// Diffusion time for the clustering coordinates.
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// k-means initialization seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output prefix; writes <prefix>_labels.csv and <prefix>_gap.json.
        #[arg(long)]
        out_prefix: String,
    },
    /// Compare graph eigenvalue rates against the finite-difference
    /// drift-diffusion oracle on sampled data.
    ValidateFp {
        /// `const`, `double_well:a,b`, `harmonic:k`, or a CSV table path.
        #[arg(long)]
        potential: String,
        /// Finite-difference nodes.
        #[arg(long, default_value_t = 400)]
        grid: usize,
        /// Points sampled from the Boltzmann density of the potential.
        #[arg(long, default_value_t = 2000)]
        n_samples: usize,
        /// Kernel scale as a multiple of the median-rule value.
        #[arg(long, default_value_t = 1.0)]
        epsilon_scale: f64,
        /// Number of nontrivial modes compared.
        #[arg(long, default_value_t = 2)]
        modes: usize,
        /// Domain lower edge.
        #[arg(long, default_value_t = 0.0)]
        lo: f64,
        /// Domain upper edge.
        #[arg(long, default_value_t = 1.0)]
        hi: f64,
        /// Sampling seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output prefix; writes <prefix>_fp.json.
        #[arg(long)]
        out_prefix: String,
    },
    /// Mean first-passage time of overdamped dynamics, compared to the
    /// oracle's slowest relaxation rate.
    ExitTime {
        /// `const`, `double_well:a,b`, `harmonic:k`, or a CSV table path.
        #[arg(long)]
        potential: String,
        /// Noise strength D in the sqrt(2 D dt) increment.
        #[arg(long, default_value_t = 1.0)]
        diffusion: f64,
        /// Integrator step.
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Independent trajectories.
        #[arg(long, default_value_t = 2000)]
        trials: u64,
        /// Step cap per trajectory.
        #[arg(long, default_value_t = 20_000_000)]
        max_steps: u64,
        /// Starting position.
        #[arg(long, default_value_t = 1.0)]
        start: f64,
        /// A trajectory exits once x drops below this threshold.
        #[arg(long, default_value_t = -0.1)]
        exit_below: f64,
        /// Reflecting domain lower edge.
        #[arg(long, default_value_t = -2.5)]
        lo: f64,
        /// Reflecting domain upper edge.
        #[arg(long, default_value_t = 2.5)]
        hi: f64,
        /// Finite-difference nodes for the rate comparison.
        #[arg(long, default_value_t = 400)]
        grid: usize,
        /// Noise seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output prefix; writes <prefix>_exit.json.
        #[arg(long)]
        out_prefix: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_thread_pool();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                DiffmapError::Io(_) | DiffmapError::Parse { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

/// DIFFMAP_THREADS caps internal parallelism; 0 or unset means automatic.
fn init_thread_pool() {
    if let Ok(v) = std::env::var("DIFFMAP_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n > 0 {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .expect("thread pool is built once, before any parallel work");
            }
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate { spec, out } => cmd_generate(&spec, &out),
        Command::Embed {
            input,
            epsilon,
            epsilon_rule,
            kernel,
            k,
            t,
            out_prefix,
        } => cmd_embed(&input, epsilon, &epsilon_rule, &kernel, k, t, &out_prefix),
        Command::Cluster {
            input,
            k,
            max_k,
            epsilon,
            epsilon_rule,
            kernel,
            t,
            seed,
            out_prefix,
        } => cmd_cluster(
            &input,
            &k,
            max_k,
            epsilon,
            &epsilon_rule,
            &kernel,
            t,
            seed,
            &out_prefix,
        ),
        Command::ValidateFp {
            potential,
            grid,
            n_samples,
            epsilon_scale,
            modes,
            lo,
            hi,
            seed,
            out_prefix,
        } => cmd_validate_fp(
            &potential,
            grid,
            n_samples,
            epsilon_scale,
            modes,
            lo,
            hi,
            seed,
            &out_prefix,
        ),
        Command::ExitTime {
            potential,
            diffusion,
            dt,
            trials,
            max_steps,
            start,
            exit_below,
            lo,
            hi,
            grid,
            seed,
            out_prefix,
        } => cmd_exit_time(
            &potential, diffusion, dt, trials, max_steps, start, exit_below, lo, hi, grid, seed,
            &out_prefix,
        ),
    }
}

fn cmd_generate(spec_path: &PathBuf, out: &PathBuf) -> Result<()> {
    let text = std::fs::read_to_string(spec_path)?;
    let spec: DatasetSpec = serde_json::from_str(&text).map_err(|e| DiffmapError::Parse {
        row: e.line(),
        msg: e.to_string(),
    })?;
    let cloud = datasets::generate(&spec)?;
    cloud.save_csv(out)?;
    Ok(())
}

fn parse_kernel(
    cloud: &PointCloud,
    kernel: &str,
    epsilon: Option<f64>,
    epsilon_rule: &str,
) -> Result<(KernelConfig, f64)> {
    if let Some(k) = kernel.strip_prefix("self-tuning:") {
        let k: usize = k
            .parse()
            .map_err(|_| DiffmapError::Range(format!("invalid neighbor rank {k:?}")))?;
        return Ok((KernelConfig::self_tuning(k), f64::NAN));
    }
    if kernel != "gaussian" {
        return Err(DiffmapError::Range(format!(
            "unknown kernel {kernel:?}; use gaussian or self-tuning:K"
        )));
    }
    let eps = match epsilon {
        Some(e) => e,
        None => {
            let rule = if epsilon_rule == "median" {
                EpsilonRule::MedianSqDist
            } else if let Some(k) = epsilon_rule.strip_prefix("knn:") {
                EpsilonRule::KnnScale(k.parse().map_err(|_| {
                    DiffmapError::Range(format!("invalid neighbor rank {k:?}"))
                })?)
            } else {
                return Err(DiffmapError::Range(format!(
                    "unknown epsilon rule {epsilon_rule:?}; use median or knn:K"
                )));
            };
            select_epsilon(cloud, rule)?
        }
    };
    Ok((KernelConfig::gaussian(eps), eps))
}

#[allow(clippy::too_many_arguments)]
fn cmd_embed(
    input: &PathBuf,
    epsilon: Option<f64>,
    epsilon_rule: &str,
    kernel: &str,
    k: usize,
    t: f64,
    out_prefix: &str,
) -> Result<()> {
    let total = Instant::now();
    let cloud = PointCloud::load_csv(input)?;
    let (config, eps) = parse_kernel(&cloud, kernel, epsilon, epsilon_rule)?;
    let graph_start = Instant::now();
    let graph = build_affinity(&cloud, &config)?;
    let markov = normalize_markov(&graph)?;
    let graph_ms = graph_start.elapsed().as_secs_f64() * 1e3;

    let eig_start = Instant::now();
    let m = (k + 1).min(cloud.n());
    let decomp = decompose(&markov, m)?;
    let map = diffusion_map(&decomp, t, m - 1)?;
    let eig_ms = eig_start.elapsed().as_secs_f64() * 1e3;

    write_matrix_csv(
        map.coords.view(),
        "c",
        format!("{out_prefix}_embedding.csv"),
    )?;
    write_spectrum_csv(
        decomp.eigenvalues().view(),
        format!("{out_prefix}_spectrum.csv"),
    )?;
    let report = RunReport {
        command: "embed".into(),
        config: json!({
            "input": input,
            "epsilon": if eps.is_nan() { serde_json::Value::Null } else { json!(eps) },
            "epsilon_rule": epsilon_rule,
            "kernel": kernel,
            "k": k,
            "t": t,
        }),
        spectrum: Some(decomp.eigenvalues().to_vec()),
        gap: None,
        accuracy: None,
        timings_ms: vec![
            ("graph".into(), graph_ms),
            ("eigen".into(), eig_ms),
            ("total".into(), total.elapsed().as_secs_f64() * 1e3),
        ],
    };
    write_json(&report, format!("{out_prefix}_report.json"))?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_cluster(
    input: &PathBuf,
    k_arg: &str,
    max_k: usize,
    epsilon: Option<f64>,
    epsilon_rule: &str,
    kernel: &str,
    t: f64,
    seed: u64,
    out_prefix: &str,
) -> Result<()> {
    let cloud = PointCloud::load_csv(input)?;
    let (config, _) = parse_kernel(&cloud, kernel, epsilon, epsilon_rule)?;
    let graph = build_affinity(&cloud, &config)?;
    let markov = normalize_markov(&graph)?;
    let m = (max_k + 2).min(cloud.n());
    let decomp = decompose(&markov, m)?;
    let gap = detect_gap(
        decomp.eigenvalues().as_slice().expect("contiguous"),
        max_k.min(m - 1),
    )?;

    let k = if k_arg == "auto" {
        gap.k
    } else {
        k_arg
            .parse()
            .map_err(|_| DiffmapError::Range(format!("invalid cluster count {k_arg:?}")))?
    };
    let labels = if k < 2 {
        vec![0usize; cloud.n()]
    } else {
        let map = diffusion_map(&decomp, t, (k - 1).max(1).min(m - 1))?;
        cluster(&map, k, seed)?.labels
    };
    write_labels_csv(&labels, format!("{out_prefix}_labels.csv"))?;
    write_json(&gap, format!("{out_prefix}_gap.json"))?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_validate_fp(
    potential_spec: &str,
    grid: usize,
    n_samples: usize,
    epsilon_scale: f64,
    modes: usize,
    lo: f64,
    hi: f64,
    seed: u64,
    out_prefix: &str,
) -> Result<()> {
    if epsilon_scale <= 0.0 {
        return Err(DiffmapError::Range(format!(
            "epsilon scale {epsilon_scale} must be positive"
        )));
    }
    let potential = Potential::parse_spec(potential_spec)?;
    let spec = DatasetSpec {
        kind: datasets::DatasetKind::Boltzmann1d {
            potential: potential.clone(),
            lo,
            hi,
            count: n_samples,
        },
        seed,
    };
    let cloud = datasets::generate(&spec)?;
    let epsilon = epsilon_scale * select_epsilon(&cloud, EpsilonRule::MedianSqDist)?;
    let graph = build_affinity(&cloud, &KernelConfig::gaussian(epsilon))?;
    let markov = normalize_markov(&graph)?;
    let decomp = decompose(&markov, modes + 1)?;

    let pgrid = PotentialGrid::from_potential_1d(&potential, lo, hi, grid)?;
    let op = discretize_fp(&pgrid)?;
    let pairs = fp_eigenpairs(&op, modes + 1)?;
    let comparison = compare_spectra(&decomp, epsilon, &pairs.rates, modes)?;
    write_json(&comparison, format!("{out_prefix}_fp.json"))?;
    println!(
        "calibration {} spread {}",
        comparison.calibration, comparison.spread
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_exit_time(
    potential_spec: &str,
    diffusion: f64,
    dt: f64,
    trials: u64,
    max_steps: u64,
    start: f64,
    exit_below: f64,
    lo: f64,
    hi: f64,
    grid: usize,
    seed: u64,
    out_prefix: &str,
) -> Result<()> {
    let potential = Potential::parse_spec(potential_spec)?;
    let config = LangevinConfig {
        diffusion,
        dt,
        max_steps: max_steps as usize,
        seed,
        domain: Domain::interval(lo, hi),
        thin: 1,
    };
    let region = Region::Below {
        axis: 0,
        threshold: exit_below,
    };
    let estimate = mean_exit_time(&potential, &[start], &region, &config, trials as usize)?;

    let pgrid = PotentialGrid::from_potential_1d(&potential, lo, hi, grid)?;
    let op = discretize_fp(&pgrid)?;
    let pairs = fp_eigenpairs(&op, 2)?;
    let mu1 = pairs.rates[1];
    let out = json!({
        "estimate": estimate,
        "fp_mu1": mu1,
        "mean_times_rate": estimate.mean * mu1.abs(),
    });
    write_json(&out, format!("{out_prefix}_exit.json"))?;
    println!(
        "mean {} cov {} mean*|mu1| {}",
        estimate.mean,
        estimate.coefficient_of_variation,
        estimate.mean * mu1.abs()
    );
    Ok(())
}
