//! `paq` subcommands. Each `cmd_*` function is a pure function of the config
//! (plus input/cache files) and writes its artifacts under `paths.out_dir`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use paq_core::coherence::{
    mutual_coherence_exact, mutual_coherence_sampled, EXACT_COLUMN_LIMIT, HISTOGRAM_BINS,
};
use paq_core::solver::reconstruct_from_measurements;
use paq_core::{
    derive_seed, CoherenceReport, EffectiveOperator, ImageVector, Rotator, SensingOperator,
};
use serde::Serialize;
use serde_json::json;

use crate::bench::{add_noise, make_phantom, psnr, run_benchmark, simulate, BenchResult};
use crate::cache::{CacheEntry, CacheMeta};
use crate::config::{CoherenceMode, ReconMode, RunConfig};
use crate::error::{CliError, CliResult};
use crate::formats::{mask_to_text, read_pgm, write_pgm, write_text, Pgm};
use crate::parallel::precompute_projector;

#[derive(Debug, Parser)]
#[command(
    name = "paq",
    version,
    about = "Dual-space preconditioning for Cartesian CS-MRI"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON run configuration (defaults when omitted).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the mask, rotator and bench seeds.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (overrides `paths.out_dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the sampling mask as a line list and a PGM preview.
    Mask(Common),
    /// Probe B, optimise P, build Q and store them in the cache.
    Precompute(Common),
    /// Reconstruct one image under a chosen preconditioning mode.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = ReconMode::Baseline)]
        mode: ReconMode,
        /// Ground-truth PGM; a phantom from the bench section is used otherwise.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Mutual coherence of A and of P A Q.
    Coherence(Common),
    /// Baseline / Q-only / P-only / PAQ PSNR benchmark.
    Bench(Common),
}

impl Common {
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg = cfg.with_seed(seed);
        }
        if let Some(out) = &self.out {
            cfg.paths.out_dir = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Mask(c) => cmd_mask(&c.resolve()?).map(|_| ()),
        Command::Precompute(c) => cmd_precompute(&c.resolve()?).map(|_| ()),
        Command::Reconstruct {
            common,
            mode,
            input,
        } => cmd_reconstruct(&common.resolve()?, mode, input.as_deref()).map(|_| ()),
        Command::Coherence(c) => cmd_coherence(&c.resolve()?).map(|_| ()),
        Command::Bench(c) => {
            let r = cmd_bench(&c.resolve()?)?;
            print!("{}", r.summary_table());
            Ok(())
        }
    }
}

fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.paths.out_dir.join(name)
}

fn write_config(cfg: &RunConfig) -> CliResult<()> {
    write_text(&out_path(cfg, "config.json"), &cfg.to_json())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

/// Writes `mask.txt`, `mask.pgm` and `config.json`; returns the line count.
pub fn cmd_mask(cfg: &RunConfig) -> CliResult<usize> {
    let mask = cfg.build_mask()?;
    let shape = mask.shape();
    let px: Vec<f64> = mask
        .to_binary()
        .into_iter()
        .map(|b| if b { 1.0 } else { 0.0 })
        .collect();
    write_text(&out_path(cfg, "mask.txt"), &mask_to_text(&mask))?;
    write_pgm(
        &out_path(cfg, "mask.pgm"),
        &Pgm::from_unit(shape.cols(), shape.rows(), &px, 255),
    )?;
    write_config(cfg)?;
    println!(
        "mask {shape}: {} of {} lines ({:.4}), M = {}",
        mask.lines().len(),
        shape.rows(),
        mask.lines().len() as f64 / shape.rows() as f64,
        mask.measurement_len()
    );
    Ok(mask.lines().len())
}

#[derive(Debug, Clone, Serialize)]
pub struct PrecomputeSummary {
    pub cache_dir: PathBuf,
    pub measurement_len: usize,
    pub objective_initial: f64,
    pub objective_final: f64,
    pub iterations: usize,
    pub converged: bool,
    pub lipschitz_estimate: f64,
    pub rotator_entries: usize,
}

pub fn cmd_precompute(cfg: &RunConfig) -> CliResult<PrecomputeSummary> {
    let mask = cfg.build_mask()?;
    let op = SensingOperator::new(mask.clone());
    let entry = CacheEntry::for_mask(&cfg.paths.cache_dir, &mask);
    let _lock = entry.lock()?;

    let (b, p) = precompute_projector(&op, &cfg.projector)?;
    let q = Rotator::build(
        mask.shape().len(),
        cfg.rotator.epsilon,
        cfg.rotator.nnz_per_row,
        cfg.rotator.seed,
    )?;
    let t = p.trace();
    let mut trace_csv = String::from("iteration,objective,step\n");
    for (k, j) in t.objective_values.iter().enumerate() {
        let step = if k == 0 {
            String::new()
        } else {
            t.step_sizes[k - 1].to_string()
        };
        trace_csv.push_str(&format!("{k},{j},{step}\n"));
    }
    entry.store(&CacheMeta::from_config(cfg), &b, &p, &q, &trace_csv)?;
    write_text(&out_path(cfg, "projector_trace.csv"), &trace_csv)?;

    let summary = PrecomputeSummary {
        cache_dir: entry.dir().to_path_buf(),
        measurement_len: op.measurement_len(),
        objective_initial: t.objective_values[0],
        objective_final: *t.objective_values.last().expect("trace starts with J(I)"),
        iterations: t.iterations,
        converged: t.converged,
        lipschitz_estimate: t.lipschitz_estimate,
        rotator_entries: q.entries().len(),
    };
    write_json(
        &out_path(cfg, "precompute.json"),
        &json!({ "summary": summary, "config": cfg }),
    )?;
    write_config(cfg)?;
    println!(
        "precompute M = {}: J {:e} -> {:e} in {} iterations; cache {}",
        summary.measurement_len,
        summary.objective_initial,
        summary.objective_final,
        summary.iterations,
        summary.cache_dir.display()
    );
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconMetrics {
    pub mode: ReconMode,
    pub ground_truth: String,
    pub peak: f64,
    pub psnr_db: f64,
    /// PSNR of the written 8-bit image after undoing the min-max scaling.
    pub psnr_8bit_db: f64,
    pub iterations: usize,
    pub converged: bool,
    pub lambda: f64,
    pub step: f64,
    pub scale_min: f64,
    pub scale_max: f64,
}

pub fn cmd_reconstruct(
    cfg: &RunConfig,
    mode: ReconMode,
    input: Option<&Path>,
) -> CliResult<ReconMetrics> {
    let shape = cfg.shape()?;
    let seed0 = cfg.bench.seeds[0];
    let (truth, label) = match input {
        Some(path) => {
            let pgm = read_pgm(path)?;
            if pgm.shape()? != shape {
                return Err(CliError::Config(format!(
                    "{}: image is {}x{}, grid is {shape}",
                    path.display(),
                    pgm.height,
                    pgm.width
                )));
            }
            (
                ImageVector::from_real(shape, &pgm.normalized())?,
                path.display().to_string(),
            )
        }
        None => {
            let ph = make_phantom(
                cfg.bench.phantom,
                shape,
                cfg.bench.sparsity_k,
                derive_seed(seed0, 0),
                cfg.bench.phantom_file.as_deref(),
            )?;
            (
                ph.image,
                format!("{:?} phantom, seed {seed0}", cfg.bench.phantom),
            )
        }
    };

    let mask = cfg.build_mask()?;
    let op = SensingOperator::new(mask.clone());
    let y = add_noise(
        &simulate(&op, &truth)?,
        cfg.bench.sigma,
        derive_seed(seed0, 1),
    )?;

    let entry = CacheEntry::for_mask(&cfg.paths.cache_dir, &mask);
    let meta = CacheMeta::from_config(cfg);
    let p = if mode.uses_projector() {
        Some(entry.load_projector(&meta)?)
    } else {
        None
    };
    let q = match mode {
        ReconMode::Paq => Some(entry.load_rotator(&meta)?),
        ReconMode::QOnly => Some(Rotator::build(
            shape.len(),
            cfg.rotator.epsilon,
            cfg.rotator.nnz_per_row,
            cfg.rotator.seed,
        )?),
        _ => None,
    };
    let eff = EffectiveOperator::new(&op, p.as_ref(), q.as_ref())?;
    let rec = reconstruct_from_measurements(&eff, &y, &cfg.solver)?;

    let magnitude = rec.image.magnitudes();
    let (pgm, lo, hi) = Pgm::from_scaled(shape.cols(), shape.rows(), &magnitude, 255);
    write_pgm(&out_path(cfg, "recon.pgm"), &pgm)?;
    let dequantized: Vec<f64> = pgm
        .pixels
        .iter()
        .map(|&v| lo + v as f64 / 255.0 * (hi - lo))
        .collect();
    let psnr_8bit_db = psnr(
        &truth,
        &ImageVector::from_real(shape, &dequantized)?,
        cfg.bench.peak,
    )?;

    let mut curve = String::from("iteration,objective,residual\n");
    if let (Some(obj), Some(res)) = (&rec.objective_curve, &rec.residual_curve) {
        for (k, (o, r)) in obj.iter().zip(res).enumerate() {
            curve.push_str(&format!("{k},{o},{r}\n"));
        }
    }
    write_text(&out_path(cfg, "convergence.csv"), &curve)?;

    let metrics = ReconMetrics {
        mode,
        ground_truth: label,
        peak: cfg.bench.peak,
        psnr_db: psnr(&truth, &rec.image, cfg.bench.peak)?,
        psnr_8bit_db,
        iterations: rec.iterations,
        converged: rec.converged,
        lambda: rec.lambda,
        step: rec.step,
        scale_min: lo,
        scale_max: hi,
    };
    write_json(
        &out_path(cfg, "metrics.json"),
        &json!({ "metrics": metrics, "config": cfg }),
    )?;
    write_config(cfg)?;
    println!(
        "reconstruct {mode}: PSNR {:.2} dB ({:.2} dB 8-bit), {} iterations",
        metrics.psnr_db, metrics.psnr_8bit_db, metrics.iterations
    );
    Ok(metrics)
}

#[derive(Debug, Clone, Serialize)]
pub struct CoherenceComparison {
    pub baseline: CoherenceReport,
    pub paq: CoherenceReport,
    pub baseline_tail_above_half: f64,
    pub paq_tail_above_half: f64,
    pub projector_source: String,
}

pub fn cmd_coherence(cfg: &RunConfig) -> CliResult<CoherenceComparison> {
    let shape = cfg.shape()?;
    if cfg.coherence.mode == CoherenceMode::Exact && shape.len() > EXACT_COLUMN_LIMIT {
        return Err(CliError::Config(format!(
            "exact coherence is limited to N <= {EXACT_COLUMN_LIMIT} columns (grid {shape} has {}); \
             set coherence.mode = \"sampled\" and coherence.n_pairs",
            shape.len()
        )));
    }
    let mask = cfg.build_mask()?;
    let op = SensingOperator::new(mask.clone());
    let entry = CacheEntry::for_mask(&cfg.paths.cache_dir, &mask);
    let meta = CacheMeta::from_config(cfg);
    let (p, q, source) = if entry.exists() {
        (
            entry.load_projector(&meta)?,
            entry.load_rotator(&meta)?,
            format!("cache {}", entry.dir().display()),
        )
    } else {
        let (_, p) = precompute_projector(&op, &cfg.projector)?;
        let q = Rotator::build(
            shape.len(),
            cfg.rotator.epsilon,
            cfg.rotator.nnz_per_row,
            cfg.rotator.seed,
        )?;
        (p, q, "computed in-process".to_string())
    };
    let paq = EffectiveOperator::new(&op, Some(&p), Some(&q))?;

    let (base_report, paq_report) = match cfg.coherence.mode {
        CoherenceMode::Exact => (mutual_coherence_exact(&op)?, mutual_coherence_exact(&paq)?),
        CoherenceMode::Sampled => {
            let (n, seed) = (cfg.coherence.n_pairs, cfg.coherence.seed);
            (
                mutual_coherence_sampled(&op, n, seed)?,
                mutual_coherence_sampled(&paq, n, seed)?,
            )
        }
    };

    let mut csv = String::from("bin_lo,bin_hi,baseline,paq\n");
    for k in 0..HISTOGRAM_BINS {
        let (lo, hi) = CoherenceReport::bin_edges(k);
        csv.push_str(&format!(
            "{lo},{hi},{},{}\n",
            base_report.offdiag_histogram[k], paq_report.offdiag_histogram[k]
        ));
    }
    write_text(&out_path(cfg, "coherence.csv"), &csv)?;

    let result = CoherenceComparison {
        baseline_tail_above_half: base_report.tail_fraction(0.5),
        paq_tail_above_half: paq_report.tail_fraction(0.5),
        baseline: base_report,
        paq: paq_report,
        projector_source: source,
    };
    write_json(
        &out_path(cfg, "coherence.json"),
        &json!({ "coherence": result, "config": cfg }),
    )?;
    write_config(cfg)?;
    println!("{:<10}{:>12}{:>12}", "", "baseline", "paq");
    println!(
        "{:<10}{:>12.6}{:>12.6}",
        "mu", result.baseline.mu, result.paq.mu
    );
    println!(
        "{:<10}{:>12.6}{:>12.6}",
        "mean", result.baseline.mean_offdiag, result.paq.mean_offdiag
    );
    println!(
        "{:<10}{:>12.6}{:>12.6}",
        "tail>=0.5", result.baseline_tail_above_half, result.paq_tail_above_half
    );
    Ok(result)
}

/// Runs the benchmark and writes `bench.csv`, `timing.csv`, `summary.txt`,
/// `summary.json`. Fails only if every case failed.
pub fn cmd_bench(cfg: &RunConfig) -> CliResult<BenchResult> {
    let result = run_benchmark(cfg)?;
    write_text(&out_path(cfg, "bench.csv"), &result.to_csv())?;
    write_text(&out_path(cfg, "timing.csv"), &result.timing_csv())?;
    write_text(&out_path(cfg, "summary.txt"), &result.summary_table())?;
    write_json(
        &out_path(cfg, "summary.json"),
        &json!({ "summary": result.summary, "peak": result.peak, "config": cfg }),
    )?;
    write_config(cfg)?;
    if result.all_failed() {
        let first = result
            .rows
            .iter()
            .find_map(|r| r.error.clone())
            .unwrap_or_default();
        return Err(CliError::Failed(format!(
            "every benchmark case failed; first error: {first}"
        )));
    }
    Ok(result)
}
