//! JSON run configuration.
//!
//! Every section has defaults, unknown keys are rejected, and the fully
//! materialised config is written next to every output so runs are
//! self-describing.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use paq_core::transforms::make_mask;
use paq_core::{GridShape, IstaConfig, ProjectorConfig, SamplingMask};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub mask: MaskConfig,
    pub rotator: RotatorConfig,
    pub projector: ProjectorConfig,
    pub solver: IstaConfig,
    pub coherence: CoherenceConfig,
    pub bench: BenchConfig,
    pub paths: PathsConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub rows: usize,
    pub cols: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            rows: 128,
            cols: 128,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskConfig {
    pub fraction: f64,
    pub center_fraction: f64,
    pub seed: u64,
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self {
            fraction: 0.2,
            center_fraction: 0.08,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RotatorConfig {
    pub epsilon: f64,
    pub nnz_per_row: usize,
    pub seed: u64,
}

impl Default for RotatorConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.005,
            nnz_per_row: 8,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CoherenceMode {
    #[default]
    Exact,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoherenceConfig {
    pub mode: CoherenceMode,
    /// Pairs drawn in sampled mode.
    pub n_pairs: u64,
    pub seed: u64,
}

impl Default for CoherenceConfig {
    fn default() -> Self {
        Self {
            mode: CoherenceMode::Exact,
            n_pairs: 200_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PhantomKind {
    #[default]
    DctSparse,
    SheppLoganLike,
    File,
}

/// Which preconditioners a reconstruction uses.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, ValueEnum,
)]
#[serde(rename_all = "kebab-case")]
pub enum ReconMode {
    Baseline,
    QOnly,
    POnly,
    Paq,
}

impl ReconMode {
    pub const ALL: [ReconMode; 4] = [
        ReconMode::Baseline,
        ReconMode::QOnly,
        ReconMode::POnly,
        ReconMode::Paq,
    ];

    pub fn uses_projector(self) -> bool {
        matches!(self, ReconMode::POnly | ReconMode::Paq)
    }

    pub fn uses_rotator(self) -> bool {
        matches!(self, ReconMode::QOnly | ReconMode::Paq)
    }

    pub fn label(self) -> &'static str {
        match self {
            ReconMode::Baseline => "baseline",
            ReconMode::QOnly => "q-only",
            ReconMode::POnly => "p-only",
            ReconMode::Paq => "paq",
        }
    }
}

impl std::fmt::Display for ReconMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub phantom: PhantomKind,
    /// Non-zero DCT coefficients of `dct-sparse` phantoms.
    pub sparsity_k: usize,
    pub phantom_file: Option<PathBuf>,
    /// Distinct phantoms per seed.
    pub phantoms: usize,
    pub seeds: Vec<u64>,
    /// Measurement noise level; each complex sample gets `N(0, σ²/2)` per part.
    pub sigma: f64,
    pub configs: Vec<ReconMode>,
    pub peak: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            phantom: PhantomKind::DctSparse,
            sparsity_k: 50,
            phantom_file: None,
            phantoms: 1,
            seeds: (0..10).collect(),
            sigma: 0.0,
            configs: ReconMode::ALL.to_vec(),
            peak: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub out_dir: PathBuf,
    pub cache_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("out"),
            cache_dir: PathBuf::from("cache"),
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn core_invalid(e: paq_core::Error) -> CliError {
    invalid(e.to_string())
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serialisable") + "\n"
    }

    /// `--seed` override: mask and rotator seeds become `seed`, bench seeds
    /// become `seed, seed + 1, ...` (same count).
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.mask.seed = seed;
        self.rotator.seed = seed;
        let n = self.bench.seeds.len().max(1) as u64;
        self.bench.seeds = (0..n).map(|i| seed.wrapping_add(i)).collect();
        self
    }

    pub fn shape(&self) -> CliResult<GridShape> {
        GridShape::new(self.grid.rows, self.grid.cols).map_err(core_invalid)
    }

    /// Mask built from `mask` with an explicit seed.
    pub fn mask_with_seed(&self, seed: u64) -> CliResult<SamplingMask> {
        make_mask(
            self.shape()?,
            self.mask.fraction,
            self.mask.center_fraction,
            seed,
        )
        .map_err(core_invalid)
    }

    pub fn build_mask(&self) -> CliResult<SamplingMask> {
        self.mask_with_seed(self.mask.seed)
    }

    pub fn validate(&self) -> CliResult<()> {
        let shape = self.shape()?;
        self.build_mask()?;
        let r = &self.rotator;
        if !(r.epsilon >= 0.0 && r.epsilon.is_finite()) {
            return Err(invalid(format!(
                "rotator.epsilon must be finite and >= 0, got {}",
                r.epsilon
            )));
        }
        if r.nnz_per_row >= shape.len() {
            return Err(invalid(format!(
                "rotator.nnz_per_row must be below N = {}, got {}",
                shape.len(),
                r.nnz_per_row
            )));
        }
        self.projector.validate().map_err(core_invalid)?;
        self.solver.validate().map_err(core_invalid)?;
        if self.coherence.n_pairs == 0 {
            return Err(invalid("coherence.n_pairs must be at least 1"));
        }
        let b = &self.bench;
        if b.seeds.is_empty() {
            return Err(invalid("bench.seeds must not be empty"));
        }
        if b.phantoms == 0 {
            return Err(invalid("bench.phantoms must be at least 1"));
        }
        if b.configs.is_empty() {
            return Err(invalid("bench.configs must not be empty"));
        }
        if !(b.sigma >= 0.0 && b.sigma.is_finite()) {
            return Err(invalid(format!(
                "bench.sigma must be finite and >= 0, got {}",
                b.sigma
            )));
        }
        if !(b.peak > 0.0 && b.peak.is_finite()) {
            return Err(invalid(format!(
                "bench.peak must be positive, got {}",
                b.peak
            )));
        }
        match b.phantom {
            PhantomKind::DctSparse if b.sparsity_k == 0 || b.sparsity_k > shape.len() => {
                return Err(invalid(format!(
                    "bench.sparsity_k must be in 1..={} for dct-sparse phantoms, got {}",
                    shape.len(),
                    b.sparsity_k
                )))
            }
            PhantomKind::File if b.phantom_file.is_none() => {
                return Err(invalid("bench.phantom = \"file\" needs bench.phantom_file"))
            }
            _ => {}
        }
        Ok(())
    }
}
