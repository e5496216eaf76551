//! Per-mask cache of precomputed `B`, `P` and `Q`, guarded by a lock file.

use std::fs::{self, OpenOptions};
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use paq_core::{DualGram, Projector, ProjectorConfig, Rotator, SamplingMask};
use serde::{Deserialize, Serialize};

use crate::config::{GridConfig, MaskConfig, RotatorConfig, RunConfig};
use crate::error::{CliError, CliResult};
use crate::formats::{read_matrix, read_rotator, write_matrix, write_rotator, write_text};

/// Everything the cached files depend on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheMeta {
    pub grid: GridConfig,
    pub mask: MaskConfig,
    pub rotator: RotatorConfig,
    pub projector: ProjectorConfig,
}

impl CacheMeta {
    pub fn from_config(cfg: &RunConfig) -> Self {
        Self {
            grid: cfg.grid,
            mask: cfg.mask,
            rotator: cfg.rotator,
            projector: cfg.projector,
        }
    }
}

/// File layout of one cache entry (one mask).
#[derive(Debug, Clone)]
pub struct CacheEntry {
    dir: PathBuf,
}

impl CacheEntry {
    pub fn for_mask(cache_dir: &Path, mask: &SamplingMask) -> Self {
        let s = mask.shape();
        let key = format!(
            "{}x{}_f{}_c{}_s{}",
            s.rows(),
            s.cols(),
            mask.fraction(),
            mask.center_fraction(),
            mask.seed()
        );
        Self {
            dir: cache_dir.join(key),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn dual_gram_path(&self) -> PathBuf {
        self.dir.join("B.paqm")
    }

    pub fn projector_path(&self) -> PathBuf {
        self.dir.join("P.paqm")
    }

    pub fn rotator_path(&self) -> PathBuf {
        self.dir.join("Q.paqm")
    }

    pub fn trace_path(&self) -> PathBuf {
        self.dir.join("projector_trace.csv")
    }

    pub fn meta_path(&self) -> PathBuf {
        self.dir.join("meta.json")
    }

    fn lock_path(&self) -> PathBuf {
        self.dir.with_extension("lock")
    }

    /// Takes the entry's lock; fails if another process holds it.
    pub fn lock(&self) -> CliResult<CacheLock> {
        let path = self.lock_path();
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(CacheLock { path }),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => Err(CliError::Cache(format!(
                "cache entry {} is locked by another precompute; if none is running, remove {}",
                self.dir.display(),
                path.display()
            ))),
            Err(e) => Err(CliError::io(path, e)),
        }
    }

    pub fn store(
        &self,
        meta: &CacheMeta,
        b: &DualGram,
        p: &Projector,
        q: &Rotator,
        trace_csv: &str,
    ) -> CliResult<()> {
        write_matrix(&self.dual_gram_path(), b.matrix())?;
        write_matrix(&self.projector_path(), p.matrix())?;
        write_rotator(&self.rotator_path(), q)?;
        write_text(&self.trace_path(), trace_csv)?;
        write_text(
            &self.meta_path(),
            &(serde_json::to_string_pretty(meta)? + "\n"),
        )
    }

    fn check_meta(&self, meta: &CacheMeta) -> CliResult<()> {
        let path = self.meta_path();
        let text = fs::read_to_string(&path).map_err(|_| self.missing())?;
        let stored: CacheMeta = serde_json::from_str(&text).map_err(|e| {
            CliError::Cache(format!(
                "{}: unreadable cache metadata ({e}); rerun `paq precompute`",
                path.display()
            ))
        })?;
        if &stored != meta {
            return Err(CliError::Cache(format!(
                "cache entry {} was built with a different configuration; rerun `paq precompute` with this config",
                self.dir.display()
            )));
        }
        Ok(())
    }

    fn missing(&self) -> CliError {
        CliError::Cache(format!(
            "no precomputed preconditioners in {}; run `paq precompute --config <same config>` first",
            self.dir.display()
        ))
    }

    pub fn exists(&self) -> bool {
        self.meta_path().is_file()
    }

    pub fn load_projector(&self, meta: &CacheMeta) -> CliResult<Projector> {
        self.check_meta(meta)?;
        let path = self.projector_path();
        if !path.is_file() {
            return Err(self.missing());
        }
        Ok(Projector::from_matrix(read_matrix(&path)?)?)
    }

    pub fn load_rotator(&self, meta: &CacheMeta) -> CliResult<Rotator> {
        self.check_meta(meta)?;
        let path = self.rotator_path();
        if !path.is_file() {
            return Err(self.missing());
        }
        read_rotator(&path)
    }
}

/// Removes the lock file on drop.
#[derive(Debug)]
pub struct CacheLock {
    path: PathBuf,
}

impl Drop for CacheLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
