//! Phantoms, noise, PSNR and the baseline / Q-only / P-only / PAQ harness.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use paq_core::solver::reconstruct_from_measurements;
use paq_core::transforms::{dct2_adjoint, dct2_unitary};
use paq_core::{
    derive_seed, CoefficientVector, Complex64, EffectiveOperator, GridShape, ImageVector,
    LinearOperator, Projector, Rotator, SensingOperator,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{PhantomKind, ReconMode, RunConfig};
use crate::error::{CliError, CliResult};
use crate::formats::read_pgm;
use crate::parallel::precompute_projector;

/// Returned by [`psnr`] when the images agree exactly.
pub const PSNR_CAP_DB: f64 = 200.0;

const TAG_PHANTOM: u64 = 0x5048_414e;
const TAG_NOISE: u64 = 0x4e4f_4953;

/// `10 log₁₀(peak² / MSE)` between the magnitude images.
pub fn psnr(reference: &ImageVector, test: &ImageVector, peak: f64) -> CliResult<f64> {
    if reference.shape() != test.shape() {
        return Err(paq_core::Error::ShapeMismatch {
            expected: reference.shape().len(),
            found: test.shape().len(),
        }
        .into());
    }
    if !(peak > 0.0) {
        return Err(CliError::Config(format!(
            "PSNR peak must be positive, got {peak}"
        )));
    }
    let n = reference.data().len() as f64;
    let mse = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(a, b)| (a.norm() - b.norm()).powi(2))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub kind: PhantomKind,
    pub shape: GridShape,
    pub sparsity_k: Option<usize>,
    pub seed: u64,
    /// Real image in `[0, 1]`.
    pub image: ImageVector,
    /// `dct-sparse` only: the K-sparse coefficients before rescaling.
    pub coefficients: Option<CoefficientVector>,
}

pub fn make_phantom(
    kind: PhantomKind,
    shape: GridShape,
    sparsity_k: usize,
    seed: u64,
    file: Option<&Path>,
) -> CliResult<Phantom> {
    let (image, coefficients, k) = match kind {
        PhantomKind::DctSparse => {
            let (image, c) = dct_sparse(shape, sparsity_k, seed)?;
            (image, Some(c), Some(sparsity_k))
        }
        PhantomKind::SheppLoganLike => (shepp_logan_like(shape), None, None),
        PhantomKind::File => {
            let path =
                file.ok_or_else(|| CliError::Config("file phantom without a path".into()))?;
            let pgm = read_pgm(path)?;
            if pgm.shape()? != shape {
                return Err(CliError::Config(format!(
                    "{}: image is {}x{} but the grid is {shape}",
                    path.display(),
                    pgm.height,
                    pgm.width
                )));
            }
            (
                ImageVector::from_real(shape, &pgm.normalized())?,
                None,
                None,
            )
        }
    };
    Ok(Phantom {
        kind,
        shape,
        sparsity_k: k,
        seed,
        image,
        coefficients,
    })
}

fn dct_sparse(
    shape: GridShape,
    k: usize,
    seed: u64,
) -> CliResult<(ImageVector, CoefficientVector)> {
    let n = shape.len();
    if k == 0 || k > n {
        return Err(CliError::Config(format!(
            "sparsity K = {k} outside 1..={n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = vec![0.0; n];
    for idx in rand::seq::index::sample(&mut rng, n, k) {
        let mut v: f64 = StandardNormal.sample(&mut rng);
        if v == 0.0 {
            v = 1.0;
        }
        coeffs[idx] = v;
    }
    let c = CoefficientVector::from_real(shape, &coeffs)?;
    let raw: Vec<f64> = dct2_unitary(&c)?.data().iter().map(|z| z.re).collect();
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // a constant image (e.g. K = 1 on DC) has no range to stretch
    let scaled: Vec<f64> = if hi > lo {
        raw.iter()
            .map(|&v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0))
            .collect()
    } else {
        vec![1.0; n]
    };
    Ok((ImageVector::from_real(shape, &scaled)?, c))
}

/// Modified Shepp–Logan head: ten ellipses `(value, a, b, x0, y0, φ°)` on
/// `[-1, 1]²`, summed and clipped to `[0, 1]`.
fn shepp_logan_like(shape: GridShape) -> ImageVector {
    const ELLIPSES: [(f64, f64, f64, f64, f64, f64); 10] = [
        (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
        (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
        (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
        (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
        (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
        (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
        (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
        (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
        (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
        (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
    ];
    let (rows, cols) = (shape.rows(), shape.cols());
    let mut px = vec![0.0; shape.len()];
    for r in 0..rows {
        let y = 1.0 - 2.0 * (r as f64 + 0.5) / rows as f64;
        for c in 0..cols {
            let x = 2.0 * (c as f64 + 0.5) / cols as f64 - 1.0;
            let mut v = 0.0;
            for &(value, a, b, x0, y0, phi) in &ELLIPSES {
                let (s, co) = phi.to_radians().sin_cos();
                let (dx, dy) = (x - x0, y - y0);
                let u = dx * co + dy * s;
                let w = -dx * s + dy * co;
                if (u / a).powi(2) + (w / b).powi(2) <= 1.0 {
                    v += value;
                }
            }
            px[r * cols + c] = v.clamp(0.0, 1.0);
        }
    }
    ImageVector::from_real(shape, &px).expect("length matches shape")
}

/// Adds i.i.d. complex Gaussian noise with `N(0, σ²/2)` per component.
pub fn add_noise(y: &[Complex64], sigma: f64, seed: u64) -> CliResult<Vec<Complex64>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(CliError::Config(format!(
            "noise sigma must be finite and >= 0, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(y.to_vec());
    }
    let normal = Normal::new(0.0, sigma / std::f64::consts::SQRT_2).expect("valid sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(y.iter()
        .map(|&z| {
            let re = normal.sample(&mut rng);
            let im = normal.sample(&mut rng);
            z + Complex64::new(re, im)
        })
        .collect())
}

/// Physical measurements `A Ψᴴ x` of an image.
pub fn simulate(op: &SensingOperator, image: &ImageVector) -> CliResult<Vec<Complex64>> {
    let c = dct2_adjoint(image)?;
    Ok(op.apply(c.data())?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub phantom_id: usize,
    pub seed: u64,
    pub config: ReconMode,
    pub psnr_db: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub lambda: Option<f64>,
    pub runtime_s: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigSummary {
    pub config: ReconMode,
    pub cases: usize,
    pub failed: usize,
    pub mean_psnr_db: Option<f64>,
    pub std_psnr_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchResult {
    pub peak: f64,
    pub rows: Vec<BenchRow>,
    pub summary: Vec<ConfigSummary>,
}

impl BenchResult {
    pub fn summary_for(&self, mode: ReconMode) -> Option<&ConfigSummary> {
        self.summary.iter().find(|s| s.config == mode)
    }

    pub fn all_failed(&self) -> bool {
        self.rows.iter().all(|r| r.error.is_some())
    }

    /// One row per case, without wall-clock times (those go to
    /// [`timing_csv`](Self::timing_csv)) so reruns are byte-identical.
    pub fn to_csv(&self) -> String {
        let mut s =
            String::from("phantom_id,seed,config,psnr_db,iterations,converged,lambda,status\n");
        for r in &self.rows {
            let opt = |v: Option<String>| v.unwrap_or_default();
            let status = match &r.error {
                None => "ok".to_string(),
                Some(e) => format!("\"error: {}\"", e.replace('"', "'")),
            };
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.phantom_id,
                r.seed,
                r.config,
                opt(r.psnr_db.map(|v| v.to_string())),
                opt(r.iterations.map(|v| v.to_string())),
                opt(r.converged.map(|v| v.to_string())),
                opt(r.lambda.map(|v| v.to_string())),
                status
            ));
        }
        s
    }

    pub fn timing_csv(&self) -> String {
        let mut s = String::from("phantom_id,seed,config,runtime_s\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{}\n",
                r.phantom_id, r.seed, r.config, r.runtime_s
            ));
        }
        s
    }

    /// Cases as rows, configurations as columns, then mean / std rows.
    pub fn summary_table(&self) -> String {
        let modes: Vec<ReconMode> = self.summary.iter().map(|s| s.config).collect();
        let mut cases: Vec<(usize, u64)> =
            self.rows.iter().map(|r| (r.phantom_id, r.seed)).collect();
        cases.dedup();
        let cell = |v: Option<f64>| v.map_or_else(|| "failed".to_string(), |v| format!("{v:.2}"));
        let mut out = format!("PSNR (dB), peak {}\n{:<16}", self.peak, "case");
        for m in &modes {
            out.push_str(&format!("{:>12}", m.label()));
        }
        out.push('\n');
        for (p, s) in cases {
            out.push_str(&format!("{:<16}", format!("p{p}/s{s}")));
            for m in &modes {
                let row = self
                    .rows
                    .iter()
                    .find(|r| r.phantom_id == p && r.seed == s && r.config == *m);
                out.push_str(&format!("{:>12}", cell(row.and_then(|r| r.psnr_db))));
            }
            out.push('\n');
        }
        for (label, pick) in [("mean", 0), ("std", 1)] {
            out.push_str(&format!("{label:<16}"));
            for s in &self.summary {
                let v = if pick == 0 {
                    s.mean_psnr_db
                } else {
                    s.std_psnr_db
                };
                out.push_str(&format!("{:>12}", cell(v)));
            }
            out.push('\n');
        }
        if let Some(base) = self
            .summary_for(ReconMode::Baseline)
            .and_then(|s| s.mean_psnr_db)
        {
            out.push_str(&format!("{:<16}", "delta vs base"));
            for s in &self.summary {
                out.push_str(&format!("{:>12}", cell(s.mean_psnr_db.map(|m| m - base))));
            }
            out.push('\n');
        }
        out
    }
}

fn summarize(rows: &[BenchRow], modes: &[ReconMode]) -> Vec<ConfigSummary> {
    modes
        .iter()
        .map(|&mode| {
            let vals: Vec<f64> = rows
                .iter()
                .filter(|r| r.config == mode)
                .filter_map(|r| r.psnr_db)
                .collect();
            let cases = rows.iter().filter(|r| r.config == mode).count();
            let mean = (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
            let std = mean.map(|m| {
                if vals.len() < 2 {
                    0.0
                } else {
                    (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (vals.len() - 1) as f64)
                        .sqrt()
                }
            });
            ConfigSummary {
                config: mode,
                cases,
                failed: cases - vals.len(),
                mean_psnr_db: mean,
                std_psnr_db: std,
            }
        })
        .collect()
}

/// Mask seed used by the benchmark for bench seed `s`.
pub fn bench_mask_seed(cfg: &RunConfig, s: u64) -> u64 {
    derive_seed(cfg.mask.seed, s)
}

/// Rotator seed used by the benchmark for bench seed `s`.
pub fn bench_rotator_seed(cfg: &RunConfig, s: u64) -> u64 {
    derive_seed(cfg.rotator.seed, s)
}

struct Case {
    phantom_id: usize,
    seed: u64,
    phantom: Result<Phantom, String>,
    op: SensingOperator,
    y: Result<Vec<Complex64>, String>,
    rotator: Result<Rotator, String>,
}

/// Runs every `(phantom, seed)` case under every configured mode.
///
/// For each bench seed the mask, `Q`, and noise are seeded from it; `P` is
/// computed once per distinct mask before the parallel phase. All modes of a
/// case reconstruct from the same simulated `y`. Per-case failures are
/// recorded in the rows rather than aborting the batch.
pub fn run_benchmark(cfg: &RunConfig) -> CliResult<BenchResult> {
    cfg.validate()?;
    let shape = cfg.shape()?;
    let b = &cfg.bench;
    let modes: Vec<ReconMode> = {
        let mut m = b.configs.clone();
        m.sort();
        m.dedup();
        m
    };

    let mut operators: BTreeMap<u64, SensingOperator> = BTreeMap::new();
    for &s in &b.seeds {
        let mask = cfg.mask_with_seed(bench_mask_seed(cfg, s))?;
        operators
            .entry(s)
            .or_insert_with(|| SensingOperator::new(mask));
    }

    let need_p = modes.iter().any(|m| m.uses_projector());
    let projectors: BTreeMap<u64, Result<Projector, String>> = if need_p {
        let mask_seeds: Vec<u64> = {
            let mut v: Vec<u64> = b.seeds.iter().map(|&s| bench_mask_seed(cfg, s)).collect();
            v.sort();
            v.dedup();
            v
        };
        mask_seeds
            .par_iter()
            .map(|&ms| {
                let op = SensingOperator::new(cfg.mask_with_seed(ms).expect("validated above"));
                let p = precompute_projector(&op, &cfg.projector)
                    .map(|(_, p)| p)
                    .map_err(|e| e.to_string());
                (ms, p)
            })
            .collect()
    } else {
        BTreeMap::new()
    };

    let file = b.phantom_file.as_deref();
    let cases: Vec<Case> = (0..b.phantoms)
        .flat_map(|j| b.seeds.iter().map(move |&s| (j, s)))
        .map(|(j, s)| {
            let op = operators[&s].clone();
            let phantom = make_phantom(
                b.phantom,
                shape,
                b.sparsity_k,
                derive_seed(s, TAG_PHANTOM + j as u64),
                file,
            )
            .map_err(|e| e.to_string());
            let y = phantom.as_ref().map_err(Clone::clone).and_then(|ph| {
                let clean = simulate(&op, &ph.image).map_err(|e| e.to_string())?;
                add_noise(&clean, b.sigma, derive_seed(s, TAG_NOISE + j as u64))
                    .map_err(|e| e.to_string())
            });
            let rotator = Rotator::build(
                shape.len(),
                cfg.rotator.epsilon,
                cfg.rotator.nnz_per_row,
                bench_rotator_seed(cfg, s),
            )
            .map_err(|e| e.to_string());
            Case {
                phantom_id: j,
                seed: s,
                phantom,
                op,
                y,
                rotator,
            }
        })
        .collect();

    let tasks: Vec<(&Case, ReconMode)> = cases
        .iter()
        .flat_map(|c| modes.iter().map(move |&m| (c, m)))
        .collect();
    let rows: Vec<BenchRow> = tasks
        .par_iter()
        .map(|&(case, mode)| {
            let started = Instant::now();
            let outcome = run_case(cfg, case, mode, &projectors);
            let runtime_s = started.elapsed().as_secs_f64();
            let mut row = BenchRow {
                phantom_id: case.phantom_id,
                seed: case.seed,
                config: mode,
                psnr_db: None,
                iterations: None,
                converged: None,
                lambda: None,
                runtime_s,
                error: None,
            };
            match outcome {
                Ok((psnr_db, iterations, converged, lambda)) => {
                    row.psnr_db = Some(psnr_db);
                    row.iterations = Some(iterations);
                    row.converged = Some(converged);
                    row.lambda = Some(lambda);
                }
                Err(e) => row.error = Some(e),
            }
            row
        })
        .collect();

    let summary = summarize(&rows, &modes);
    Ok(BenchResult {
        peak: b.peak,
        rows,
        summary,
    })
}

fn run_case(
    cfg: &RunConfig,
    case: &Case,
    mode: ReconMode,
    projectors: &BTreeMap<u64, Result<Projector, String>>,
) -> Result<(f64, usize, bool, f64), String> {
    let phantom = case.phantom.as_ref().map_err(Clone::clone)?;
    let y = case.y.as_ref().map_err(Clone::clone)?;
    let p = if mode.uses_projector() {
        let entry = projectors
            .get(&case.op.mask().seed())
            .ok_or("projector missing from cache")?;
        Some(entry.as_ref().map_err(Clone::clone)?)
    } else {
        None
    };
    let q = if mode.uses_rotator() {
        Some(case.rotator.as_ref().map_err(Clone::clone)?)
    } else {
        None
    };
    let op = EffectiveOperator::new(&case.op, p, q).map_err(|e| e.to_string())?;
    let rec = reconstruct_from_measurements(&op, y, &cfg.solver).map_err(|e| e.to_string())?;
    let db = psnr(&phantom.image, &rec.image, cfg.bench.peak).map_err(|e| e.to_string())?;
    Ok((db, rec.iterations, rec.converged, rec.lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use paq_core::linalg::norm_sqr;

    fn flat(shape: GridShape, v: f64) -> ImageVector {
        ImageVector::from_real(shape, &vec![v; shape.len()]).unwrap()
    }

    #[test]
    fn psnr_closed_forms() {
        let s = GridShape::square(8).unwrap();
        assert_eq!(
            psnr(&flat(s, 0.3), &flat(s, 0.3), 1.0).unwrap(),
            PSNR_CAP_DB
        );
        let db = psnr(&flat(s, 10.0), &flat(s, 11.0), 255.0).unwrap();
        assert!((db - 20.0 * 255f64.log10()).abs() < 1e-9);
        assert!((db - 48.1308).abs() < 1e-4);
        let db = psnr(&flat(s, 0.5), &flat(s, 0.6), 1.0).unwrap();
        assert!((db - 20.0).abs() < 1e-9);
        assert!(psnr(
            &flat(s, 0.5),
            &flat(GridShape::square(4).unwrap(), 0.5),
            1.0
        )
        .is_err());
        assert!(psnr(&flat(s, 0.5), &flat(s, 0.5), 0.0).is_err());
    }

    #[test]
    fn dct_sparse_dc_only_is_constant() {
        // find a seed whose single support index is DC
        let s = GridShape::square(4).unwrap();
        let ph = make_phantom(PhantomKind::DctSparse, s, 16, 0, None).unwrap();
        assert_eq!(
            ph.coefficients
                .unwrap()
                .data()
                .iter()
                .filter(|z| z.norm() > 0.0)
                .count(),
            16
        );
        for seed in 0..200 {
            let ph = make_phantom(PhantomKind::DctSparse, s, 1, seed, None).unwrap();
            if ph.coefficients.as_ref().unwrap().data()[0].norm() > 0.0 {
                let first = ph.image.data()[0];
                assert!(ph.image.data().iter().all(|&z| z == first));
                return;
            }
        }
        panic!("no DC-supported phantom in 200 seeds");
    }

    #[test]
    fn dct_sparse_has_exactly_k_coefficients() {
        let s = GridShape::square(16).unwrap();
        let ph = make_phantom(PhantomKind::DctSparse, s, 10, 7, None).unwrap();
        let c = ph.coefficients.unwrap();
        let raw = dct2_unitary(&c).unwrap();
        let back = dct2_adjoint(&raw).unwrap();
        assert_eq!(back.data().iter().filter(|z| z.norm() > 1e-12).count(), 10);
        assert!(ph
            .image
            .data()
            .iter()
            .all(|z| (0.0..=1.0).contains(&z.re) && z.im == 0.0));
        assert_eq!(
            make_phantom(PhantomKind::DctSparse, s, 10, 7, None)
                .unwrap()
                .image,
            ph.image
        );
        assert!(make_phantom(PhantomKind::DctSparse, s, 257, 7, None).is_err());
    }

    #[test]
    fn shepp_logan_is_in_range_and_nontrivial() {
        let ph = make_phantom(
            PhantomKind::SheppLoganLike,
            GridShape::square(64).unwrap(),
            0,
            0,
            None,
        )
        .unwrap();
        let px: Vec<f64> = ph.image.data().iter().map(|z| z.re).collect();
        assert!(px.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(px.iter().any(|&v| v > 0.9));
        assert!(px.iter().filter(|&&v| v == 0.0).count() > 500);
    }

    #[test]
    fn noise_power_and_determinism() {
        let y = vec![Complex64::new(0.0, 0.0); 20_000];
        assert_eq!(add_noise(&y, 0.0, 3).unwrap(), y);
        let a = add_noise(&y, 0.3, 3).unwrap();
        assert_eq!(a, add_noise(&y, 0.3, 3).unwrap());
        assert_ne!(a, add_noise(&y, 0.3, 4).unwrap());
        let power = norm_sqr(&a) / y.len() as f64;
        assert!((power / 0.09 - 1.0).abs() < 0.05, "power {power}");
        assert!(add_noise(&y, -1.0, 0).is_err());
    }

    #[test]
    fn full_mask_baseline_is_near_exact() {
        let mut cfg = RunConfig::default();
        cfg.grid.rows = 16;
        cfg.grid.cols = 16;
        cfg.mask.fraction = 1.0;
        cfg.mask.center_fraction = 0.0;
        cfg.solver.lambda = paq_core::solver::Lambda::Fixed(0.0);
        cfg.bench.seeds = vec![1];
        cfg.bench.sparsity_k = 20;
        cfg.bench.configs = vec![ReconMode::Baseline];
        let r = run_benchmark(&cfg).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert!(r.rows[0].psnr_db.unwrap() >= 100.0, "{:?}", r.rows[0]);
    }

    #[test]
    fn failures_are_recorded_per_case() {
        let mut cfg = RunConfig::default();
        cfg.grid.rows = 16;
        cfg.grid.cols = 16;
        cfg.bench.seeds = vec![0, 1];
        cfg.bench.sparsity_k = 5;
        cfg.bench.configs = vec![ReconMode::Baseline, ReconMode::POnly];
        cfg.projector.memory_budget = 16; // every P computation fails
        let r = run_benchmark(&cfg).unwrap();
        assert!(r
            .rows
            .iter()
            .filter(|r| r.config == ReconMode::POnly)
            .all(|r| r.error.is_some()));
        assert!(r
            .rows
            .iter()
            .filter(|r| r.config == ReconMode::Baseline)
            .all(|r| r.error.is_none()));
        assert!(!r.all_failed());
        assert!(r.to_csv().contains("error:"));
    }
}
