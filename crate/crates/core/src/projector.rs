//! Measurement-space whitening projector.
//!
//! The dual Gram matrix `B = A Aᴴ` is extracted column by column as
//! `B[:, i] = A(A*(e_i))` without forming `A`. The projector `P` then
//! minimises
//!
//! ```text
//! J(P) = ‖P B Pᴴ - I‖²_F
//! ```
//!
//! by gradient descent from `P = I` with step `1/L` and a halving line search
//! that never accepts an increase of `J`.
//!
//! Two gradient forms are available ([`GradientMode`]). `Frechet` is the true
//! gradient `4 (P B Pᴴ - I) P B` (for Hermitian `B`, packing `∂J/∂Re P +
//! i ∂J/∂Im P`). `ProductForm` is `2 (T Tᴴ - I) T` with `T = P B`, which is the
//! gradient of `‖T Tᴴ - I‖²_F` with respect to `T` rather than of `J` with
//! respect to `P`; it is kept for comparison and generally disagrees with
//! finite differences of `J`.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{check_len, Error, Result};
use crate::linalg::{mat_vec, power_iteration, random_complex, unit_vector, LinearOperator};

/// Hermitian tolerance accepted for a hand-supplied dual Gram matrix.
pub const HERMITIAN_TOL: f64 = 1e-8;

/// Default cap on the dense `M × M` allocation made by probing (1 GiB).
pub const DEFAULT_MEMORY_BUDGET: u64 = 1 << 30;

const POWER_START_SEED: u64 = 0x5EED_0B0B;

type CMatrix = DMatrix<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum GradientMode {
    /// `4 (P B Pᴴ - I) P B`.
    #[default]
    Frechet,
    /// `2 (T Tᴴ - I) T`, `T = P B`.
    ProductForm,
}

/// How the step-size constant `L` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum LipschitzMethod {
    /// `8 ρ(B)²` with `ρ(B)` from power iteration on `B`. Cheap (`O(M²)` per
    /// power step) and computed once per run.
    #[default]
    SpectralBound,
    /// Power iteration on the Hessian of `J` at the current `P`,
    /// `G ↦ 4 (P B Pᴴ - I) G B + 4 (P B Gᴴ + G B Pᴴ) P B`. Costs several
    /// `M³` products per power step and is recomputed every iteration.
    HessianPower,
}

/// Dense Hermitian `M × M` dual Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DualGram {
    data: CMatrix,
}

impl DualGram {
    /// Accepts a square matrix that is Hermitian within [`HERMITIAN_TOL`] and
    /// stores its Hermitian part.
    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::invalid(format!(
                "dual Gram must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let dev = hermitian_deviation(&m);
        if dev > HERMITIAN_TOL {
            return Err(Error::invalid(format!(
                "dual Gram is not Hermitian (deviation {dev:e})"
            )));
        }
        Ok(Self {
            data: hermitian_part(&m),
        })
    }

    /// Assembles `B` from probed columns `B[:, i]` and symmetrises it.
    pub fn from_columns(columns: &[Vec<Complex64>]) -> Result<Self> {
        let m = columns.len();
        for c in columns {
            check_len(m, c.len())?;
        }
        let raw = CMatrix::from_fn(m, m, |i, j| columns[j][i]);
        Ok(Self {
            data: hermitian_part(&raw),
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Largest elementwise `|m - mᴴ|`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Bytes needed for the dense `M × M` complex matrix.
pub fn dense_bytes(m: usize) -> u64 {
    (m as u64) * (m as u64) * 16
}

/// Checks the dense allocation for an `M × M` matrix against `budget`.
pub fn check_budget(m: usize, budget: u64) -> Result<()> {
    let required = dense_bytes(m);
    if required > budget {
        return Err(Error::Resource {
            what: format!("dense {m}x{m} dual Gram"),
            required_bytes: required,
            budget_bytes: budget,
        });
    }
    Ok(())
}

/// `B[:, i] = A(A*(e_i))` in the compact measurement ordering.
pub fn probe_column<O: LinearOperator>(op: &O, i: usize) -> Result<Vec<Complex64>> {
    let m = op.range_len();
    if i >= m {
        return Err(Error::invalid(format!(
            "probe index {i} out of range for M = {m}"
        )));
    }
    op.apply(&op.apply_adjoint(&unit_vector(m, i))?)
}

/// Probes every column of `B = A Aᴴ` and returns its Hermitian part.
pub fn probe_dual_gram<O: LinearOperator>(op: &O, memory_budget: u64) -> Result<DualGram> {
    let m = op.range_len();
    check_budget(m, memory_budget)?;
    let columns = (0..m)
        .map(|i| probe_column(op, i))
        .collect::<Result<Vec<_>>>()?;
    DualGram::from_columns(&columns)
}

fn check_square(p: &CMatrix, m: usize) -> Result<()> {
    if p.nrows() != m || p.ncols() != m {
        return Err(Error::ShapeMismatch {
            expected: m * m,
            found: p.nrows() * p.ncols(),
        });
    }
    Ok(())
}

/// `(P B, P B Pᴴ - I)`.
fn residual(p: &CMatrix, b: &CMatrix) -> (CMatrix, CMatrix) {
    let pb = p * b;
    let mut e = &pb * p.adjoint();
    for i in 0..e.nrows() {
        e[(i, i)] -= Complex64::new(1.0, 0.0);
    }
    (pb, e)
}

fn frobenius_sqr(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// `J(P) = ‖P B Pᴴ - I‖²_F`.
pub fn objective(p: &CMatrix, b: &DualGram) -> Result<f64> {
    check_square(p, b.dim())?;
    Ok(frobenius_sqr(&residual(p, &b.data).1))
}

fn gradient_from(pb: &CMatrix, e: &CMatrix, mode: GradientMode) -> CMatrix {
    match mode {
        GradientMode::Frechet => (e * pb) * Complex64::new(4.0, 0.0),
        GradientMode::ProductForm => {
            let mut tt = pb * pb.adjoint();
            for i in 0..tt.nrows() {
                tt[(i, i)] -= Complex64::new(1.0, 0.0);
            }
            (tt * pb) * Complex64::new(2.0, 0.0)
        }
    }
}

/// Gradient of `J` at `P` in the requested form.
pub fn gradient(p: &CMatrix, b: &DualGram, mode: GradientMode) -> Result<CMatrix> {
    check_square(p, b.dim())?;
    let (pb, e) = residual(p, &b.data);
    Ok(gradient_from(&pb, &e, mode))
}

/// Spectral radius of `B` by power iteration from a fixed pseudo-random start.
pub fn spectral_radius(b: &DualGram, iters: usize) -> Result<f64> {
    power_iteration(
        |v| Ok(mat_vec(&b.data, v)),
        random_complex(b.dim(), POWER_START_SEED),
        iters,
    )
}

/// Curvature bound `L` used for the step `α = 1/L`.
pub fn estimate_lipschitz(
    b: &DualGram,
    p: &CMatrix,
    iters: usize,
    method: LipschitzMethod,
) -> Result<f64> {
    check_square(p, b.dim())?;
    if iters == 0 {
        return Err(Error::invalid(
            "Lipschitz estimation needs at least one iteration",
        ));
    }
    let l = match method {
        LipschitzMethod::SpectralBound => {
            let rho = spectral_radius(b, iters)?;
            8.0 * rho * rho
        }
        LipschitzMethod::HessianPower => hessian_norm(b, p, iters)?,
    };
    if !l.is_finite() {
        return Err(Error::numerical("Lipschitz estimate is not finite"));
    }
    Ok(l)
}

fn hessian_norm(b: &DualGram, p: &CMatrix, iters: usize) -> Result<f64> {
    let m = b.dim();
    let bm = &b.data;
    let (pb, e) = residual(p, bm);
    let pa = p.adjoint();
    let four = Complex64::new(4.0, 0.0);
    let apply = |g: &CMatrix| -> CMatrix {
        let gb = g * bm;
        let sym = &pb * g.adjoint() + &gb * &pa;
        (&e * &gb + sym * &pb) * four
    };
    let start = random_complex(m * m, POWER_START_SEED);
    let mut g = CMatrix::from_vec(m, m, start);
    let mut estimate = 0.0;
    let n0 = libm::sqrt(frobenius_sqr(&g));
    g /= Complex64::new(n0, 0.0);
    for _ in 0..iters {
        let h = apply(&g);
        let nh = libm::sqrt(frobenius_sqr(&h));
        if !nh.is_finite() {
            return Err(Error::numerical(
                "Hessian power iteration produced a non-finite iterate",
            ));
        }
        estimate = nh;
        if nh == 0.0 {
            break;
        }
        g = h / Complex64::new(nh, 0.0);
    }
    Ok(estimate)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ProjectorConfig {
    pub max_iters: usize,
    /// Stop once `|J_k - J_{k-1}| / max(J_{k-1}, 1e-30)` falls below this.
    pub tol: f64,
    /// Stop once `J` itself is at or below this (round-off floor).
    pub objective_floor: f64,
    pub gradient_mode: GradientMode,
    pub lipschitz: LipschitzMethod,
    pub power_iters: usize,
    /// Step multiplier applied after a rejected trial step.
    pub shrink: f64,
    pub max_halvings: usize,
    /// Cap on the dense `M × M` allocations, in bytes.
    pub memory_budget: u64,
}

impl Default for ProjectorConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            tol: 1e-8,
            objective_floor: 1e-20,
            gradient_mode: GradientMode::Frechet,
            lipschitz: LipschitzMethod::SpectralBound,
            power_iters: 50,
            shrink: 0.5,
            max_halvings: 40,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }
}

impl ProjectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol >= 0.0) || !(self.objective_floor >= 0.0) {
            return Err(Error::invalid("projector tolerances must be >= 0"));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::invalid(format!(
                "shrink must be in (0, 1), got {}",
                self.shrink
            )));
        }
        if self.power_iters == 0 {
            return Err(Error::invalid("power_iters must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimizationTrace {
    /// `J` before the first step followed by one value per accepted step.
    pub objective_values: Vec<f64>,
    /// Accepted step size per step.
    pub step_sizes: Vec<f64>,
    /// Last `L` used.
    pub lipschitz_estimate: f64,
    pub lipschitz_method: LipschitzMethod,
    pub gradient_mode: GradientMode,
    pub iterations: usize,
    pub converged: bool,
}

/// Whitening projector `P` with the trace of the run that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    data: CMatrix,
    trace: OptimizationTrace,
}

impl Projector {
    pub fn identity(m: usize) -> Self {
        Self {
            data: CMatrix::identity(m, m),
            trace: OptimizationTrace::default(),
        }
    }

    /// Wraps an externally supplied square matrix (empty trace).
    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::invalid("projector must be square"));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("projector entries must be finite"));
        }
        Ok(Self {
            data: m,
            trace: OptimizationTrace::default(),
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn trace(&self) -> &OptimizationTrace {
        &self.trace
    }

    /// `P B Pᴴ`.
    pub fn whitened(&self, b: &DualGram) -> Result<CMatrix> {
        check_square(&self.data, b.dim())?;
        Ok(&self.data * &b.data * self.data.adjoint())
    }
}

/// Gradient descent on `J` from `P = I`.
///
/// Every accepted step satisfies `J_{k+1} ≤ J_k`: the trial step `1/L` is
/// multiplied by `cfg.shrink` up to `cfg.max_halvings` times, and the run ends
/// (unconverged) if no trial decreases `J`.
pub fn optimize_projector(b: &DualGram, cfg: &ProjectorConfig) -> Result<Projector> {
    cfg.validate()?;
    let m = b.dim();
    check_budget(m, cfg.memory_budget)?;
    let bm = &b.data;
    let mut p = CMatrix::identity(m, m);
    let (mut pb, mut e) = residual(&p, bm);
    let mut j = frobenius_sqr(&e);
    if !j.is_finite() {
        return Err(Error::numerical("objective is not finite at P = I"));
    }

    let mut trace = OptimizationTrace {
        objective_values: alloc::vec![j],
        lipschitz_method: cfg.lipschitz,
        gradient_mode: cfg.gradient_mode,
        ..OptimizationTrace::default()
    };
    let fixed_l = match cfg.lipschitz {
        LipschitzMethod::SpectralBound => {
            Some(estimate_lipschitz(b, &p, cfg.power_iters, cfg.lipschitz)?)
        }
        LipschitzMethod::HessianPower => None,
    };

    for _ in 0..cfg.max_iters {
        if j <= cfg.objective_floor {
            trace.converged = true;
            break;
        }
        let g = gradient_from(&pb, &e, cfg.gradient_mode);
        if frobenius_sqr(&g) == 0.0 {
            trace.converged = true;
            break;
        }
        let l = match fixed_l {
            Some(l) => l,
            None => estimate_lipschitz(b, &p, cfg.power_iters, cfg.lipschitz)?,
        };
        trace.lipschitz_estimate = l;
        if l <= 0.0 {
            return Err(Error::numerical("non-positive Lipschitz estimate"));
        }

        let mut alpha = 1.0 / l;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let candidate = &p - &g * Complex64::new(alpha, 0.0);
            let (cpb, ce) = residual(&candidate, bm);
            let cj = frobenius_sqr(&ce);
            if !cj.is_finite() {
                return Err(Error::numerical("objective became non-finite"));
            }
            if cj <= j {
                accepted = Some((candidate, cpb, ce, cj));
                break;
            }
            alpha *= cfg.shrink;
        }
        let Some((candidate, cpb, ce, cj)) = accepted else {
            break;
        };
        let rel = (j - cj).abs() / j.max(1e-30);
        p = candidate;
        pb = cpb;
        e = ce;
        j = cj;
        trace.objective_values.push(j);
        trace.step_sizes.push(alpha);
        trace.iterations += 1;
        if rel < cfg.tol {
            trace.converged = true;
            break;
        }
    }
    if trace.lipschitz_estimate == 0.0 {
        trace.lipschitz_estimate = fixed_l.unwrap_or(0.0);
    }
    Ok(Projector { data: p, trace })
}
