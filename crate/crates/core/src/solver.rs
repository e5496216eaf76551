//! Iterative soft-thresholding over any [`LinearOperator`].
//!
//! ```text
//! c⁽ᵏ⁺¹⁾ = S_λ(c⁽ᵏ⁾ - η Ã*(Ã c⁽ᵏ⁾ - y))
//! ```
//!
//! `λ` is the soft-threshold level applied after the gradient step, so the
//! iteration is proximal gradient on `½‖Ã c - y‖² + (λ/η) ‖c‖₁`. That is the
//! objective recorded in the convergence curve; with `η ≤ 1/ρ(Ã*Ã)` it never
//! increases.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{check_len, Error, Result};
use crate::linalg::{
    distance, l1_norm, norm, norm_sqr, power_iteration, random_complex, LinearOperator,
};
use crate::sensing::EffectiveOperator;
use crate::transforms::{CoefficientVector, ImageVector};

const STEP_SAFETY: f64 = 0.99;

/// Soft-threshold level.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Lambda {
    Fixed(f64),
    /// Multiple of `max |Ã*(y)|`.
    Relative(f64),
}

impl Default for Lambda {
    fn default() -> Self {
        Lambda::Relative(1e-3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum StepSize {
    /// `0.99 / ρ(Ã*Ã)` from power iteration.
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct IstaConfig {
    pub lambda: Lambda,
    pub max_iters: usize,
    pub step: StepSize,
    /// Stop once `‖c⁺ - c‖ / ‖c‖` drops below this.
    pub tol: f64,
    pub record_curve: bool,
    /// Power iterations for the automatic step.
    pub power_iters: usize,
    pub power_seed: u64,
}

impl Default for IstaConfig {
    fn default() -> Self {
        Self {
            lambda: Lambda::default(),
            max_iters: 200,
            step: StepSize::Auto,
            tol: 1e-6,
            record_curve: true,
            power_iters: 50,
            power_seed: 0,
        }
    }
}

impl IstaConfig {
    pub fn validate(&self) -> Result<()> {
        match self.lambda {
            Lambda::Fixed(l) | Lambda::Relative(l) if !(l >= 0.0 && l.is_finite()) => {
                return Err(Error::invalid(format!(
                    "lambda must be finite and >= 0, got {l}"
                )))
            }
            _ => {}
        }
        if let StepSize::Fixed(s) = self.step {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid(format!("step must be positive, got {s}")));
            }
        }
        if !(self.tol >= 0.0) {
            return Err(Error::invalid("tol must be >= 0"));
        }
        if self.power_iters == 0 {
            return Err(Error::invalid("power_iters must be at least 1"));
        }
        Ok(())
    }
}

/// Raw solver output in coefficient space.
#[derive(Debug, Clone, PartialEq)]
pub struct IstaOutcome {
    pub coefficients: Vec<Complex64>,
    pub iterations: usize,
    /// Objective after initialisation and after every iteration.
    pub objective_curve: Option<Vec<f64>>,
    /// `‖Ã c - y‖` alongside the objective curve.
    pub residual_curve: Option<Vec<f64>>,
    pub converged: bool,
    pub lambda: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconResult {
    pub coefficients: CoefficientVector,
    /// `Ψ Q c` (or `Ψ c` without a rotator).
    pub image: ImageVector,
    pub iterations: usize,
    pub objective_curve: Option<Vec<f64>>,
    pub residual_curve: Option<Vec<f64>>,
    pub converged: bool,
    pub lambda: f64,
    pub step: f64,
}

/// `S_λ(v)`: shrinks every magnitude by `λ`, keeping the phase.
pub fn soft_threshold(v: &[Complex64], lambda: f64) -> Vec<Complex64> {
    v.iter().map(|&z| shrink(z, lambda)).collect()
}

#[inline]
fn shrink(z: Complex64, lambda: f64) -> Complex64 {
    if lambda == 0.0 {
        return z;
    }
    let mag = z.norm();
    if mag <= lambda {
        Complex64::new(0.0, 0.0)
    } else {
        z * (1.0 - lambda / mag)
    }
}

/// `0.99 / ρ(Ã*Ã)` by power iteration from a seeded random start.
pub fn estimate_step<O: LinearOperator>(op: &O, iters: usize, seed: u64) -> Result<f64> {
    let rho = power_iteration(
        |v| op.apply_adjoint(&op.apply(v)?),
        random_complex(op.domain_len(), seed),
        iters,
    )?;
    if rho <= 0.0 {
        return Err(Error::Degenerate(
            "Ã*Ã vanishes on the power-iteration start".into(),
        ));
    }
    Ok(STEP_SAFETY / rho)
}

/// ISTA from the back-projection `c⁰ = Ã*(y)`.
pub fn ista<O: LinearOperator>(op: &O, y: &[Complex64], cfg: &IstaConfig) -> Result<IstaOutcome> {
    cfg.validate()?;
    check_len(op.range_len(), y.len())?;

    let mut c = op.apply_adjoint(y)?;
    let lambda = match cfg.lambda {
        Lambda::Fixed(l) => l,
        Lambda::Relative(r) => r * c.iter().map(|z| z.norm()).fold(0.0, f64::max),
    };
    let step = match cfg.step {
        StepSize::Fixed(s) => s,
        StepSize::Auto => estimate_step(op, cfg.power_iters, cfg.power_seed)?,
    };
    let weight = lambda / step;

    let mut residual = residual(op, &c, y)?;
    let mut objective_curve = cfg.record_curve.then(Vec::new);
    let mut residual_curve = cfg.record_curve.then(Vec::new);
    let mut record = |c: &[Complex64], r: &[Complex64]| {
        if let (Some(obj), Some(res)) = (objective_curve.as_mut(), residual_curve.as_mut()) {
            obj.push(0.5 * norm_sqr(r) + weight * l1_norm(c));
            res.push(norm(r));
        }
    };
    record(&c, &residual);

    let mut iterations = 0;
    let mut converged = false;
    for k in 1..=cfg.max_iters {
        let grad = op.apply_adjoint(&residual)?;
        let next: Vec<Complex64> = c
            .iter()
            .zip(&grad)
            .map(|(ci, gi)| shrink(ci - gi * step, lambda))
            .collect();
        if next.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::numerical(format!(
                "ISTA iterate became non-finite at iteration {k} (step {step:e} too large?)"
            )));
        }
        let change = distance(&next, &c);
        let scale = norm(&c);
        c = next;
        residual = self::residual(op, &c, y)?;
        record(&c, &residual);
        iterations = k;
        let rel = if scale > 0.0 {
            change / scale
        } else if change == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if rel < cfg.tol {
            converged = true;
            break;
        }
    }

    Ok(IstaOutcome {
        coefficients: c,
        iterations,
        objective_curve,
        residual_curve,
        converged,
        lambda,
        step,
    })
}

fn residual<O: LinearOperator>(op: &O, c: &[Complex64], y: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut r = op.apply(c)?;
    for (ri, yi) in r.iter_mut().zip(y) {
        *ri -= yi;
    }
    Ok(r)
}

/// Solves the effective system for data `y` (already in the effective
/// measurement space) and synthesises the image `Ψ Q ĉ`.
pub fn ista_reconstruct(
    op: &EffectiveOperator<'_>,
    y: &[Complex64],
    cfg: &IstaConfig,
) -> Result<ReconResult> {
    let out = ista(op, y, cfg)?;
    let image = op.synthesize(&out.coefficients)?;
    Ok(ReconResult {
        coefficients: CoefficientVector::new(image.shape(), out.coefficients)?,
        image,
        iterations: out.iterations,
        objective_curve: out.objective_curve,
        residual_curve: out.residual_curve,
        converged: out.converged,
        lambda: out.lambda,
        step: out.step,
    })
}

/// Reconstructs from physical measurements `y = A x + n`: the projector (if
/// any) is applied to `y` once, then [`ista_reconstruct`] runs.
pub fn reconstruct_from_measurements(
    op: &EffectiveOperator<'_>,
    y: &[Complex64],
    cfg: &IstaConfig,
) -> Result<ReconResult> {
    let data = op.precondition_data(y)?;
    ista_reconstruct(op, &data, cfg)
}
