//! Reference material for acceptance checks: dense matrices built straight
//! from the transform definitions, and a small PASS/FAIL reporter.
//!
//! Nothing here is used by the toolkit itself; it exists so that the
//! matrix-free operators can be compared against something independent.

use std::f64::consts::PI;
use std::io::Write;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use paq_core::{Complex64, SamplingMask};

pub type CMat = DMatrix<Complex64>;

/// Unitary DFT matrix `F[k, j] = exp(-2πi kj/n) / √n`.
pub fn dft(n: usize) -> CMat {
    let s = 1.0 / (n as f64).sqrt();
    CMat::from_fn(n, n, |k, j| {
        Complex64::from_polar(s, -2.0 * PI * (k * j) as f64 / n as f64)
    })
}

/// Orthonormal DCT-II synthesis matrix; column `k` is the `k`-th basis vector.
pub fn idct(n: usize) -> CMat {
    CMat::from_fn(n, n, |m, k| {
        let s = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        Complex64::new(
            s * (PI * (2 * m + 1) as f64 * k as f64 / (2 * n) as f64).cos(),
            0.0,
        )
    })
}

/// Dense `R (F_r ⊗ F_c)(Ψ_r ⊗ Ψ_c)` for a row mask, rows in compact order.
pub fn dense_sensing(mask: &SamplingMask) -> CMat {
    let (rows, cols) = (mask.shape().rows(), mask.shape().cols());
    let full = dft(rows).kronecker(&dft(cols)) * idct(rows).kronecker(&idct(cols));
    let keep: Vec<usize> = mask
        .lines()
        .iter()
        .flat_map(|&r| (0..cols).map(move |c| r * cols + c))
        .collect();
    CMat::from_fn(keep.len(), rows * cols, |i, j| full[(keep[i], j)])
}

pub fn dense_apply(m: &CMat, x: &[Complex64]) -> Vec<Complex64> {
    (m * DVector::from_column_slice(x)).as_slice().to_vec()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Fastest of `reps` timed runs, in seconds.
pub fn best_of<T>(reps: usize, mut f: impl FnMut() -> T) -> f64 {
    (0..reps)
        .map(|_| {
            let t = Instant::now();
            std::hint::black_box(f());
            t.elapsed().as_secs_f64()
        })
        .fold(f64::INFINITY, f64::min)
}

pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

/// Runs one criterion and prints its line straight to stderr (bypassing
/// test output capture). A criterion with a time limit fails if it
/// overruns.
pub fn report(id: usize, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let pass = out.pass && limit.is_none_or(|l| elapsed <= l);
    let timing = match limit {
        Some(l) => format!("{:.1} s (limit {} s)", elapsed.as_secs_f64(), l.as_secs()),
        None => format!("{:.1} s", elapsed.as_secs_f64()),
    };
    let mut err = std::io::stderr().lock();
    writeln!(
        err,
        "[{}] {id:>2}. {name}: {} [{timing}]",
        if pass { "PASS" } else { "FAIL" },
        out.detail
    )
    .unwrap();
    pass
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_matrices_are_unitary() {
        for n in [1, 2, 5, 8] {
            for m in [dft(n), idct(n)] {
                let g = m.adjoint() * &m;
                assert!(max_abs(&(g - CMat::identity(n, n))) < 1e-12);
            }
        }
    }

    #[test]
    fn dct_matches_closed_form_entry() {
        let m = idct(4);
        let expected = (0.5f64).sqrt() * (PI * 3.0 / 8.0).cos();
        assert!((m[(1, 1)].re - expected).abs() < 1e-15);
    }
}
