//! Near-identity random rotator `Q = I + Δ - Δᵀ`.
//!
//! `Δ` is strictly lower triangular with i.i.d. `N(0, ε²)` entries. Each row
//! holds at most `nnz_per_row` of them, which keeps `Q v` at `O(n · nnz)`;
//! `nnz_per_row = n - 1` gives the fully dense construction.
//!
//! `Q` is real and acts on the real and imaginary parts of a complex vector
//! independently, so `Qᴴ = Qᵀ = I - (Δ - Δᵀ)`.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{check_len, Error, Result};
use crate::linalg::norm;

/// One stored entry `Δ[row][col] = value` with `row > col`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RotatorEntry {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rotator {
    n: usize,
    epsilon: f64,
    nnz_per_row: usize,
    seed: u64,
    entries: Vec<RotatorEntry>,
}

const SOLVE_MAX_ITERS: usize = 1000;
const SOLVE_TOL: f64 = 1e-12;
const SOLVE_ACCEPT: f64 = 1e-8;

impl Rotator {
    /// Samples `min(nnz_per_row, i)` distinct columns `j < i` for every row
    /// `i` and draws their values from `N(0, ε²)`.
    pub fn build(n: usize, epsilon: f64, nnz_per_row: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("rotator dimension must be at least 1"));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid(format!(
                "epsilon must be finite and >= 0, got {epsilon}"
            )));
        }
        if nnz_per_row >= n {
            return Err(Error::invalid(format!(
                "nnz_per_row must be below n = {n}, got {nnz_per_row}"
            )));
        }
        let mut entries = Vec::new();
        if epsilon > 0.0 && nnz_per_row > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, epsilon)
                .map_err(|e| Error::invalid(format!("bad epsilon: {e}")))?;
            entries.reserve(n * nnz_per_row);
            for row in 1..n {
                let mut cols =
                    rand::seq::index::sample(&mut rng, row, nnz_per_row.min(row)).into_vec();
                cols.sort_unstable();
                for col in cols {
                    entries.push(RotatorEntry {
                        row,
                        col,
                        value: normal.sample(&mut rng),
                    });
                }
            }
        }
        Ok(Self {
            n,
            epsilon,
            nnz_per_row,
            seed,
            entries,
        })
    }

    /// Rotator with explicit entries (e.g. loaded from disk or hand-built).
    pub fn from_entries(
        n: usize,
        epsilon: f64,
        nnz_per_row: usize,
        seed: u64,
        entries: Vec<RotatorEntry>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("rotator dimension must be at least 1"));
        }
        for e in &entries {
            if e.row >= n || e.col >= e.row {
                return Err(Error::invalid(format!(
                    "entry ({}, {}) is not strictly lower triangular in dimension {n}",
                    e.row, e.col
                )));
            }
            if !e.value.is_finite() {
                return Err(Error::invalid("rotator entries must be finite"));
            }
        }
        Ok(Self {
            n,
            epsilon,
            nnz_per_row,
            seed,
            entries,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            epsilon: 0.0,
            nnz_per_row: 0,
            seed: 0,
            entries: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn nnz_per_row(&self) -> usize {
        self.nnz_per_row
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn entries(&self) -> &[RotatorEntry] {
        &self.entries
    }

    /// `Q v`.
    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        self.apply_signed(v, 1.0)
    }

    /// `Qᵀ v`.
    pub fn apply_adjoint(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        self.apply_signed(v, -1.0)
    }

    fn apply_signed(&self, v: &[Complex64], sign: f64) -> Result<Vec<Complex64>> {
        check_len(self.n, v.len())?;
        let mut out = v.to_vec();
        for e in &self.entries {
            let d = sign * e.value;
            out[e.row] += v[e.col] * d;
            out[e.col] -= v[e.row] * d;
        }
        Ok(out)
    }

    /// Solves `Q v = w` by conjugate gradients on `QᵀQ v = Qᵀ w`.
    ///
    /// `QᵀQ = I + SᵀS` has every eigenvalue in `[1, 1 + ‖S‖²]`, so CG
    /// converges quickly while `ε` is small. Fails with
    /// [`Error::NumericalFailure`] if the residual stays above `1e-8 ‖w‖`.
    pub fn solve(&self, w: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.n, w.len())?;
        let zero = Complex64::new(0.0, 0.0);
        let w_norm = norm(w);
        if w_norm == 0.0 || self.entries.is_empty() {
            return Ok(w.to_vec());
        }
        let mut x = alloc::vec![zero; self.n];
        let mut r = w.to_vec();
        let mut z = self.apply_adjoint(&r)?;
        let mut p = z.clone();
        let mut z_sq: f64 = z.iter().map(|v| v.norm_sqr()).sum();
        for _ in 0..SOLVE_MAX_ITERS {
            let qp = self.apply(&p)?;
            let qp_sq: f64 = qp.iter().map(|v| v.norm_sqr()).sum();
            if qp_sq == 0.0 {
                break;
            }
            let alpha = z_sq / qp_sq;
            for (xi, pi) in x.iter_mut().zip(&p) {
                *xi += pi * alpha;
            }
            for (ri, qi) in r.iter_mut().zip(&qp) {
                *ri -= qi * alpha;
            }
            if norm(&r) <= SOLVE_TOL * w_norm {
                return Ok(x);
            }
            z = self.apply_adjoint(&r)?;
            let z_sq_new: f64 = z.iter().map(|v| v.norm_sqr()).sum();
            let beta = z_sq_new / z_sq;
            z_sq = z_sq_new;
            for (pi, zi) in p.iter_mut().zip(&z) {
                *pi = zi + *pi * beta;
            }
        }
        let residual = norm(&r) / w_norm;
        if residual <= SOLVE_ACCEPT {
            Ok(x)
        } else {
            Err(Error::numerical(format!(
                "rotator solve stalled at relative residual {residual:e}; epsilon too large?"
            )))
        }
    }

    /// Dense `Q` (small `n` only).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut q = DMatrix::identity(self.n, self.n);
        for e in &self.entries {
            q[(e.row, e.col)] += e.value;
            q[(e.col, e.row)] -= e.value;
        }
        q
    }
}

/// Keeps the `t` largest-magnitude entries of `v`, ties going to the lower
/// index, and zeroes the rest.
pub fn hard_threshold(v: &[Complex64], t: usize) -> Vec<Complex64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[b].norm().total_cmp(&v[a].norm()).then(a.cmp(&b)));
    let mut out = alloc::vec![Complex64::new(0.0, 0.0); v.len()];
    for &i in order.iter().take(t) {
        out[i] = v[i];
    }
    out
}

/// Indices of the nonzero entries.
pub fn support(v: &[Complex64]) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, z)| z.norm() != 0.0)
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{distance, inner, random_complex};
    use alloc::vec;
    use proptest::prelude::*;

    fn r(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn two_by_two() -> Rotator {
        Rotator::from_entries(
            2,
            0.1,
            1,
            0,
            vec![RotatorEntry {
                row: 1,
                col: 0,
                value: 0.1,
            }],
        )
        .unwrap()
    }

    #[test]
    fn zero_epsilon_is_identity() {
        let q = Rotator::build(64, 0.0, 8, 3).unwrap();
        assert!(q.entries().is_empty());
        let v = random_complex(64, 1);
        assert_eq!(q.apply(&v).unwrap(), v);
        assert_eq!(q.solve(&v).unwrap(), v);
    }

    #[test]
    fn build_respects_structure_and_seed() {
        let q = Rotator::build(100, 0.005, 8, 42).unwrap();
        assert!(q.entries().iter().all(|e| e.row > e.col));
        for row in 0..100 {
            let count = q.entries().iter().filter(|e| e.row == row).count();
            assert_eq!(count, row.min(8));
        }
        assert_eq!(q, Rotator::build(100, 0.005, 8, 42).unwrap());
        assert_ne!(q, Rotator::build(100, 0.005, 8, 43).unwrap());
    }

    #[test]
    fn build_rejects_bad_parameters() {
        assert!(Rotator::build(0, 0.1, 0, 0).is_err());
        assert!(Rotator::build(8, -0.1, 2, 0).is_err());
        assert!(Rotator::build(8, 0.1, 8, 0).is_err());
        assert!(Rotator::build(1, 0.1, 0, 0).is_ok());
    }

    #[test]
    fn hand_built_two_by_two() {
        let q = two_by_two();
        let dense = q.to_dense();
        assert_eq!(dense[(0, 0)], 1.0);
        assert_eq!(dense[(0, 1)], -0.1);
        assert_eq!(dense[(1, 0)], 0.1);
        assert!((dense.determinant() - 1.01).abs() < 1e-12);

        let out = q.apply(&[r(1.0), r(0.0)]).unwrap();
        assert!(distance(&out, &[r(1.0), r(0.1)]) < 1e-15);
        assert!((norm(&out) - 1.01f64.sqrt()).abs() < 1e-15);

        let v = q.solve(&[r(1.0), r(0.1)]).unwrap();
        assert!(distance(&v, &[r(1.0), r(0.0)]) < 1e-8);
    }

    #[test]
    fn zero_vector_maps_to_zero() {
        let q = Rotator::build(16, 0.1, 4, 0).unwrap();
        let z = vec![r(0.0); 16];
        assert_eq!(q.apply(&z).unwrap(), z);
    }

    #[test]
    fn length_mismatch() {
        let q = Rotator::build(16, 0.1, 4, 0).unwrap();
        assert!(matches!(
            q.apply(&[r(1.0)]),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(matches!(
            q.solve(&[r(1.0)]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn hard_threshold_cases() {
        let v = [r(3.0), r(-5.0), r(1.0)];
        assert_eq!(hard_threshold(&v, 2), vec![r(3.0), r(-5.0), r(0.0)]);
        assert_eq!(hard_threshold(&v, 3), v.to_vec());
        assert_eq!(hard_threshold(&v, 0), vec![r(0.0); 3]);
        // ties go to the lowest index
        assert_eq!(
            hard_threshold(&[r(1.0), r(-1.0), r(1.0)], 1),
            vec![r(1.0), r(0.0), r(0.0)]
        );
    }

    #[test]
    fn entries_outside_lower_triangle_rejected() {
        let bad = vec![RotatorEntry {
            row: 0,
            col: 1,
            value: 0.1,
        }];
        assert!(Rotator::from_entries(2, 0.1, 1, 0, bad).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn adjoint_linearity_and_expansion(seed in any::<u64>(), eps in 0.0f64..0.2) {
            let q = Rotator::build(64, eps, 6, seed).unwrap();
            let u = random_complex(64, seed ^ 0xA);
            let v = random_complex(64, seed ^ 0xB);

            let lhs = inner(&q.apply(&u).unwrap(), &v);
            let rhs = inner(&u, &q.apply_adjoint(&v).unwrap());
            prop_assert!((lhs - rhs).norm() <= 1e-12 * norm(&u) * norm(&v));

            prop_assert!(norm(&q.apply(&v).unwrap()) >= norm(&v) * (1.0 - 1e-12));

            let (a, b) = (Complex64::new(0.3, -1.2), Complex64::new(-2.0, 0.5));
            let combo: Vec<Complex64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
            let qu = q.apply(&u).unwrap();
            let qv = q.apply(&v).unwrap();
            let expect: Vec<Complex64> = qu.iter().zip(&qv).map(|(x, y)| a * x + b * y).collect();
            prop_assert!(distance(&q.apply(&combo).unwrap(), &expect) <= 1e-12 * norm(&expect));
        }

        #[test]
        fn solve_round_trip(seed in any::<u64>()) {
            let q = Rotator::build(128, 0.05, 8, seed).unwrap();
            let v = random_complex(128, seed ^ 0xC);
            let back = q.solve(&q.apply(&v).unwrap()).unwrap();
            prop_assert!(distance(&back, &v) <= 1e-8 * norm(&v));
        }
    }
}
