//! Small dense helpers shared by the operator modules.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, Error, Result};

/// A linear map `ℂⁿ → ℂᵐ` known only through its action and the action of
/// its adjoint.
pub trait LinearOperator {
    /// Length of the input (coefficient) vector.
    fn domain_len(&self) -> usize;
    /// Length of the output (measurement) vector.
    fn range_len(&self) -> usize;
    fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>>;
    fn apply_adjoint(&self, y: &[Complex64]) -> Result<Vec<Complex64>>;
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn domain_len(&self) -> usize {
        (**self).domain_len()
    }
    fn range_len(&self) -> usize {
        (**self).range_len()
    }
    fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        (**self).apply(x)
    }
    fn apply_adjoint(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        (**self).apply_adjoint(y)
    }
}

/// An explicitly stored matrix viewed as a [`LinearOperator`].
///
/// Used for hand-built dictionaries and as a reference for the matrix-free
/// operators on small grids.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    matrix: DMatrix<Complex64>,
}

impl DenseOperator {
    pub fn new(matrix: DMatrix<Complex64>) -> Self {
        Self { matrix }
    }

    /// Builds the operator whose columns are `columns` (all of equal length).
    pub fn from_columns(columns: &[Vec<Complex64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        for c in columns {
            check_len(rows, c.len())?;
        }
        let matrix = DMatrix::from_fn(rows, columns.len(), |i, j| columns[j][i]);
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }
}

impl LinearOperator for DenseOperator {
    fn domain_len(&self) -> usize {
        self.matrix.ncols()
    }

    fn range_len(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.matrix.ncols(), x.len())?;
        Ok(mat_vec(&self.matrix, x))
    }

    fn apply_adjoint(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.matrix.nrows(), y.len())?;
        Ok(mat_adjoint_vec(&self.matrix, y))
    }
}

/// `⟨a, b⟩ = Σ conj(aᵢ) bᵢ`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    libm::sqrt(norm_sqr(a))
}

pub fn l1_norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm()).sum()
}

/// `‖a - b‖₂`.
pub fn distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum())
}

/// Canonical unit vector `e_i` of length `n`.
pub fn unit_vector(n: usize, i: usize) -> Vec<Complex64> {
    let mut e = vec![Complex64::new(0.0, 0.0); n];
    e[i] = Complex64::new(1.0, 0.0);
    e
}

/// Seeded standard complex Gaussian vector (independent N(0, 1) real and
/// imaginary parts).
pub fn random_complex(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        })
        .collect()
}

pub fn mat_vec(m: &DMatrix<Complex64>, x: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); m.nrows()];
    // column-major storage: accumulate column by column
    for (j, xj) in x.iter().enumerate() {
        if *xj == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (o, a) in out.iter_mut().zip(m.column(j).iter()) {
            *o += a * xj;
        }
    }
    out
}

pub fn mat_adjoint_vec(m: &DMatrix<Complex64>, y: &[Complex64]) -> Vec<Complex64> {
    (0..m.ncols())
        .map(|j| m.column(j).iter().zip(y).map(|(a, b)| a.conj() * b).sum())
        .collect()
}

/// Largest `|λ|` of a linear map by power iteration, returned as the final
/// ratio `‖f(v)‖ / ‖v‖` for a unit iterate `v`.
///
/// `start` must not be orthogonal to the dominant eigenvector; a seeded
/// random start satisfies this almost surely.
pub fn power_iteration<F>(mut f: F, start: Vec<Complex64>, iters: usize) -> Result<f64>
where
    F: FnMut(&[Complex64]) -> Result<Vec<Complex64>>,
{
    if iters == 0 {
        return Err(Error::invalid(
            "power iteration needs at least one iteration",
        ));
    }
    let mut v = start;
    let n0 = norm(&v);
    if n0 == 0.0 || !n0.is_finite() {
        return Err(Error::invalid(
            "power iteration start vector must be finite and nonzero",
        ));
    }
    v.iter_mut().for_each(|z| *z /= n0);
    let mut estimate = 0.0;
    for _ in 0..iters {
        let w = f(&v)?;
        let nw = norm(&w);
        if !nw.is_finite() {
            return Err(Error::numerical(
                "power iteration produced a non-finite iterate",
            ));
        }
        estimate = nw;
        if nw == 0.0 {
            break;
        }
        v = w;
        v.iter_mut().for_each(|z| *z /= nw);
    }
    Ok(estimate)
}
