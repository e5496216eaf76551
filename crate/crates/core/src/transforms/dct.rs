use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use super::{CoefficientVector, GridShape, ImageVector};
use crate::error::{check_len, Result};

/// Separable orthonormal 2-D DCT-II with precomputed 1-D bases.
///
/// Grid sides are small (≤ 128 at desk scale), so the 1-D transforms are
/// dense `n × n` products.
#[derive(Debug, Clone)]
pub struct Dct2d {
    shape: GridShape,
    /// `basis_rows[k * rows + m] = s_k cos(π (2m + 1) k / 2 rows)`.
    basis_rows: Vec<f64>,
    basis_cols: Vec<f64>,
}

fn dct_basis(n: usize) -> Vec<f64> {
    let mut b = vec![0.0; n * n];
    for k in 0..n {
        let s = if k == 0 {
            libm::sqrt(1.0 / n as f64)
        } else {
            libm::sqrt(2.0 / n as f64)
        };
        for m in 0..n {
            b[k * n + m] = s * libm::cos(PI * (2 * m + 1) as f64 * k as f64 / (2 * n) as f64);
        }
    }
    b
}

impl Dct2d {
    pub fn new(shape: GridShape) -> Self {
        Self {
            shape,
            basis_rows: dct_basis(shape.rows()),
            basis_cols: dct_basis(shape.cols()),
        }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    /// `Ψ c`.
    pub fn synthesize(&self, c: &CoefficientVector) -> Result<ImageVector> {
        check_len(self.shape.len(), c.data().len())?;
        ImageVector::new(self.shape, self.apply(c.data(), false))
    }

    /// `Ψᴴ x`.
    pub fn analyze(&self, x: &ImageVector) -> Result<CoefficientVector> {
        check_len(self.shape.len(), x.data().len())?;
        CoefficientVector::new(self.shape, self.apply(x.data(), true))
    }

    /// Raw-buffer form of [`synthesize`](Self::synthesize) /
    /// [`analyze`](Self::analyze).
    pub fn apply(&self, input: &[Complex64], analysis: bool) -> Vec<Complex64> {
        let (rows, cols) = (self.shape.rows(), self.shape.cols());
        let zero = Complex64::new(0.0, 0.0);

        // along each row (column index)
        let mut tmp = vec![zero; rows * cols];
        for r in 0..rows {
            let src = &input[r * cols..(r + 1) * cols];
            let dst = &mut tmp[r * cols..(r + 1) * cols];
            for (k, &v) in src.iter().enumerate() {
                if v == zero {
                    continue;
                }
                if analysis {
                    // dst[k'] += C[k'][k] v  (C applied)
                    for (kp, d) in dst.iter_mut().enumerate() {
                        *d += v * self.basis_cols[kp * cols + k];
                    }
                } else {
                    // dst[m] += C[k][m] v  (Cᵀ applied)
                    let basis = &self.basis_cols[k * cols..(k + 1) * cols];
                    for (d, &b) in dst.iter_mut().zip(basis) {
                        *d += v * b;
                    }
                }
            }
        }

        // along each column (row index)
        let mut out = vec![zero; rows * cols];
        for r_out in 0..rows {
            let dst = &mut out[r_out * cols..(r_out + 1) * cols];
            for r_in in 0..rows {
                let a = if analysis {
                    self.basis_rows[r_out * rows + r_in]
                } else {
                    self.basis_rows[r_in * rows + r_out]
                };
                let src = &tmp[r_in * cols..(r_in + 1) * cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s * a;
                }
            }
        }
        out
    }
}
