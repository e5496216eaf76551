use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use super::{GridShape, ImageVector, KSpaceVector};
use crate::error::{check_len, Result};

/// In-place iterative radix-2 FFT of a fixed power-of-two length.
#[derive(Debug, Clone)]
pub struct Fft1d {
    n: usize,
    bitrev: Vec<usize>,
    /// `exp(-2πik/n)` for `k < n/2`.
    twiddles: Vec<Complex64>,
}

impl Fft1d {
    /// # Panics
    /// If `n` is not a power of two.
    pub fn new(n: usize) -> Self {
        assert!(n.is_power_of_two(), "FFT length must be a power of two");
        let bits = n.trailing_zeros();
        let bitrev = (0..n)
            .map(|i| {
                if bits == 0 {
                    0
                } else {
                    i.reverse_bits() >> (usize::BITS - bits)
                }
            })
            .collect();
        let twiddles = (0..n / 2)
            .map(|k| {
                let theta = -2.0 * PI * k as f64 / n as f64;
                Complex64::new(libm::cos(theta), libm::sin(theta))
            })
            .collect();
        Self {
            n,
            bitrev,
            twiddles,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalised transform with kernel `exp(-2πi jk/n)`, or
    /// `exp(+2πi jk/n)` when `inverse` is set.
    pub fn process(&self, data: &mut [Complex64], inverse: bool) {
        debug_assert_eq!(data.len(), self.n);
        for i in 0..self.n {
            let j = self.bitrev[i];
            if i < j {
                data.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= self.n {
            let half = len / 2;
            let stride = self.n / len;
            for start in (0..self.n).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = data[start + k];
                    let b = data[start + k + half] * w;
                    data[start + k] = a + b;
                    data[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }
}

/// Unitary separable 2-D DFT on a fixed grid.
#[derive(Debug, Clone)]
pub struct Fourier2d {
    shape: GridShape,
    row_fft: Fft1d,
    col_fft: Fft1d,
    scale: f64,
}

impl Fourier2d {
    pub fn new(shape: GridShape) -> Self {
        Self {
            shape,
            row_fft: Fft1d::new(shape.cols()),
            col_fft: Fft1d::new(shape.rows()),
            scale: 1.0 / libm::sqrt(shape.len() as f64),
        }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn forward(&self, x: &ImageVector) -> Result<KSpaceVector> {
        check_len(self.shape.len(), x.data().len())?;
        let mut data = x.data().to_vec();
        self.transform_in_place(&mut data, false);
        KSpaceVector::new(self.shape, data)
    }

    pub fn inverse(&self, y: &KSpaceVector) -> Result<ImageVector> {
        check_len(self.shape.len(), y.data().len())?;
        let mut data = y.data().to_vec();
        self.transform_in_place(&mut data, true);
        ImageVector::new(self.shape, data)
    }

    /// Unitary transform of a raw row-major buffer.
    pub fn transform_in_place(&self, data: &mut [Complex64], inverse: bool) {
        let (rows, cols) = (self.shape.rows(), self.shape.cols());
        for row in data.chunks_exact_mut(cols) {
            self.row_fft.process(row, inverse);
        }
        let mut column = vec![Complex64::new(0.0, 0.0); rows];
        for c in 0..cols {
            for r in 0..rows {
                column[r] = data[r * cols + c];
            }
            self.col_fft.process(&mut column, inverse);
            for r in 0..rows {
                data[r * cols + c] = column[r] * self.scale;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_one_is_identity() {
        let f = Fft1d::new(1);
        let mut d = [Complex64::new(3.0, -1.0)];
        f.process(&mut d, false);
        assert_eq!(d[0], Complex64::new(3.0, -1.0));
    }

    #[test]
    fn matches_direct_sum_length_8() {
        let f = Fft1d::new(8);
        let input: Vec<Complex64> = (0..8)
            .map(|i| Complex64::new(i as f64, (i * i) as f64 * 0.1))
            .collect();
        let mut d = input.clone();
        f.process(&mut d, false);
        for (k, got) in d.iter().enumerate() {
            let expect: Complex64 = input
                .iter()
                .enumerate()
                .map(|(j, x)| {
                    let t = -2.0 * PI * (j * k) as f64 / 8.0;
                    x * Complex64::new(t.cos(), t.sin())
                })
                .sum();
            assert!((got - expect).norm() < 1e-12);
        }
    }

    #[test]
    #[should_panic]
    fn rejects_non_power_of_two() {
        Fft1d::new(6);
    }
}
