//! Unitary 2-D Fourier and DCT transforms, Cartesian sampling masks and the
//! three signal domains they connect.
//!
//! All grids are stored row-major. The Fourier pair is scaled by `1/√N` in
//! both directions and the DCT is the orthonormal DCT-II, so every transform
//! here is unitary and its adjoint is its inverse. DC sits at index `(0, 0)`
//! of the k-space grid (no fftshift).

mod dct;
mod fft;
pub(crate) mod mask;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{check_len, Error, Result};

pub use dct::Dct2d;
pub use fft::{Fft1d, Fourier2d};
pub use mask::{apply_mask, compact_to_mask, make_mask, mask_to_compact, SamplingMask};

/// Image grid dimensions. Both sides are powers of two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridShape {
    rows: usize,
    cols: usize,
}

impl GridShape {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if !rows.is_power_of_two() || !cols.is_power_of_two() {
            return Err(Error::invalid(format!(
                "grid sides must be powers of two, got {rows}x{cols}"
            )));
        }
        Ok(Self { rows, cols })
    }

    /// Square `n × n` grid.
    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of pixels `N = rows · cols`.
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl core::fmt::Display for GridShape {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

macro_rules! grid_vector {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            shape: GridShape,
            data: Vec<Complex64>,
        }

        impl $name {
            pub fn new(shape: GridShape, data: Vec<Complex64>) -> Result<Self> {
                check_len(shape.len(), data.len())?;
                Ok(Self { shape, data })
            }

            pub fn zeros(shape: GridShape) -> Self {
                Self { shape, data: vec![Complex64::new(0.0, 0.0); shape.len()] }
            }

            /// Embeds real samples with zero imaginary part.
            pub fn from_real(shape: GridShape, values: &[f64]) -> Result<Self> {
                check_len(shape.len(), values.len())?;
                let data = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                Ok(Self { shape, data })
            }

            pub fn shape(&self) -> GridShape {
                self.shape
            }

            pub fn data(&self) -> &[Complex64] {
                &self.data
            }

            pub fn data_mut(&mut self) -> &mut [Complex64] {
                &mut self.data
            }

            pub fn into_data(self) -> Vec<Complex64> {
                self.data
            }

            /// Entry at `(row, col)`.
            pub fn at(&self, row: usize, col: usize) -> Complex64 {
                self.data[row * self.shape.cols() + col]
            }
        }
    };
}

grid_vector!(
    /// Spatial image `x` (row-major).
    ImageVector
);
grid_vector!(
    /// DCT-domain coefficients `c` (row-major, `(0, 0)` is DC).
    CoefficientVector
);
grid_vector!(
    /// Full k-space grid `y` (row-major, DC at `(0, 0)`).
    KSpaceVector
);

impl ImageVector {
    /// Pixel magnitudes.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.norm()).collect()
    }
}

/// Unitary forward 2-D DFT.
pub fn fft2_unitary(x: &ImageVector) -> Result<KSpaceVector> {
    Fourier2d::new(x.shape()).forward(x)
}

/// Unitary inverse 2-D DFT.
pub fn ifft2_unitary(y: &KSpaceVector) -> Result<ImageVector> {
    Fourier2d::new(y.shape()).inverse(y)
}

/// Synthesises an image from orthonormal DCT-II coefficients (`Ψ c`).
pub fn dct2_unitary(c: &CoefficientVector) -> Result<ImageVector> {
    Dct2d::new(c.shape()).synthesize(c)
}

/// Analysis transform `Ψᴴ x`, the exact inverse of [`dct2_unitary`].
pub fn dct2_adjoint(x: &ImageVector) -> Result<CoefficientVector> {
    Dct2d::new(x.shape()).analyze(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{inner, norm, random_complex};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn grid_shape_rejects_non_power_of_two() {
        assert!(GridShape::new(6, 8).is_err());
        assert!(GridShape::new(0, 8).is_err());
        assert_eq!(GridShape::new(4, 8).unwrap().len(), 32);
    }

    #[test]
    fn vector_constructor_checks_length() {
        let s = GridShape::square(4).unwrap();
        assert_eq!(
            ImageVector::new(s, vec![c(0.0, 0.0); 15]),
            Err(Error::ShapeMismatch {
                expected: 16,
                found: 15
            })
        );
    }

    #[test]
    fn constant_image_has_single_dc_entry() {
        let s = GridShape::square(4).unwrap();
        let x = ImageVector::from_real(s, &[1.0; 16]).unwrap();
        let k = fft2_unitary(&x).unwrap();
        assert!((k.at(0, 0) - c(4.0, 0.0)).norm() < 1e-12);
        let rest: f64 = k.data()[1..].iter().map(|z| z.norm()).sum();
        assert!(rest < 1e-12);
    }

    #[test]
    fn dc_impulse_inverts_to_constant() {
        let s = GridShape::square(2).unwrap();
        let mut y = KSpaceVector::zeros(s);
        y.data_mut()[0] = c(2.0, 0.0); // √N = 2
        let x = ifft2_unitary(&y).unwrap();
        for z in x.data() {
            assert!((z - c(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let s = GridShape::new(4, 8).unwrap();
        assert!(fft2_unitary(&ImageVector::zeros(s))
            .unwrap()
            .data()
            .iter()
            .all(|z| z.norm() == 0.0));
        assert!(ifft2_unitary(&KSpaceVector::zeros(s))
            .unwrap()
            .data()
            .iter()
            .all(|z| z.norm() == 0.0));
        assert!(dct2_unitary(&CoefficientVector::zeros(s))
            .unwrap()
            .data()
            .iter()
            .all(|z| z.norm() == 0.0));
        assert!(dct2_adjoint(&ImageVector::zeros(s))
            .unwrap()
            .data()
            .iter()
            .all(|z| z.norm() == 0.0));
    }

    #[test]
    fn dc_coefficient_synthesises_flat_image() {
        let s = GridShape::square(4).unwrap();
        let mut coeffs = CoefficientVector::zeros(s);
        coeffs.data_mut()[0] = c(1.0, 0.0);
        let x = dct2_unitary(&coeffs).unwrap();
        for z in x.data() {
            assert!((z - c(0.25, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn plans_reject_foreign_shapes() {
        let plan = Fourier2d::new(GridShape::square(4).unwrap());
        let x = ImageVector::zeros(GridShape::square(8).unwrap());
        assert!(matches!(plan.forward(&x), Err(Error::ShapeMismatch { .. })));
        let dct = Dct2d::new(GridShape::square(4).unwrap());
        assert!(matches!(dct.analyze(&x), Err(Error::ShapeMismatch { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn transforms_are_unitary(seed in any::<u64>(), r in 0u32..5, q in 0u32..5) {
            let s = GridShape::new(1 << r, 1 << q).unwrap();
            let x = ImageVector::new(s, random_complex(s.len(), seed)).unwrap();
            let nx = norm(x.data());

            let k = fft2_unitary(&x).unwrap();
            prop_assert!((norm(k.data()) - nx).abs() <= 1e-10 * nx);
            let back = ifft2_unitary(&k).unwrap();
            for (a, b) in back.data().iter().zip(x.data()) {
                prop_assert!((a - b).norm() <= 1e-12 * nx.max(1.0));
            }

            let cx = dct2_adjoint(&x).unwrap();
            prop_assert!((norm(cx.data()) - nx).abs() <= 1e-10 * nx);
            let back = dct2_unitary(&cx).unwrap();
            for (a, b) in back.data().iter().zip(x.data()) {
                prop_assert!((a - b).norm() <= 1e-12 * nx.max(1.0));
            }
        }

        #[test]
        fn adjoint_identities(seed in any::<u64>()) {
            let s = GridShape::new(8, 16).unwrap();
            let x = ImageVector::new(s, random_complex(s.len(), seed)).unwrap();
            let y = KSpaceVector::new(s, random_complex(s.len(), seed ^ 1)).unwrap();
            let scale = norm(x.data()) * norm(y.data());

            let lhs = inner(fft2_unitary(&x).unwrap().data(), y.data());
            let rhs = inner(x.data(), ifft2_unitary(&y).unwrap().data());
            prop_assert!((lhs - rhs).norm() <= 1e-10 * scale);

            let cf = CoefficientVector::new(s, random_complex(s.len(), seed ^ 2)).unwrap();
            let lhs = inner(dct2_unitary(&cf).unwrap().data(), x.data());
            let rhs = inner(cf.data(), dct2_adjoint(&x).unwrap().data());
            prop_assert!((lhs - rhs).norm() <= 1e-10 * norm(cf.data()) * norm(x.data()));
        }
    }
}
