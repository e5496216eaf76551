//! Matrix-free measurement operators.
//!
//! [`SensingOperator`] is `A(c) = M ⊙ F(Ψ c)` returned in compact form (the
//! `M` sampled entries, see [`mask_to_compact`](crate::transforms::mask_to_compact)),
//! and `A*(y) = Ψᴴ F⁻¹(M ⊙ y)`. [`EffectiveOperator`] wraps it with optional
//! preconditioners as `Ã(c) = P A(Q c)` and `Ã*(y) = Qᵀ A*(Pᴴ y)`.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{check_len, Error, Result};
use crate::linalg::{mat_adjoint_vec, mat_vec, LinearOperator};
use crate::projector::Projector;
use crate::rotator::Rotator;
use crate::transforms::mask::{gather, scatter};
use crate::transforms::{
    CoefficientVector, Dct2d, Fourier2d, GridShape, ImageVector, SamplingMask,
};

/// `A = M F Ψ` for one Cartesian mask. Immutable once built.
#[derive(Debug, Clone)]
pub struct SensingOperator {
    mask: SamplingMask,
    fourier: Fourier2d,
    dct: Dct2d,
}

impl SensingOperator {
    pub fn new(mask: SamplingMask) -> Self {
        let shape = mask.shape();
        Self {
            fourier: Fourier2d::new(shape),
            dct: Dct2d::new(shape),
            mask,
        }
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    pub fn shape(&self) -> GridShape {
        self.mask.shape()
    }

    /// Measurement dimension `M`.
    pub fn measurement_len(&self) -> usize {
        self.mask.measurement_len()
    }

    pub fn forward(&self, c: &CoefficientVector) -> Result<Vec<Complex64>> {
        if c.shape() != self.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape().len(),
                found: c.shape().len(),
            });
        }
        self.forward_raw(c.data())
    }

    pub fn adjoint(&self, y: &[Complex64]) -> Result<CoefficientVector> {
        CoefficientVector::new(self.shape(), self.adjoint_raw(y)?)
    }

    /// `Ψ c`.
    pub fn synthesize(&self, c: &[Complex64]) -> Result<ImageVector> {
        check_len(self.shape().len(), c.len())?;
        ImageVector::new(self.shape(), self.dct.apply(c, false))
    }

    fn forward_raw(&self, c: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.shape().len(), c.len())?;
        let mut grid = self.dct.apply(c, false);
        self.fourier.transform_in_place(&mut grid, false);
        Ok(gather(&self.mask, &grid))
    }

    fn adjoint_raw(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.measurement_len(), y.len())?;
        let mut grid = scatter(&self.mask, y);
        self.fourier.transform_in_place(&mut grid, true);
        Ok(self.dct.apply(&grid, true))
    }
}

impl LinearOperator for SensingOperator {
    fn domain_len(&self) -> usize {
        self.shape().len()
    }

    fn range_len(&self) -> usize {
        self.measurement_len()
    }

    fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        self.forward_raw(x)
    }

    fn apply_adjoint(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        self.adjoint_raw(y)
    }
}

/// `Ã = P A Q`, borrowing its parts. Missing preconditioners are skipped, so
/// the unpreconditioned form reproduces [`SensingOperator`] bit for bit.
#[derive(Debug, Clone, Copy)]
pub struct EffectiveOperator<'a> {
    base: &'a SensingOperator,
    projector: Option<&'a Projector>,
    rotator: Option<&'a Rotator>,
}

impl<'a> EffectiveOperator<'a> {
    pub fn new(
        base: &'a SensingOperator,
        projector: Option<&'a Projector>,
        rotator: Option<&'a Rotator>,
    ) -> Result<Self> {
        if let Some(p) = projector {
            check_len(base.measurement_len(), p.dim())?;
        }
        if let Some(q) = rotator {
            check_len(base.shape().len(), q.dim())?;
        }
        Ok(Self {
            base,
            projector,
            rotator,
        })
    }

    /// `A` with no preconditioning.
    pub fn baseline(base: &'a SensingOperator) -> Self {
        Self {
            base,
            projector: None,
            rotator: None,
        }
    }

    pub fn base(&self) -> &'a SensingOperator {
        self.base
    }

    pub fn projector(&self) -> Option<&'a Projector> {
        self.projector
    }

    pub fn rotator(&self) -> Option<&'a Rotator> {
        self.rotator
    }

    pub fn effective_forward(&self, c: &CoefficientVector) -> Result<Vec<Complex64>> {
        if c.shape() != self.base.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.base.shape().len(),
                found: c.shape().len(),
            });
        }
        self.apply(c.data())
    }

    pub fn effective_adjoint(&self, y: &[Complex64]) -> Result<CoefficientVector> {
        CoefficientVector::new(self.base.shape(), self.apply_adjoint(y)?)
    }

    /// Physical coefficients `Q c` (`c` itself without a rotator).
    pub fn physical_coefficients(&self, c: &[Complex64]) -> Result<Vec<Complex64>> {
        match self.rotator {
            Some(q) => q.apply(c),
            None => {
                check_len(self.base.shape().len(), c.len())?;
                Ok(c.to_vec())
            }
        }
    }

    /// Image `Ψ (Q c)` represented by solver coefficients `c`.
    pub fn synthesize(&self, c: &[Complex64]) -> Result<ImageVector> {
        self.base.synthesize(&self.physical_coefficients(c)?)
    }

    /// Maps physical measurements `y = A x` into the data seen by this
    /// system (`P y`).
    pub fn precondition_data(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.base.measurement_len(), y.len())?;
        Ok(match self.projector {
            Some(p) => mat_vec(p.matrix(), y),
            None => y.to_vec(),
        })
    }
}

impl LinearOperator for EffectiveOperator<'_> {
    fn domain_len(&self) -> usize {
        self.base.shape().len()
    }

    fn range_len(&self) -> usize {
        self.base.measurement_len()
    }

    fn apply(&self, c: &[Complex64]) -> Result<Vec<Complex64>> {
        let measured = match self.rotator {
            Some(q) => self.base.forward_raw(&q.apply(c)?)?,
            None => self.base.forward_raw(c)?,
        };
        Ok(match self.projector {
            Some(p) => mat_vec(p.matrix(), &measured),
            None => measured,
        })
    }

    fn apply_adjoint(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        let back = match self.projector {
            Some(p) => {
                check_len(p.dim(), y.len())?;
                self.base.adjoint_raw(&mat_adjoint_vec(p.matrix(), y))?
            }
            None => self.base.adjoint_raw(y)?,
        };
        match self.rotator {
            Some(q) => q.apply_adjoint(&back),
            None => Ok(back),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{inner, norm, random_complex};
    use crate::projector::Projector;
    use crate::rotator::Rotator;
    use crate::transforms::make_mask;
    use nalgebra::DMatrix;

    fn op(n: usize, fraction: f64, seed: u64) -> SensingOperator {
        SensingOperator::new(make_mask(GridShape::square(n).unwrap(), fraction, 0.0, seed).unwrap())
    }

    #[test]
    fn zero_maps_to_zero() {
        let a = op(8, 0.5, 1);
        let c = CoefficientVector::zeros(a.shape());
        assert!(a.forward(&c).unwrap().iter().all(|z| z.norm() == 0.0));
        let y = alloc::vec![Complex64::new(0.0, 0.0); a.measurement_len()];
        assert!(a
            .adjoint(&y)
            .unwrap()
            .data()
            .iter()
            .all(|z| z.norm() == 0.0));
    }

    #[test]
    fn full_mask_is_an_isometry() {
        let a = op(16, 1.0, 0);
        let c = CoefficientVector::new(a.shape(), random_complex(256, 3)).unwrap();
        let y = a.forward(&c).unwrap();
        assert!((norm(&y) - norm(c.data())).abs() < 1e-10 * norm(c.data()));
    }

    #[test]
    fn adjoint_dot_test() {
        let a = op(16, 0.25, 7);
        for s in 0..10 {
            let c = random_complex(a.domain_len(), s);
            let y = random_complex(a.range_len(), 100 + s);
            let lhs = inner(&a.apply(&c).unwrap(), &y);
            let rhs = inner(&c, &a.apply_adjoint(&y).unwrap());
            assert!((lhs - rhs).norm() <= 1e-10 * norm(&c) * norm(&y));
        }
    }

    #[test]
    fn wrong_lengths_are_rejected() {
        let a = op(8, 0.5, 1);
        assert!(matches!(
            a.apply(&[Complex64::new(1.0, 0.0)]),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(matches!(
            a.adjoint(&[Complex64::new(1.0, 0.0)]),
            Err(Error::ShapeMismatch { .. })
        ));
        let p = Projector::identity(3);
        assert!(EffectiveOperator::new(&a, Some(&p), None).is_err());
        let q = Rotator::build(5, 0.01, 2, 0).unwrap();
        assert!(EffectiveOperator::new(&a, None, Some(&q)).is_err());
    }

    #[test]
    fn unpreconditioned_effective_operator_is_bitwise_base() {
        let a = op(16, 0.25, 2);
        let eff = EffectiveOperator::new(&a, None, None).unwrap();
        let c = random_complex(a.domain_len(), 5);
        let y = random_complex(a.range_len(), 6);
        assert_eq!(eff.apply(&c).unwrap(), a.apply(&c).unwrap());
        assert_eq!(eff.apply_adjoint(&y).unwrap(), a.apply_adjoint(&y).unwrap());
    }

    #[test]
    fn effective_adjoint_dot_test_all_configurations() {
        let a = op(16, 0.25, 4);
        let m = a.measurement_len();
        let pm = DMatrix::from_fn(m, m, |i, j| {
            let d = if i == j { 1.0 } else { 0.0 };
            Complex64::new(
                d + 0.01 * ((i * 7 + j * 3) % 11) as f64,
                0.02 * ((i + 2 * j) % 5) as f64,
            )
        });
        let p = Projector::from_matrix(pm).unwrap();
        let q = Rotator::build(256, 0.05, 8, 9).unwrap();
        for (pp, qq) in [
            (None, None),
            (Some(&p), None),
            (None, Some(&q)),
            (Some(&p), Some(&q)),
        ] {
            let eff = EffectiveOperator::new(&a, pp, qq).unwrap();
            for s in 0..5 {
                let c = random_complex(a.domain_len(), s);
                let y = random_complex(m, 50 + s);
                let lhs = inner(&eff.apply(&c).unwrap(), &y);
                let rhs = inner(&c, &eff.apply_adjoint(&y).unwrap());
                assert!((lhs - rhs).norm() <= 1e-10 * norm(&c) * norm(&y));
            }
        }
    }
}
