//! Matrix-free dual-space preconditioning for Cartesian compressed-sensing MRI.
//!
//! The crate models undersampled k-space acquisition as `A = M F Ψ` (row mask,
//! unitary 2-D FFT, orthonormal 2-D DCT) and builds two preconditioners around
//! it:
//!
//! * a near-identity random rotator `Q = I + Δ - Δᵀ` acting on coefficients
//!   ([`rotator`]),
//! * a measurement-space whitening projector `P` that minimises
//!   `‖P B Pᴴ - I‖²_F` for the dual Gram matrix `B = A Aᴴ` ([`projector`]).
//!
//! The effective system `P A Q` ([`sensing::EffectiveOperator`]) is consumed by
//! the coherence diagnostics ([`coherence`]) and the ISTA solver ([`solver`]).
//!
//! Everything here is `no_std` + `alloc`. File formats, the CLI and the
//! benchmark harness live in the `paq` crate.

#![cfg_attr(not(any(test, feature = "std")), no_std)]
// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod coherence;
mod error;
pub mod linalg;
pub mod projector;
pub mod rotator;
pub mod sensing;
pub mod solver;
pub mod transforms;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub use coherence::{CoherenceReport, GramSpectrum};
pub use linalg::{DenseOperator, LinearOperator};
pub use projector::{DualGram, GradientMode, LipschitzMethod, Projector, ProjectorConfig};
pub use rotator::Rotator;
pub use sensing::{EffectiveOperator, SensingOperator};
pub use solver::{IstaConfig, ReconResult};
pub use transforms::{CoefficientVector, GridShape, ImageVector, KSpaceVector, SamplingMask};

/// Mixes a base seed with a stream tag so that independent random draws
/// (mask, rotator, phantom, noise, ...) never share a ChaCha stream.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
