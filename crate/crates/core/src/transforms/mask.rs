use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{GridShape, KSpaceVector};
use crate::error::{check_len, Error, Result};

/// Cartesian line mask: a set of fully sampled k-space rows.
///
/// The DC row is row 0. The deterministic centre band wraps around it, so a
/// band of 4 rows on a 32-row grid is `{30, 31, 0, 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingMask {
    shape: GridShape,
    lines: Vec<usize>,
    sampled: Vec<bool>,
    fraction: f64,
    center_fraction: f64,
    seed: u64,
}

impl SamplingMask {
    /// Mask with an explicit line set. `fraction` is derived from the line
    /// count; `center_fraction` and `seed` are recorded as zero.
    pub fn from_lines(shape: GridShape, lines: &[usize]) -> Result<Self> {
        let mut sampled = vec![false; shape.rows()];
        for &l in lines {
            if l >= shape.rows() {
                return Err(Error::invalid(format!("line {l} outside a {shape} grid")));
            }
            sampled[l] = true;
        }
        let lines: Vec<usize> = (0..shape.rows()).filter(|&r| sampled[r]).collect();
        if lines.is_empty() {
            return Err(Error::invalid("a mask needs at least one sampled line"));
        }
        Ok(Self {
            shape,
            fraction: lines.len() as f64 / shape.rows() as f64,
            lines,
            sampled,
            center_fraction: 0.0,
            seed: 0,
        })
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    /// Sampled row indices, ascending.
    pub fn lines(&self) -> &[usize] {
        &self.lines
    }

    pub fn is_sampled(&self, row: usize) -> bool {
        self.sampled.get(row).copied().unwrap_or(false)
    }

    pub fn fraction(&self) -> f64 {
        self.fraction
    }

    pub fn center_fraction(&self) -> f64 {
        self.center_fraction
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of sampled points `M = |lines| · cols`.
    pub fn measurement_len(&self) -> usize {
        self.lines.len() * self.shape.cols()
    }

    /// Row-major 0/1 image of the mask.
    pub fn to_binary(&self) -> Vec<bool> {
        let cols = self.shape.cols();
        (0..self.shape.len())
            .map(|i| self.sampled[i / cols])
            .collect()
    }
}

/// Builds a seeded Cartesian mask of `round(fraction · rows)` lines whose
/// first `round(center_fraction · rows)` lines form the band around DC and the
/// rest are drawn uniformly without replacement.
pub fn make_mask(
    shape: GridShape,
    fraction: f64,
    center_fraction: f64,
    seed: u64,
) -> Result<SamplingMask> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "fraction must be in (0, 1], got {fraction}"
        )));
    }
    if !(0.0..1.0).contains(&center_fraction) {
        return Err(Error::invalid(format!(
            "center_fraction must be in [0, 1), got {center_fraction}"
        )));
    }
    if center_fraction > fraction {
        return Err(Error::invalid(format!(
            "center_fraction {center_fraction} exceeds the sampling fraction {fraction}"
        )));
    }
    let rows = shape.rows();
    let total = libm::round(fraction * rows as f64) as usize;
    let center = libm::round(center_fraction * rows as f64) as usize;
    if total == 0 {
        return Err(Error::invalid(format!(
            "fraction {fraction} selects no lines on a {rows}-row grid"
        )));
    }
    if center > total {
        return Err(Error::invalid(format!(
            "centre band of {center} lines exceeds the budget of {total}"
        )));
    }

    let mut sampled = vec![false; rows];
    for i in 0..center {
        sampled[(i + rows - center / 2) % rows] = true;
    }
    let remaining: Vec<usize> = (0..rows).filter(|&r| !sampled[r]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for idx in rand::seq::index::sample(&mut rng, remaining.len(), total - center) {
        sampled[remaining[idx]] = true;
    }
    let lines = (0..rows).filter(|&r| sampled[r]).collect();
    Ok(SamplingMask {
        shape,
        lines,
        sampled,
        fraction,
        center_fraction,
        seed,
    })
}

/// Zeroes every k-space row that the mask does not sample.
pub fn apply_mask(mask: &SamplingMask, y: &KSpaceVector) -> Result<KSpaceVector> {
    if mask.shape != y.shape() {
        return Err(Error::ShapeMismatch {
            expected: mask.shape.len(),
            found: y.shape().len(),
        });
    }
    let cols = mask.shape.cols();
    let mut out = y.clone();
    for (r, row) in out.data_mut().chunks_exact_mut(cols).enumerate() {
        if !mask.sampled[r] {
            row.fill(Complex64::new(0.0, 0.0));
        }
    }
    Ok(out)
}

/// Gathers the `M` sampled entries in ascending row, then column order.
pub fn mask_to_compact(mask: &SamplingMask, y: &KSpaceVector) -> Result<Vec<Complex64>> {
    if mask.shape != y.shape() {
        return Err(Error::ShapeMismatch {
            expected: mask.shape.len(),
            found: y.shape().len(),
        });
    }
    Ok(gather(mask, y.data()))
}

/// Scatters a compact measurement vector back onto the grid, zeros elsewhere.
pub fn compact_to_mask(mask: &SamplingMask, compact: &[Complex64]) -> Result<KSpaceVector> {
    check_len(mask.measurement_len(), compact.len())?;
    KSpaceVector::new(mask.shape, scatter(mask, compact))
}

pub(crate) fn gather(mask: &SamplingMask, grid: &[Complex64]) -> Vec<Complex64> {
    let cols = mask.shape.cols();
    let mut out = Vec::with_capacity(mask.measurement_len());
    for &r in &mask.lines {
        out.extend_from_slice(&grid[r * cols..(r + 1) * cols]);
    }
    out
}

pub(crate) fn scatter(mask: &SamplingMask, compact: &[Complex64]) -> Vec<Complex64> {
    let cols = mask.shape.cols();
    let mut grid = vec![Complex64::new(0.0, 0.0); mask.shape.len()];
    for (chunk, &r) in compact.chunks_exact(cols).zip(&mask.lines) {
        grid[r * cols..(r + 1) * cols].copy_from_slice(chunk);
    }
    grid
}
