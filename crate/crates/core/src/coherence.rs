//! Mutual coherence of (effective) dictionaries and Gram spectra.
//!
//! The dictionary is never materialised: column `j` of `D = P A Ψ Q` is the
//! effective forward operator applied to `e_j`. Columns whose norm is below
//! [`NULL_COLUMN_NORM`] lie in the undersampling null space; they have no
//! direction, so they are excluded from `μ` and counted separately.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{inner, norm, unit_vector, LinearOperator};
use crate::projector::hermitian_deviation;

pub const NULL_COLUMN_NORM: f64 = 1e-12;
/// Largest `N` accepted by [`mutual_coherence_exact`].
pub const EXACT_COLUMN_LIMIT: usize = 4096;
pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoherenceReport {
    /// Largest normalised `|d_iᴴ d_j|` seen, `i ≠ j`.
    pub mu: f64,
    pub argmax_pair: Option<(usize, usize)>,
    /// Counts of normalised off-diagonal magnitudes in
    /// [`HISTOGRAM_BINS`] equal bins over `[0, 1]`; the last bin is closed.
    pub offdiag_histogram: Vec<u64>,
    pub mean_offdiag: f64,
    /// Pairs that entered `mu` and the histogram.
    pub n_pairs: u64,
    /// Distinct columns probed.
    pub n_columns_sampled: usize,
    /// Probed columns excluded as numerically zero.
    pub null_columns: usize,
    /// All `N (N - 1) / 2` pairs of non-null columns were evaluated.
    pub exact: bool,
}

impl CoherenceReport {
    /// Fraction of evaluated pairs falling in bins whose lower edge is at or
    /// above `threshold` (e.g. `0.5` counts pairs with magnitude `≥ 0.5`).
    pub fn tail_fraction(&self, threshold: f64) -> f64 {
        if self.n_pairs == 0 {
            return 0.0;
        }
        let tail: u64 = self
            .offdiag_histogram
            .iter()
            .enumerate()
            .filter(|(k, _)| (*k as f64) / HISTOGRAM_BINS as f64 >= threshold - 1e-12)
            .map(|(_, &c)| c)
            .sum();
        tail as f64 / self.n_pairs as f64
    }

    /// `[lo, hi)` edges of histogram bin `k`.
    pub fn bin_edges(k: usize) -> (f64, f64) {
        let w = 1.0 / HISTOGRAM_BINS as f64;
        (k as f64 * w, (k + 1) as f64 * w)
    }
}

fn bin_of(g: f64) -> usize {
    let b = libm::floor(g * HISTOGRAM_BINS as f64);
    if b < 0.0 {
        0
    } else {
        (b as usize).min(HISTOGRAM_BINS - 1)
    }
}

/// Column `j` of the dictionary represented by `op`.
pub fn dictionary_column<O: LinearOperator>(op: &O, j: usize) -> Result<Vec<Complex64>> {
    let n = op.domain_len();
    if j >= n {
        return Err(Error::invalid(format!(
            "column {j} out of range for N = {n}"
        )));
    }
    op.apply(&unit_vector(n, j))
}

fn normalized_column<O: LinearOperator>(op: &O, j: usize) -> Result<Option<Vec<Complex64>>> {
    let mut col = dictionary_column(op, j)?;
    let n = norm(&col);
    if !n.is_finite() {
        return Err(Error::numerical(format!("column {j} is not finite")));
    }
    if n < NULL_COLUMN_NORM {
        return Ok(None);
    }
    col.iter_mut().for_each(|z| *z /= n);
    Ok(Some(col))
}

struct Accumulator {
    mu: f64,
    argmax: Option<(usize, usize)>,
    hist: Vec<u64>,
    sum: f64,
    pairs: u64,
}

impl Accumulator {
    fn new() -> Self {
        Self {
            mu: 0.0,
            argmax: None,
            hist: vec![0; HISTOGRAM_BINS],
            sum: 0.0,
            pairs: 0,
        }
    }

    fn push(&mut self, i: usize, j: usize, g: f64) {
        if self.argmax.is_none() || g > self.mu {
            self.mu = g;
            self.argmax = Some((i.min(j), i.max(j)));
        }
        self.hist[bin_of(g)] += 1;
        self.sum += g;
        self.pairs += 1;
    }

    fn finish(self, n_columns_sampled: usize, null_columns: usize, exact: bool) -> CoherenceReport {
        CoherenceReport {
            mu: self.mu,
            argmax_pair: self.argmax,
            offdiag_histogram: self.hist,
            mean_offdiag: if self.pairs == 0 {
                0.0
            } else {
                self.sum / self.pairs as f64
            },
            n_pairs: self.pairs,
            n_columns_sampled,
            null_columns,
            exact,
        }
    }
}

/// Exact `μ(D) = max_{i≠j} |d_iᴴ d_j| / (‖d_i‖ ‖d_j‖)` over all column
/// pairs. Limited to `N ≤ 4096`.
pub fn mutual_coherence_exact<O: LinearOperator>(op: &O) -> Result<CoherenceReport> {
    let n = op.domain_len();
    if n > EXACT_COLUMN_LIMIT {
        let m = op.range_len() as u64;
        return Err(Error::Resource {
            what: format!(
                "exact coherence over {n} columns (limit {EXACT_COLUMN_LIMIT}; use the sampled estimator)"
            ),
            required_bytes: n as u64 * m * 16,
            budget_bytes: EXACT_COLUMN_LIMIT as u64 * m * 16,
        });
    }
    let columns: Vec<(usize, Vec<Complex64>)> = (0..n)
        .map(|j| Ok(normalized_column(op, j)?.map(|c| (j, c))))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let null_columns = n - columns.len();
    let mut acc = Accumulator::new();
    for (a, (i, di)) in columns.iter().enumerate() {
        for (j, dj) in &columns[a + 1..] {
            acc.push(*i, *j, inner(di, dj).norm());
        }
    }
    Ok(acc.finish(n, null_columns, true))
}

/// Lower bound on `μ` from `n_pairs` uniformly drawn column pairs.
///
/// When `n_pairs` covers every pair the estimator enumerates them instead
/// and the report equals [`mutual_coherence_exact`].
pub fn mutual_coherence_sampled<O: LinearOperator>(
    op: &O,
    n_pairs: u64,
    seed: u64,
) -> Result<CoherenceReport> {
    if n_pairs == 0 {
        return Err(Error::invalid("n_pairs must be at least 1"));
    }
    let n = op.domain_len();
    let total = (n as u64) * (n as u64).saturating_sub(1) / 2;
    if n_pairs >= total && n <= EXACT_COLUMN_LIMIT {
        return mutual_coherence_exact(op);
    }
    if n < 2 {
        return Ok(Accumulator::new().finish(0, 0, false));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cache: BTreeMap<usize, Option<Vec<Complex64>>> = BTreeMap::new();
    let mut acc = Accumulator::new();
    for _ in 0..n_pairs {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        for k in [i, j] {
            if let alloc::collections::btree_map::Entry::Vacant(slot) = cache.entry(k) {
                slot.insert(normalized_column(op, k)?);
            }
        }
        if let (Some(di), Some(dj)) = (&cache[&i], &cache[&j]) {
            acc.push(i, j, inner(di, dj).norm());
        }
    }
    let null_columns = cache.values().filter(|c| c.is_none()).count();
    Ok(acc.finish(cache.len(), null_columns, false))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GramSpectrum {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// `λ_max / λ_min` over eigenvalues above `1e-10 λ_max`.
    pub condition_ratio: f64,
}

/// Eigenvalues and condition ratio of a Hermitian matrix (`B` or `P B Pᴴ`).
pub fn gram_spectrum(m: &DMatrix<Complex64>) -> Result<GramSpectrum> {
    if m.nrows() != m.ncols() {
        return Err(Error::invalid("Gram matrix must be square"));
    }
    let dev = hermitian_deviation(m);
    if !(dev <= 1e-6) {
        return Err(Error::invalid(format!(
            "matrix is not Hermitian (deviation {dev:e})"
        )));
    }
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let mut eigenvalues: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let max = eigenvalues.last().copied().unwrap_or(0.0);
    if !(max > 0.0) {
        return Err(Error::Degenerate(
            "Gram matrix has no positive eigenvalue".into(),
        ));
    }
    let min = eigenvalues
        .iter()
        .copied()
        .find(|&l| l > 1e-10 * max)
        .unwrap_or(max);
    Ok(GramSpectrum {
        eigenvalues,
        condition_ratio: max / min,
    })
}
