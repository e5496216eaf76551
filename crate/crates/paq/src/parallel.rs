//! Multi-threaded variants of the embarrassingly parallel core steps.

use paq_core::projector::{check_budget, optimize_projector, probe_column};
use paq_core::{DualGram, LinearOperator, Projector, ProjectorConfig};
use rayon::prelude::*;

use crate::error::CliResult;

/// Column-parallel impulse probing of `B = A Aᴴ`; bit-identical to the
/// sequential `paq_core::projector::probe_dual_gram`.
pub fn probe_dual_gram<O: LinearOperator + Sync>(
    op: &O,
    memory_budget: u64,
) -> CliResult<DualGram> {
    let m = op.range_len();
    check_budget(m, memory_budget)?;
    let columns = (0..m)
        .into_par_iter()
        .map(|i| probe_column(op, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DualGram::from_columns(&columns)?)
}

/// Probes `B` for `op` and optimises `P` against it.
pub fn precompute_projector<O: LinearOperator + Sync>(
    op: &O,
    cfg: &ProjectorConfig,
) -> CliResult<(DualGram, Projector)> {
    let b = probe_dual_gram(op, cfg.memory_budget)?;
    let p = optimize_projector(&b, cfg)?;
    Ok((b, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use paq_core::transforms::make_mask;
    use paq_core::{GridShape, SensingOperator};

    #[test]
    fn parallel_probe_matches_sequential() {
        let a =
            SensingOperator::new(make_mask(GridShape::new(16, 8).unwrap(), 0.25, 0.0, 3).unwrap());
        let par = probe_dual_gram(&a, u64::MAX).unwrap();
        let seq = paq_core::projector::probe_dual_gram(&a, u64::MAX).unwrap();
        assert_eq!(par.matrix(), seq.matrix());
    }

    #[test]
    fn budget_is_enforced_before_probing() {
        let a =
            SensingOperator::new(make_mask(GridShape::square(32).unwrap(), 0.5, 0.0, 3).unwrap());
        let err = probe_dual_gram(&a, 1024).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
