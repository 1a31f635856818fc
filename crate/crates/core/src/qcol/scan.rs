//! Threshold scans over the mean degree.

use super::graph::{generate_qcol_instance, QcolEnsembleParams};
use super::sp::{run_qcol_sp, QcolMessages, QcolSpOptions, SpMode};
use crate::error::{invalid, Result};
use crate::ksat::Seeding;
use crate::rng;
use crate::scan::{bisect_threshold, majority_vote, Classification, ThresholdScanResult, Verdict};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QcolScanOptions {
    pub mode: SpMode,
    pub seeding: Seeding,
    pub sp: QcolSpOptions,
    /// Bulk mean warning above which a run counts as nontrivial.
    pub warning_min: f64,
}

impl Default for QcolScanOptions {
    fn default() -> Self {
        QcolScanOptions {
            mode: SpMode::Symmetric,
            seeding: Seeding::OneSided,
            sp: QcolSpOptions::default(),
            warning_min: 1e-3,
        }
    }
}

/// Classifies mean degree `params.c` by majority over `seed_count` instances.
/// Replicate `r` uses an instance seed derived from `(params.seed, r)` only,
/// so every `c` sees the same random streams. The diagnostic is the bulk
/// mean warning.
pub fn classify_degree(params: QcolEnsembleParams, seed_count: usize, opts: &QcolScanOptions) -> Result<Verdict> {
    params.validate()?;
    majority_vote(seed_count, |r| {
        let seed = rng::derive_seed(params.seed, &[r as u64]);
        let g = generate_qcol_instance(QcolEnsembleParams { seed, ..params })?;
        let init = QcolMessages::warning_rich(&g, opts.mode, opts.seeding, seed);
        let run = run_qcol_sp(&g, init, opts.sp)?;
        let bulk = run.messages.bulk_mean(&g);
        Ok((Classification::from_above(bulk > opts.warning_min), bulk))
    })
}

/// Bisection on `c` for the onset of a nontrivial SP fixed point.
/// `base.c` is ignored.
pub fn qcol_threshold_scan(
    base: QcolEnsembleParams,
    c_bracket: (f64, f64),
    resolution: f64,
    seed_count: usize,
    opts: &QcolScanOptions,
) -> Result<ThresholdScanResult> {
    if seed_count == 0 {
        return Err(invalid("seed_count", "must be at least 1"));
    }
    QcolEnsembleParams { c: c_bracket.1, ..base }.validate()?;
    bisect_threshold(
        |c| classify_degree(QcolEnsembleParams { c, ..base }, seed_count, opts),
        c_bracket,
        resolution,
        64,
    )
}
