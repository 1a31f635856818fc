//! Locating the SP threshold by bisection over population dynamics.

use super::population::{PopulationEnsemble, PopulationParams, Seeding};
use crate::error::{invalid, Result};
use crate::rng;
use crate::scan::{bisect_threshold, majority_vote, Classification, ThresholdScanResult, Verdict};

/// Decision rule applied after the sweep budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassificationRule {
    /// `Above` when the bulk mean `φ` exceeds `phi_min`.
    BulkMean,
    /// `Below` when the bulk mean `φ` is under `phi_min` or the nontrivial
    /// region lost at least two positions over the second half of the budget.
    FrontDrift,
}

impl ClassificationRule {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassificationRule::BulkMean => "bulk-mean",
            ClassificationRule::FrontDrift => "front-drift",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "bulk-mean" => Some(ClassificationRule::BulkMean),
            "front-drift" => Some(ClassificationRule::FrontDrift),
            _ => None,
        }
    }
}

/// How one value of `alpha` is classified.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdCriterion {
    /// Bulk mean `φ` above which the nontrivial solution is deemed alive.
    pub phi_min: f64,
    /// Sweeps of the chain. The pinned nontrivial population gets as many.
    pub sweeps: usize,
    /// Initial warning at every sample.
    pub init_eta: f64,
    pub seeding: Seeding,
    pub rule: ClassificationRule,
    /// Independent runs per `alpha`, combined by majority vote.
    pub replicates: usize,
}

impl Default for ThresholdCriterion {
    fn default() -> Self {
        ThresholdCriterion {
            phi_min: 1e-3,
            sweeps: 2000,
            init_eta: 0.9,
            seeding: Seeding::OneSided,
            rule: ClassificationRule::BulkMean,
            replicates: 1,
        }
    }
}

impl ThresholdCriterion {
    pub fn validate(&self) -> Result<()> {
        if !(self.phi_min > 0.0) {
            return Err(invalid("phi_min", "must be positive"));
        }
        if self.sweeps == 0 {
            return Err(invalid("sweeps", "must be at least 1"));
        }
        if !(self.init_eta > 0.0 && self.init_eta < 1.0) {
            return Err(invalid("init_eta", "must lie in (0, 1)"));
        }
        if self.replicates == 0 {
            return Err(invalid("replicates", "must be at least 1"));
        }
        Ok(())
    }
}

/// Runs population dynamics at `params.alpha` and classifies it by
/// `criterion.rule`. The diagnostic is the final bulk mean `φ`.
pub fn classify_alpha(params: PopulationParams, criterion: &ThresholdCriterion) -> Result<Verdict> {
    criterion.validate()?;
    majority_vote(criterion.replicates, |r| {
        let p = PopulationParams {
            seed: rng::derive_seed(params.seed, &[r as u64, params.alpha.to_bits()]),
            ..params
        };
        let mut pop = PopulationEnsemble::seeded(p, criterion.init_eta, criterion.seeding, criterion.sweeps)?;
        let above = match criterion.rule {
            ClassificationRule::BulkMean => {
                pop.run(criterion.sweeps);
                pop.bulk_mean_phi() > criterion.phi_min
            }
            ClassificationRule::FrontDrift => {
                let half = criterion.sweeps / 2;
                pop.run(half);
                let reference = pop.profile().iter().fold(0.0f64, |m, p| m.max(p.1));
                let before = pop.nontrivial_extent(reference);
                pop.run(criterion.sweeps - half);
                let after = pop.nontrivial_extent(reference);
                pop.bulk_mean_phi() > criterion.phi_min && after + 2 > before
            }
        };
        Ok((Classification::from_above(above), pop.bulk_mean_phi()))
    })
}

/// Bisection for the smallest `alpha` with a surviving nontrivial solution.
/// `base.alpha` is ignored.
pub fn detect_threshold(
    base: PopulationParams,
    alpha_bracket: (f64, f64),
    resolution: f64,
    criterion: &ThresholdCriterion,
) -> Result<ThresholdScanResult> {
    criterion.validate()?;
    PopulationParams {
        alpha: alpha_bracket.1,
        ..base
    }
    .validate()?;
    bisect_threshold(
        |alpha| classify_alpha(PopulationParams { alpha, ..base }, criterion),
        alpha_bracket,
        resolution,
        64,
    )
}
