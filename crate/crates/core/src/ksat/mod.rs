//! Survey propagation for random K-SAT on coupled ensembles.

mod instance;
mod message;
mod population;
mod threshold;

pub use instance::{
    generate_coupled_instance, run_sp_on_instance, Clause, CoupledFactorGraph, InstanceParams, SpMessages, SpRun,
    SpRunOptions,
};
pub use message::{eta_to_phi, phi_to_eta, sp_update_clause, sp_update_variable, ClauseUpdate, EntropicView};
pub use population::{population_dynamics_step, PopulationEnsemble, PopulationParams, Seeding};
pub use threshold::{classify_alpha, detect_threshold, ClassificationRule, ThresholdCriterion};
