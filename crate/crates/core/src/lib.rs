//! Threshold saturation under spatial coupling: solvers for coupled
//! Curie-Weiss chains, random-field chains, survey propagation on coupled
//! K-SAT and Q-colouring ensembles, the large-K warning recursion, and the
//! scan machinery that locates thresholds.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod chain;
pub mod curve;
pub mod cw;
pub mod error;
pub mod ksat;
pub mod largek;
mod newton;
pub mod qcol;
pub mod rfcw;
pub mod rng;
pub mod scan;
pub mod table;

pub use chain::{ChainParams, Profile};
pub use curve::{VdwCurve, VdwPoint};
pub use cw::{CwFixedPoints, CwParams, FixedPoint, FixedPointKind, LocalResponse, Tanh};
pub use error::{Error, Result};
pub use ksat::{CoupledFactorGraph, InstanceParams, PopulationEnsemble, PopulationParams, Seeding};
pub use largek::LargeKParams;
pub use newton::NewtonOptions;
pub use qcol::{QcolEnsembleParams, QcolGraph, SpMode, Window};
pub use rfcw::{FieldDistribution, FieldQuadrature};
pub use scan::{Classification, ThresholdScanResult, Verdict};
pub use table::Table;
