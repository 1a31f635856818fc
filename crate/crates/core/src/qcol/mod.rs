//! Survey propagation for Q-coloring on chain-coupled random graphs.

mod graph;
mod scan;
mod sp;

pub use graph::{generate_qcol_instance, QcolEnsembleParams, QcolGraph, Window};
pub use scan::{classify_degree, qcol_threshold_scan, QcolScanOptions};
pub use sp::{run_qcol_sp, symmetric_update, vector_update, QcolMessages, QcolRun, QcolSpOptions, SpMode};
