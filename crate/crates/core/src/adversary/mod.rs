//! Rademacher targets and the construction of sequences that defeat a given
//! estimation procedure.

mod certify;
mod procedures;
mod rademacher;
mod splice;

use thiserror::Error;

pub use certify::{last_exceedance, Certificate};
pub use procedures::{
    ConstantProcedure, EstimatorProcedure, ExternalProcedure, Fitted, OracleProcedure, PlugInHistogram,
};
pub use rademacher::{nu_k, rademacher_eval, rademacher_measure};
pub use splice::{
    build_adversarial_sequence, build_report, compute_block_thresholds, fitted_distance, materialize_block,
    pairwise_distances, span_checks, verify_report, AdversaryReport, AdversaryRun, Block, BlockRecord,
    BlockSource, BlockThresholds, CheckRow, Closeness, Finding, Outcome, PairDistance, SpanCheck,
    SpliceConfig, SpliceState, TrajectoryPoint, CLOSENESS, DEFAULT_HORIZON, DEFAULT_QUADRATURE_CELLS,
    FINITE_PREFIX_NOTE, SEPARATION,
};

#[derive(Debug, Error)]
pub enum AdversaryError {
    #[error("invalid adversary configuration: {0}")]
    BadConfig(String),
    #[error("estimation procedure failed: {0}")]
    Procedure(String),
    /// The procedure never came within the closeness bound of `h_k`.
    #[error("block {k}: estimate never within 1/40 of h_{k} up to n = {n} (closest {best_closeness})")]
    ConsistencyViolationWitness { k: u32, n: usize, best_closeness: f64 },
    #[error("block {k}: horizon exhausted: {reason}")]
    HorizonExhausted { k: u32, reason: String },
}
