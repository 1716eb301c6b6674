//! Anonymity attacks and cost models.
//!
//! Attacks read only what their adversary could see: an
//! [`AdversaryView`](crate::netsim::AdversaryView) or public ring metadata.
//! Scoring functions take the ground truth separately.

pub mod chain;
pub mod timing;
pub mod zkp;

pub use chain::{
    chain_reaction_traceability, check_deductions, ring_inputs_from_ledger, synthetic_history, FalseDeduction,
    HistoryParams, OutputId, RingInput, SyntheticHistory, TraceabilityResult,
};
pub use timing::{score_timing, timing_correlation_attack, TimingAttackConfig, TimingGuess};
pub use zkp::{zkp_throughput_comparison, ClearingBudget, RingCostModel, Scheme, ThroughputRow, ZkpCostModel};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttackError {
    #[error("correlation window must be positive")]
    ZeroWindow,
}
