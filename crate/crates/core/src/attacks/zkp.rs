//! Processing-cost comparison of ring signatures and zk-proof payments.
//!
//! Each scheme is a single sequential pipeline with a fixed per-transaction
//! cost in microseconds. The k-th transaction of a slot completes after
//! k times that cost. A workload violates the clearing bound when the last
//! transaction of a slot finishes after the deadline, or when a slot's work
//! does not fit in the slot and the backlog grows without bound.

use serde::{Deserialize, Serialize};

/// Prove and verify times in microseconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZkpCostModel {
    pub prove_us: u64,
    pub verify_us: u64,
}

impl Default for ZkpCostModel {
    fn default() -> Self {
        // 3 minutes to prove, 8.5 ms to verify
        ZkpCostModel { prove_us: 180_000_000, verify_us: 8_500 }
    }
}

/// Sign and verify times of the ring-signature pipeline in microseconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingCostModel {
    pub sign_us: u64,
    pub verify_us: u64,
}

impl Default for RingCostModel {
    fn default() -> Self {
        RingCostModel { sign_us: 1_000, verify_us: 1_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    RingSignature,
    /// Every transaction is proved and verified inside the pipeline.
    ZkpProveInline,
    /// Transactions arrive pre-proved; only verification is on the path.
    ZkpVerifyOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThroughputRow {
    pub scheme: Scheme,
    pub workload_per_slot: u64,
    pub per_tx_us: u64,
    /// Completion time of the last transaction of a slot.
    pub worst_latency_us: u64,
    pub deadline_us: u64,
    pub violates_deadline: bool,
    /// Smallest workload per slot that violates; `None` for a free pipeline.
    pub first_violating_workload: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClearingBudget {
    pub slot_us: u64,
    pub deadline_slots: u64,
}

impl ClearingBudget {
    pub fn deadline_us(&self) -> u64 {
        self.deadline_slots.saturating_mul(self.slot_us)
    }

    /// Largest per-slot busy time that neither misses the deadline nor
    /// builds a backlog.
    fn capacity_us(&self) -> u64 {
        self.slot_us.min(self.deadline_us())
    }
}

fn row(scheme: Scheme, per_tx_us: u64, workload: u64, budget: ClearingBudget) -> ThroughputRow {
    let worst_latency_us = per_tx_us.saturating_mul(workload);
    let capacity = budget.capacity_us();
    ThroughputRow {
        scheme,
        workload_per_slot: workload,
        per_tx_us,
        worst_latency_us,
        deadline_us: budget.deadline_us(),
        violates_deadline: worst_latency_us > capacity,
        first_violating_workload: (per_tx_us > 0).then(|| capacity / per_tx_us + 1),
    }
}

/// One row per scheme for `workload` transactions per slot.
pub fn zkp_throughput_comparison(
    workload: u64,
    zkp: &ZkpCostModel,
    ring: &RingCostModel,
    budget: ClearingBudget,
) -> Vec<ThroughputRow> {
    vec![
        row(Scheme::RingSignature, ring.sign_us.saturating_add(ring.verify_us), workload, budget),
        row(Scheme::ZkpProveInline, zkp.prove_us.saturating_add(zkp.verify_us), workload, budget),
        row(Scheme::ZkpVerifyOnly, zkp.verify_us, workload, budget),
    ]
}
