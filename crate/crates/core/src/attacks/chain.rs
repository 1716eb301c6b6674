//! Zero-mixin chain reaction over public ring membership.
//!
//! Each ring input references the outputs it might be spending. An output
//! is spent at most once, so once an input is pinned to a single output
//! that output is eliminated from every other ring. Outputs the adversary
//! owns are eliminated from the start. Passes repeat until nothing changes.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ledger::{AnonAddress, LedgerEvent};
use crate::ringsig::{decode_signature, Group, Ristretto};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OutputId(pub u64);

/// Public ring metadata of one spend.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingInput {
    pub members: Vec<OutputId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceabilityResult {
    pub total_inputs: usize,
    /// Input index to the output it must be spending.
    pub deduced: BTreeMap<usize, OutputId>,
    pub fraction_traceable: f64,
    /// Pass number (1 = first pass) to number of inputs deduced in it.
    pub depth_histogram: BTreeMap<usize, usize>,
}

/// Runs the elimination to a fixpoint. Reads only public ring data and the
/// adversary's own outputs.
pub fn chain_reaction_traceability(inputs: &[RingInput], adversary_outputs: &BTreeSet<OutputId>) -> TraceabilityResult {
    let mut known_spent: BTreeSet<OutputId> = BTreeSet::new();
    let mut deduced = BTreeMap::new();
    let mut depth_histogram = BTreeMap::new();
    let mut pass = 0;
    loop {
        pass += 1;
        let mut found = Vec::new();
        for (i, input) in inputs.iter().enumerate() {
            if deduced.contains_key(&i) {
                continue;
            }
            let mut live = input
                .members
                .iter()
                .filter(|o| !known_spent.contains(o) && !adversary_outputs.contains(o))
                .collect::<BTreeSet<_>>()
                .into_iter();
            if let (Some(only), None) = (live.next(), live.next()) {
                found.push((i, *only));
            }
        }
        if found.is_empty() {
            break;
        }
        // eliminations apply from the next pass on
        *depth_histogram.entry(pass).or_insert(0) += found.len();
        for (i, o) in found {
            deduced.insert(i, o);
            known_spent.insert(o);
        }
    }
    let total_inputs = inputs.len();
    let fraction_traceable = if total_inputs == 0 { 0.0 } else { deduced.len() as f64 / total_inputs as f64 };
    TraceabilityResult { total_inputs, deduced, fraction_traceable, depth_histogram }
}

/// A deduction that disagrees with the true spend.
#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("input {input} deduced to spend {deduced:?}, actually spends {actual:?}")]
pub struct FalseDeduction {
    pub input: usize,
    pub deduced: OutputId,
    pub actual: OutputId,
}

/// Checks every deduction against the true spends.
pub fn check_deductions(result: &TraceabilityResult, truth: &[OutputId]) -> Result<(), FalseDeduction> {
    for (&input, &deduced) in &result.deduced {
        let actual = truth[input];
        if actual != deduced {
            return Err(FalseDeduction { input, deduced, actual });
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryParams {
    pub inputs: usize,
    /// Ring size chosen by senders who do mix.
    pub ring_size: usize,
    /// Senders that choose no mixins at all.
    pub zero_mixin_fraction: f64,
    /// Policy floor applied to every ring.
    pub min_ring_size: usize,
    /// Outputs owned by the adversary, available as decoys.
    pub adversary_outputs: usize,
    /// Unspent honest outputs available as decoys, e.g. from a joined network.
    pub extra_pool: usize,
}

/// Generated spends with the ground truth kept alongside.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntheticHistory {
    pub inputs: Vec<RingInput>,
    pub adversary_outputs: BTreeSet<OutputId>,
    pub truth: Vec<OutputId>,
}

/// Each input spends its own honest output. Decoys come from a per-input
/// random order of the whole pool, so raising `min_ring_size` only ever
/// extends a ring with more members.
pub fn synthetic_history<R: Rng>(params: &HistoryParams, rng: &mut R) -> SyntheticHistory {
    let n = params.inputs as u64;
    let truth: Vec<OutputId> = (0..n).map(OutputId).collect();
    let adversary_outputs: BTreeSet<OutputId> =
        (n..n + params.adversary_outputs as u64).map(OutputId).collect();
    let pool_end = n + params.adversary_outputs as u64 + params.extra_pool as u64;
    let pool: Vec<OutputId> = (0..pool_end).map(OutputId).collect();
    let inputs = truth
        .iter()
        .map(|&real| {
            let chosen = if rng.gen_bool(params.zero_mixin_fraction) { 1 } else { params.ring_size };
            let size = chosen.max(params.min_ring_size).max(1);
            let mut decoys: Vec<OutputId> = pool.iter().copied().filter(|o| *o != real).collect();
            decoys.shuffle(rng);
            let mut members: Vec<OutputId> = decoys.into_iter().take(size - 1).collect();
            members.push(real);
            members.sort_unstable();
            RingInput { members }
        })
        .collect();
    SyntheticHistory { inputs, adversary_outputs, truth }
}

/// Ring inputs of every ring-signed purchase in a ledger log. Output ids
/// number ring members in order of first appearance.
pub fn ring_inputs_from_ledger(events: &[LedgerEvent]) -> (Vec<RingInput>, BTreeMap<AnonAddress, OutputId>) {
    let g = Ristretto;
    let mut ids: BTreeMap<AnonAddress, OutputId> = BTreeMap::new();
    let mut inputs = Vec::new();
    for e in events {
        let LedgerEvent::AcceptOffer { spend: Some(auth), .. } = e else {
            continue;
        };
        let Some(sig) = hex::decode(&auth.signature).ok().and_then(|b| decode_signature(&g, &b).ok()) else {
            continue;
        };
        let members = sig
            .ring
            .iter()
            .map(|p| {
                let addr = AnonAddress(hex::encode(g.encode_element(p)));
                let next = OutputId(ids.len() as u64);
                *ids.entry(addr).or_insert(next)
            })
            .collect();
        inputs.push(RingInput { members });
    }
    (inputs, ids)
}
