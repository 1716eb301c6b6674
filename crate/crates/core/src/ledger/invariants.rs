use std::collections::BTreeMap;

use thiserror::Error;

use super::event::LedgerEvent;
use super::state::{LedgerConfig, LedgerState};
use super::{EnergyKind, LedgerError, ProsumerId, Slot};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InvariantViolation {
    #[error("event {index} failed to replay: {error}")]
    Replay { index: usize, error: LedgerError },
    #[error("after event {index}: {kind:?} slot {slot} has {live} W live, expected {expected} W")]
    Energy { index: usize, kind: EnergyKind, slot: Slot, live: u64, expected: u64 },
    #[error("after event {index}: {held} cents held or escrowed, {issued} issued")]
    Fiat { index: usize, held: u64, issued: u64 },
    #[error("after event {index}: prosumer {prosumer:?} scheduled {scheduled} W in slot {slot}, capacity {capacity} W")]
    Capacity { index: usize, prosumer: ProsumerId, slot: Slot, scheduled: u64, capacity: u64 },
    #[error("two replays of the same log produced different state")]
    Nondeterministic,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InvariantReport {
    pub events: usize,
    pub final_digest: [u8; 32],
}

fn energy(state: &LedgerState, index: usize) -> Result<(), InvariantViolation> {
    let mut live: BTreeMap<(EnergyKind, Slot), u64> = BTreeMap::new();
    for t in state.tokens.values() {
        for s in t.interval.slots() {
            *live.entry((t.kind, s)).or_insert(0) += t.power;
        }
    }
    let keys = live.keys().chain(state.withdrawn.keys()).chain(state.retired.keys());
    for &(kind, slot) in keys {
        let get = |m: &BTreeMap<(EnergyKind, Slot), u64>| m.get(&(kind, slot)).copied().unwrap_or(0);
        let expected = get(&state.withdrawn).checked_sub(get(&state.retired));
        let have = get(&live);
        if expected != Some(have) {
            return Err(InvariantViolation::Energy {
                index,
                kind,
                slot,
                live: have,
                expected: expected.unwrap_or(0),
            });
        }
    }
    Ok(())
}

fn fiat(state: &LedgerState, index: usize) -> Result<(), InvariantViolation> {
    let held = state.balances.values().sum::<u64>() + state.escrowed();
    if held != state.issued {
        return Err(InvariantViolation::Fiat { index, held, issued: state.issued });
    }
    Ok(())
}

/// Replays `events` and checks after every event that per-slot energy is
/// conserved, fiat is conserved, and no prosumer exceeds capacity in any
/// slot. Capacity is recomputed from the withdraw events independently of
/// the state's own tally. Finally replays once more and compares digests.
pub fn check_invariants(config: LedgerConfig, events: &[LedgerEvent]) -> Result<InvariantReport, InvariantViolation> {
    let mut state = LedgerState::new(config);
    let mut tally: BTreeMap<(ProsumerId, EnergyKind, Slot), u64> = BTreeMap::new();
    for (index, event) in events.iter().enumerate() {
        state.apply(event).map_err(|error| InvariantViolation::Replay { index, error })?;
        if let LedgerEvent::WithdrawEnergy { prosumer, kind, power, interval, .. } = event {
            let record = &state.prosumers[prosumer];
            let capacity = match kind {
                EnergyKind::Production => record.max_generation,
                EnergyKind::Consumption => record.max_consumption,
            };
            for slot in interval.slots() {
                let scheduled = tally.entry((*prosumer, *kind, slot)).or_insert(0);
                *scheduled += power;
                if *scheduled > capacity {
                    return Err(InvariantViolation::Capacity {
                        index,
                        prosumer: *prosumer,
                        slot,
                        scheduled: *scheduled,
                        capacity,
                    });
                }
            }
        }
        energy(&state, index)?;
        fiat(&state, index)?;
    }
    let mut again = LedgerState::new(config);
    for (index, event) in events.iter().enumerate() {
        again.apply(event).map_err(|error| InvariantViolation::Replay { index, error })?;
    }
    if again.digest() != state.digest() || again != state {
        return Err(InvariantViolation::Nondeterministic);
    }
    Ok(InvariantReport { events: events.len(), final_digest: state.digest() })
}
