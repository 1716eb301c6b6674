//! Passive size and timing correlation.
//!
//! The observer links a cell leaving router `R` to the most recent unclaimed
//! cell that entered `R` within the window and whose size equals the
//! outgoing size or the outgoing size plus one layer. Chains of such links
//! run back to a head cell with no predecessor; its source is the guessed
//! sender of the message carried by the chain's final cell.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::AttackError;
use crate::netsim::{AdversaryView, GroundTruth, Vantage};
use crate::onion::{RouterId, LAYER_OVERHEAD};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingAttackConfig {
    window_ms: u64,
    size_tolerance: usize,
    vantage: Vantage,
}

impl TimingAttackConfig {
    pub fn new(window_ms: u64, size_tolerance: usize, vantage: Vantage) -> Result<Self, AttackError> {
        if window_ms == 0 {
            return Err(AttackError::ZeroWindow);
        }
        Ok(TimingAttackConfig { window_ms, size_tolerance, vantage })
    }

    /// Window of twice the largest link latency, exact sizes, every link.
    pub fn for_max_latency(max_link_ms: u64) -> Self {
        TimingAttackConfig { window_ms: (2 * max_link_ms).max(1), size_tolerance: 0, vantage: Vantage::All }
    }

    pub fn window_ms(&self) -> u64 {
        self.window_ms
    }

    pub fn size_tolerance(&self) -> usize {
        self.size_tolerance
    }

    pub fn vantage(&self) -> &Vantage {
        &self.vantage
    }
}

/// The attacker's claim about the message whose last observed cell is
/// `observation` (an index into the view).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingGuess {
    pub observation: usize,
    pub sender: RouterId,
    pub receiver: RouterId,
}

fn sizes_match(incoming: usize, outgoing: usize, tolerance: usize) -> bool {
    incoming.abs_diff(outgoing) <= tolerance || incoming.abs_diff(outgoing + LAYER_OVERHEAD) <= tolerance
}

/// Reads only the adversary view.
pub fn timing_correlation_attack(view: &AdversaryView, config: &TimingAttackConfig) -> Vec<TimingGuess> {
    let obs = &view.observations;
    let mut order: Vec<usize> =
        (0..obs.len()).filter(|&i| config.vantage.observes(obs[i].src, obs[i].dst)).collect();
    order.sort_by_key(|&i| (obs[i].time, i));

    let mut predecessor: Vec<Option<usize>> = vec![None; obs.len()];
    let mut claimed = vec![false; obs.len()];
    let mut entered: BTreeMap<RouterId, Vec<usize>> = BTreeMap::new();
    for &o in &order {
        let out = &obs[o];
        if let Some(list) = entered.get(&out.src) {
            for &p in list.iter().rev() {
                let inc = &obs[p];
                if out.time - inc.time > config.window_ms {
                    break;
                }
                if !claimed[p] && sizes_match(inc.size, out.size, config.size_tolerance) {
                    predecessor[o] = Some(p);
                    claimed[p] = true;
                    break;
                }
            }
        }
        entered.entry(out.dst).or_default().push(o);
    }

    order
        .iter()
        .filter(|&&o| !claimed[o])
        .map(|&o| {
            let mut head = o;
            while let Some(p) = predecessor[head] {
                head = p;
            }
            TimingGuess { observation: o, sender: obs[head].src, receiver: obs[o].dst }
        })
        .collect()
}

/// Fraction of delivered messages whose sender was guessed correctly.
/// `None` when nothing was delivered.
pub fn score_timing(guesses: &[TimingGuess], truth: &GroundTruth) -> Option<f64> {
    if truth.deliveries.is_empty() {
        return None;
    }
    let by_obs: BTreeMap<usize, &TimingGuess> = guesses.iter().map(|g| (g.observation, g)).collect();
    let correct = truth
        .deliveries
        .iter()
        .filter(|d| {
            d.observation
                .and_then(|i| by_obs.get(&i))
                .is_some_and(|g| g.sender == d.sender && g.receiver == d.receiver)
        })
        .count();
    Some(correct as f64 / truth.deliveries.len() as f64)
}
