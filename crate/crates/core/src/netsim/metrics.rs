use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::trace::{AdversaryView, GroundTruth, MessageKind, RunHeader, TraceEvent};
use crate::attacks::timing::{score_timing, timing_correlation_attack, TimingAttackConfig};
use crate::ledger::{DeadlineViolation, TradeId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("trace has no header")]
    MissingHeader,
    #[error("trace has no end marker")]
    MissingEnd,
    #[error("probabilities sum to {sum}, not 1")]
    NotADistribution { sum: f64 },
}

/// Shannon entropy in bits of a probability vector.
pub fn anonymity_entropy(probabilities: &[f64]) -> Result<f64, MetricsError> {
    let sum: f64 = probabilities.iter().sum();
    let valid = probabilities.iter().all(|p| p.is_finite() && *p >= 0.0);
    if !valid || !sum.is_finite() || (sum - 1.0).abs() > 1e-9 {
        return Err(MetricsError::NotADistribution { sum });
    }
    Ok(probabilities.iter().filter(|p| **p > 0.0).map(|p| -p * p.log2()).sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TradeLatency {
    pub trade: u64,
    pub posted_slot: u64,
    pub cleared_slot: Option<u64>,
    /// Slots from acceptance to clearing, or to the end of the run if uncleared.
    pub latency: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClearingReport {
    pub trades: Vec<TradeLatency>,
    pub violations: Vec<DeadlineViolation>,
}

fn header(trace: &[TraceEvent]) -> Result<&RunHeader, MetricsError> {
    match trace.first() {
        Some(TraceEvent::Header(h)) => Ok(h),
        _ => Err(MetricsError::MissingHeader),
    }
}

fn final_slot(trace: &[TraceEvent]) -> Result<u64, MetricsError> {
    match trace.last() {
        Some(TraceEvent::End { final_slot, .. }) => Ok(*final_slot),
        _ => Err(MetricsError::MissingEnd),
    }
}

/// Per-trade clearing latency read off the ledger appends in `trace`.
pub fn clearing_latency(trace: &[TraceEvent]) -> Result<ClearingReport, MetricsError> {
    let deadline = header(trace)?.clearing_deadline;
    let now = final_slot(trace)?;
    let mut posted: BTreeMap<u64, u64> = BTreeMap::new();
    let mut cleared: BTreeMap<u64, u64> = BTreeMap::new();
    for e in trace {
        if let TraceEvent::LedgerAppend { slot, kind, trade: Some(trade), .. } = e {
            match kind.as_str() {
                "accept_offer" => {
                    posted.insert(*trade, *slot);
                }
                "finalize_trade" => {
                    cleared.insert(*trade, *slot);
                }
                _ => {}
            }
        }
    }
    let mut report = ClearingReport::default();
    for (&trade, &posted_slot) in &posted {
        let cleared_slot = cleared.get(&trade).copied();
        let latency = cleared_slot.unwrap_or(now).saturating_sub(posted_slot);
        report.trades.push(TradeLatency { trade, posted_slot, cleared_slot, latency });
        if latency > deadline {
            report.violations.push(DeadlineViolation { trade: TradeId(trade), posted_slot, cleared_slot, latency });
        }
    }
    Ok(report)
}

/// Everything reported about a run; a pure function of its trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub final_slot: u64,
    pub clearing: ClearingReport,
    /// Sender anonymity-set entropy for each delivered real message.
    pub entropy_bits: Vec<f64>,
    pub mean_entropy_bits: Option<f64>,
    /// Timing-correlation success against the configured vantage.
    pub timing_attack_success: Option<f64>,
    pub bytes_sent: BTreeMap<u32, u64>,
    pub cells_sent: u64,
    pub cells_dropped: u64,
    pub messages_sent: u64,
    pub real_delivered: u64,
    pub cover_delivered: u64,
    pub failed_demand: Vec<usize>,
}

/// Longest time a message can spend between its first emission and final
/// arrival.
fn path_span(h: &RunHeader) -> u64 {
    (h.hop_count as u64 + 1) * (h.max_link_ms + h.batching_delay_ms)
}

/// For each delivered real message, a uniform posterior over the endpoint
/// routers that emitted any cell within one path span before its arrival.
fn sender_entropies(trace: &[TraceEvent], h: &RunHeader, truth: &GroundTruth) -> Result<Vec<f64>, MetricsError> {
    let mut emits: Vec<(u64, u32)> = trace
        .iter()
        .filter_map(|e| match e {
            TraceEvent::Transmit { t, src, .. } if h.is_endpoint(*src) => Some((*t, src.0)),
            _ => None,
        })
        .collect();
    emits.sort_unstable();
    let span = path_span(h);
    truth
        .deliveries
        .iter()
        .map(|d| {
            let from = emits.partition_point(|(t, _)| *t < d.arrive.saturating_sub(span));
            let to = emits.partition_point(|(t, _)| *t <= d.arrive);
            let active: BTreeSet<u32> = emits[from..to].iter().map(|(_, r)| *r).collect();
            let k = active.len().max(1);
            anonymity_entropy(&vec![1.0 / k as f64; k])
        })
        .collect()
}

pub fn compute_metrics(trace: &[TraceEvent]) -> Result<MetricsReport, MetricsError> {
    let h = header(trace)?;
    let final_slot = final_slot(trace)?;
    let clearing = clearing_latency(trace)?;

    let mut bytes_sent: BTreeMap<u32, u64> = BTreeMap::new();
    let (mut cells_sent, mut cells_dropped, mut messages_sent) = (0, 0, 0);
    let (mut real_delivered, mut cover_delivered) = (0, 0);
    let mut failed = BTreeSet::new();
    for e in trace {
        match e {
            TraceEvent::Transmit { src, size, dropped, .. } => {
                *bytes_sent.entry(src.0).or_insert(0) += *size as u64;
                cells_sent += 1;
                cells_dropped += *dropped as u64;
            }
            TraceEvent::Send { .. } => messages_sent += 1,
            TraceEvent::Deliver { kind: MessageKind::Cover, .. } => cover_delivered += 1,
            TraceEvent::Deliver { .. } => real_delivered += 1,
            TraceEvent::TradeFailed { demand, .. } => {
                failed.insert(*demand);
            }
            _ => {}
        }
    }

    let global = GroundTruth::from_trace(trace, &super::Vantage::All);
    let entropy_bits = sender_entropies(trace, h, &global)?;
    let mean_entropy_bits =
        (!entropy_bits.is_empty()).then(|| entropy_bits.iter().sum::<f64>() / entropy_bits.len() as f64);

    let view = AdversaryView::from_trace(trace, &h.vantage);
    let truth = GroundTruth::from_trace(trace, &h.vantage);
    let guesses = timing_correlation_attack(&view, &TimingAttackConfig::for_max_latency(h.max_link_ms));
    let timing_attack_success = score_timing(&guesses, &truth);

    Ok(MetricsReport {
        final_slot,
        clearing,
        entropy_bits,
        mean_entropy_bits,
        timing_attack_success,
        bytes_sent,
        cells_sent,
        cells_dropped,
        messages_sent,
        real_delivered,
        cover_delivered,
        failed_demand: failed.into_iter().collect(),
    })
}
