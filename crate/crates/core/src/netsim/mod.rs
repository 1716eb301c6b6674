//! Deterministic discrete-event simulation of the trading protocol.
//!
//! Every prosumer and the DSO runs a router and owns one destination;
//! extra relay routers only forward. A demand entry drives four steps:
//! the seller sends a withdraw request to the DSO, posts the ask once the
//! token lands, and notifies the buyer; the buyer accepts with a
//! ring-signed payment and notifies the seller, who finalizes. One slot
//! after the interval the meter reading is recorded and the trade settled.
//!
//! Messages travel as fixed-size onion cells over a fresh outbound tunnel
//! to the recipient's lease gateway, then over the recipient's one-hop
//! inbound tunnel. Ledger appends are local and instantaneous: the ledger
//! is a replicated state machine, not a network peer.
//!
//! The run is a pure function of the [`Scenario`]. All randomness comes
//! from one ChaCha20 stream seeded with `scenario.seed`.

mod engine;
mod metrics;
mod scenario;
mod trace;

pub use engine::HopRecord;
pub use metrics::{
    anonymity_entropy, clearing_latency, compute_metrics, ClearingReport, MetricsError, MetricsReport, TradeLatency,
};
pub use scenario::{Diagnostic, InjectedDelay, LatencyModel, RandomTrades, Scenario, TradeSpec};
pub use trace::{AdversaryView, GroundTruth, MessageKind, Observation, RunHeader, TraceEvent, TrueDelivery, Vantage};

use std::io::{BufRead, Write};

use thiserror::Error;

use crate::ledger::{Ledger, LedgerError, TradeId};
use crate::onion::{DestinationId, OnionError, RouterId, TunnelId};
use crate::ringsig::RingError;

pub const TRACE_SCHEMA: &str = "microgrid-trace/1";

#[derive(Debug, Error)]
pub enum NetsimError {
    #[error("invalid scenario: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error("onion routing: {0}")]
    Onion(#[from] OnionError),
    #[error("ledger: {0}")]
    Ledger(#[from] LedgerError),
    #[error("ring signature: {0}")]
    Ring(#[from] RingError),
    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),
    #[error("no lease set for destination")]
    UnknownDestination,
    #[error("router {router} has no tunnel {tunnel:?}")]
    UnknownTunnel { router: RouterId, tunnel: TunnelId },
    #[error("undecodable application message")]
    MalformedMessage,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Stamped into the trace header.
    pub config_hash: String,
    /// Keep every relay's input and output cell, for inspection in tests.
    pub record_hops: bool,
}

pub struct RunOutput {
    pub trace: Vec<TraceEvent>,
    pub ledger: Ledger,
    pub metrics: MetricsReport,
    /// Empty unless [`RunOptions::record_hops`] is set.
    pub hops: Vec<HopRecord>,
    /// Prosumer destinations in id order, then the DSO's.
    pub destinations: Vec<DestinationId>,
    /// The resolved demand schedule.
    pub demand: Vec<TradeSpec>,
    /// Ledger trade created for each demand entry, if it got that far.
    pub demand_trades: Vec<Option<TradeId>>,
}

impl RunOutput {
    pub fn adversary_view(&self) -> AdversaryView {
        AdversaryView::from_trace(&self.trace, self.header().map(|h| &h.vantage).unwrap_or(&Vantage::All))
    }

    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth::from_trace(&self.trace, self.header().map(|h| &h.vantage).unwrap_or(&Vantage::All))
    }

    pub fn header(&self) -> Option<&RunHeader> {
        match self.trace.first() {
            Some(TraceEvent::Header(h)) => Some(h),
            _ => None,
        }
    }
}

pub fn run(scenario: &Scenario) -> Result<RunOutput, NetsimError> {
    run_with(scenario, &RunOptions::default())
}

pub fn run_with(scenario: &Scenario, options: &RunOptions) -> Result<RunOutput, NetsimError> {
    let diagnostics = scenario.validate();
    if !diagnostics.is_empty() {
        return Err(NetsimError::Invalid(diagnostics));
    }
    engine::Simulator::new(scenario, options.config_hash.clone(), options.record_hops)?.run()
}

pub fn write_trace<W: Write>(mut out: W, trace: &[TraceEvent]) -> std::io::Result<()> {
    for e in trace {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_trace<R: BufRead>(input: R) -> Result<Vec<TraceEvent>, std::io::Error> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
