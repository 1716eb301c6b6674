use serde::{Deserialize, Serialize};

use crate::onion::RouterId;

/// Which links a passive network observer can see.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Vantage {
    /// Every link, the ISP-level view.
    #[default]
    All,
    /// Links with either end at one of these routers.
    Routers { routers: Vec<u32> },
    /// Exactly these directed links.
    Links { links: Vec<(u32, u32)> },
}

impl Vantage {
    pub fn observes(&self, src: RouterId, dst: RouterId) -> bool {
        match self {
            Vantage::All => true,
            Vantage::Routers { routers } => routers.contains(&src.0) || routers.contains(&dst.0),
            Vantage::Links { links } => links.contains(&(src.0, dst.0)),
        }
    }
}

/// Application message categories, recorded for ground truth only.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    WithdrawRequest,
    OfferNotice,
    AcceptNotice,
    Cover,
}

/// Static facts about a run that analyses of the trace need.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub schema: String,
    pub seed: u64,
    pub config_hash: String,
    pub prosumers: u32,
    pub dso: RouterId,
    pub relays: u32,
    pub hop_count: usize,
    pub slot_ms: u64,
    pub clearing_deadline: u64,
    pub max_link_ms: u64,
    pub batching_delay_ms: u64,
    pub vantage: Vantage,
}

impl RunHeader {
    /// Routers that host application endpoints (prosumers and the DSO).
    pub fn is_endpoint(&self, r: RouterId) -> bool {
        r.0 <= self.dso.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Header(RunHeader),
    /// An endpoint hands a new message to its first hop.
    Send { t: u64, msg: u64, from: RouterId, to: RouterId, kind: MessageKind },
    /// One cell on one link.
    Transmit {
        t: u64,
        arrive: u64,
        msg: u64,
        src: RouterId,
        dst: RouterId,
        size: usize,
        /// Gateway to destination leg.
        last_leg: bool,
        dropped: bool,
    },
    Deliver { t: u64, msg: u64, router: RouterId, kind: MessageKind },
    LedgerAppend { t: u64, slot: u64, index: usize, kind: String, trade: Option<u64> },
    MeterReading { t: u64, slot: u64, trade: u64, measured: Vec<u64> },
    TradeFailed { t: u64, demand: usize, reason: String },
    End { t: u64, final_slot: u64 },
}

impl TraceEvent {
    pub fn time(&self) -> u64 {
        match self {
            TraceEvent::Header(_) => 0,
            TraceEvent::Send { t, .. }
            | TraceEvent::Transmit { t, .. }
            | TraceEvent::Deliver { t, .. }
            | TraceEvent::LedgerAppend { t, .. }
            | TraceEvent::MeterReading { t, .. }
            | TraceEvent::TradeFailed { t, .. }
            | TraceEvent::End { t, .. } => *t,
        }
    }
}

/// What the network observer records for one cell. Carries no payload,
/// message id or destination id by construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub time: u64,
    pub size: usize,
    pub src: RouterId,
    pub dst: RouterId,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryView {
    pub observations: Vec<Observation>,
}

impl AdversaryView {
    pub fn from_trace(trace: &[TraceEvent], vantage: &Vantage) -> Self {
        let observations = trace
            .iter()
            .filter_map(|e| match e {
                TraceEvent::Transmit { t, src, dst, size, .. } if vantage.observes(*src, *dst) => {
                    Some(Observation { time: *t, size: *size, src: *src, dst: *dst })
                }
                _ => None,
            })
            .collect();
        AdversaryView { observations }
    }
}

/// One delivered real message, for scoring attacks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrueDelivery {
    pub msg: u64,
    pub sender: RouterId,
    pub receiver: RouterId,
    /// Index of the final leg in the adversary view, if observed.
    pub observation: Option<usize>,
    pub arrive: u64,
}

/// Ground truth kept apart from [`AdversaryView`]; only scorers read it.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub deliveries: Vec<TrueDelivery>,
}

impl GroundTruth {
    /// Real (non-cover) messages whose final leg arrived.
    pub fn from_trace(trace: &[TraceEvent], vantage: &Vantage) -> Self {
        use std::collections::BTreeMap;
        let mut senders: BTreeMap<u64, (RouterId, MessageKind)> = BTreeMap::new();
        let mut deliveries = Vec::new();
        let mut view_index = 0usize;
        for e in trace {
            match e {
                TraceEvent::Send { msg, from, kind, .. } => {
                    senders.insert(*msg, (*from, *kind));
                }
                TraceEvent::Transmit { msg, src, dst, last_leg, dropped, arrive, .. } => {
                    let seen = vantage.observes(*src, *dst);
                    if *last_leg && !*dropped {
                        if let Some((sender, kind)) = senders.get(msg) {
                            if *kind != MessageKind::Cover {
                                deliveries.push(TrueDelivery {
                                    msg: *msg,
                                    sender: *sender,
                                    receiver: *dst,
                                    observation: seen.then_some(view_index),
                                    arrive: *arrive,
                                });
                            }
                        }
                    }
                    if seen {
                        view_index += 1;
                    }
                }
                _ => {}
            }
        }
        GroundTruth { deliveries }
    }
}
