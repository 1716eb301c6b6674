//! Energy and fiat asset ledger.
//!
//! All mutations are [`LedgerEvent`]s appended to one ordered log.
//! [`LedgerState`] is a fold over that log, so replaying the log from
//! genesis rebuilds it exactly. [`Ledger`] wraps the log with the
//! operations prosumers and the DSO perform.

mod bill;
mod event;
mod invariants;
mod log;
mod ops;
mod state;

pub use bill::{compute_bill, BillingIdentity};
pub use event::{LedgerEvent, PricePolicy, SpendAuth};
pub use invariants::{check_invariants, InvariantReport, InvariantViolation};
pub use log::{read_log, write_log, write_log_stamped, LogError, LOG_SCHEMA};
pub use ops::{spend_message, Ledger, Notification};
pub use state::{
    DeadlineViolation, LedgerConfig, LedgerState, Offer, OfferState, ProsumerRecord, ReputationBucket, Trade,
    Transfer, DEFAULT_CLEARING_DEADLINE, REPUTATION_ALPHA,
};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Pseudonymous account. In practice the hex encoding of a one-time public key.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnonAddress(pub String);

impl AnonAddress {
    pub fn new(s: impl Into<String>) -> Self {
        AnonAddress(s.into())
    }
}

impl fmt::Display for AnonAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Real identity of a prosumer, known to the DSO only.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProsumerId(pub u32);

macro_rules! id_type {
    ($($name:ident),*) => {$(
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u64);
    )*};
}

id_type!(TokenId, OfferId, TradeId);

/// Trading slot index.
pub type Slot = u64;

/// Inclusive slot range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TimeInterval {
    pub start: Slot,
    pub end: Slot,
}

impl TimeInterval {
    pub fn new(start: Slot, end: Slot) -> Result<Self, LedgerError> {
        if start > end {
            return Err(LedgerError::InvalidInterval { start, end });
        }
        Ok(TimeInterval { start, end })
    }

    pub fn slots(&self) -> std::ops::RangeInclusive<Slot> {
        self.start..=self.end
    }

    pub fn len(&self) -> u64 {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, other: &TimeInterval) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyKind {
    Production,
    Consumption,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Sell a held energy token.
    Ask,
    /// Buy energy; funds are escrowed when posted.
    Bid,
}

/// Kind, power in watts and validity interval of a traded token.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetSpec {
    pub kind: EnergyKind,
    pub power: u64,
    pub interval: TimeInterval,
}

/// Quantized energy token. Power is in whole watts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyAsset {
    pub id: TokenId,
    pub kind: EnergyKind,
    pub power: u64,
    pub interval: TimeInterval,
    pub holder: AnonAddress,
    /// Issuing prosumer, visible to the DSO only.
    pub origin: ProsumerId,
}

impl EnergyAsset {
    pub fn spec(&self) -> AssetSpec {
        AssetSpec { kind: self.kind, power: self.power, interval: self.interval }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LedgerError {
    #[error("prosumer {0:?} is not registered")]
    UnknownProsumer(ProsumerId),
    #[error("prosumer {0:?} is already registered")]
    DuplicateProsumer(ProsumerId),
    #[error("interval start {start} is after end {end}")]
    InvalidInterval { start: Slot, end: Slot },
    #[error("prosumer {prosumer:?} would schedule {scheduled} W in slot {slot}, capacity {capacity} W")]
    CapacityExceeded { prosumer: ProsumerId, slot: Slot, scheduled: u64, capacity: u64 },
    #[error("poster holds no unlocked token matching the ask")]
    UnbackedAsk,
    #[error("unit price must not be negative")]
    NegativePrice,
    #[error("offer {0:?} does not exist")]
    OfferUnknown(OfferId),
    #[error("offer {0:?} is not open")]
    OfferNotOpen(OfferId),
    #[error("need {need} cents, address holds {have}")]
    InsufficientFunds { need: u64, have: u64 },
    #[error("key image already spent in {prior}")]
    DoubleSpend { prior: String },
    #[error("spend authorization rejected: {0}")]
    InvalidSpend(&'static str),
    #[error("token {0:?} does not exist")]
    TokenUnknown(TokenId),
    #[error("token {0:?} is locked by an open offer")]
    TokenLocked(TokenId),
    #[error("address does not hold token {0:?}")]
    NotHolder(TokenId),
    #[error("split does not partition the token")]
    NotSubdividable,
    #[error("trade {0:?} does not exist")]
    TradeUnknown(TradeId),
    #[error("trade {0:?} is already cleared")]
    AlreadyCleared(TradeId),
    #[error("trade interval ends at slot {end}, current slot {now}")]
    IntervalNotElapsed { end: Slot, now: Slot },
    #[error("expected {expected} per-slot measurements, got {got}")]
    InvalidMeasurement { expected: u64, got: usize },
    #[error("trade {0:?} has no recorded energy transfer")]
    NotDelivered(TradeId),
    #[error("trade {0:?} is already settled")]
    AlreadySettled(TradeId),
    #[error("no price policy is recorded")]
    PolicyMissing,
    #[error("billing window ends at slot {end}, current slot {now}")]
    WindowNotElapsed { end: Slot, now: Slot },
    #[error("fulfillment ratio {0} outside [0, 1]")]
    InvalidRatio(f64),
    #[error("amount overflows u64")]
    Overflow,
    #[error("event disagrees with derived state: {0}")]
    InconsistentEvent(&'static str),
}
