use serde::{Deserialize, Serialize};

use super::state::ReputationBucket;
use super::{AnonAddress, AssetSpec, EnergyKind, OfferId, ProsumerId, Side, Slot, TimeInterval, TokenId, TradeId};

/// Flat tariff used for billing grid imports and exports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PricePolicy {
    /// Cents per watt-slot drawn from the grid.
    pub import_price: u64,
    /// Cents per watt-slot fed into the grid.
    pub export_credit: u64,
}

/// Ring-signed payment authorization for an accept.
///
/// `signature` is an encoded Ristretto ring signature over
/// [`spend_message`](super::spend_message) whose ring contains the buyer's
/// address. `ownership` is a one-member signature by the buyer carrying the
/// same key image, which ties the spend to the debited address. The unspent
/// remainder moves to `change`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpendAuth {
    pub signature: String,
    pub ownership: String,
    pub change: AnonAddress,
}

/// One ledger mutation. Field order is the canonical serialization order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LedgerEvent {
    RegisterProsumer {
        prosumer: ProsumerId,
        max_generation: u64,
        max_consumption: u64,
    },
    SetPricePolicy {
        policy: PricePolicy,
        slot: Slot,
    },
    IssueFunds {
        to: AnonAddress,
        amount: u64,
        slot: Slot,
    },
    WithdrawEnergy {
        token: TokenId,
        prosumer: ProsumerId,
        kind: EnergyKind,
        power: u64,
        interval: TimeInterval,
        target: AnonAddress,
        slot: Slot,
    },
    PostOffer {
        offer: OfferId,
        side: Side,
        spec: AssetSpec,
        unit_price: u64,
        poster: AnonAddress,
        backing: Option<TokenId>,
        escrow: u64,
        reputation: Option<ReputationBucket>,
        slot: Slot,
    },
    AcceptOffer {
        offer: OfferId,
        trade: TradeId,
        buyer: AnonAddress,
        seller: AnonAddress,
        token: TokenId,
        spec: AssetSpec,
        escrow: u64,
        spend: Option<SpendAuth>,
        slot: Slot,
    },
    SplitAsset {
        token: TokenId,
        holder: AnonAddress,
        power_part: u64,
        interval_part: TimeInterval,
        first: TokenId,
        second: TokenId,
        slot: Slot,
    },
    FinalizeTrade {
        trade: TradeId,
        by: AnonAddress,
        slot: Slot,
    },
    RecordTransfer {
        trade: TradeId,
        measured: Vec<u64>,
        slot: Slot,
    },
    SettleTrade {
        trade: TradeId,
        seller: AnonAddress,
        /// Receives the refund: the change address of a ring-signed
        /// purchase, otherwise the buyer.
        refund_to: AnonAddress,
        to_seller: u64,
        refund: u64,
        slot: Slot,
    },
    UpdateReputation {
        prosumer: ProsumerId,
        delivered: u64,
        promised: u64,
        score: f64,
        slot: Slot,
    },
    ExpireOffer {
        offer: OfferId,
        slot: Slot,
    },
}

impl LedgerEvent {
    pub fn slot(&self) -> Option<Slot> {
        use LedgerEvent::*;
        match self {
            RegisterProsumer { .. } => None,
            SetPricePolicy { slot, .. }
            | IssueFunds { slot, .. }
            | WithdrawEnergy { slot, .. }
            | PostOffer { slot, .. }
            | AcceptOffer { slot, .. }
            | SplitAsset { slot, .. }
            | FinalizeTrade { slot, .. }
            | RecordTransfer { slot, .. }
            | SettleTrade { slot, .. }
            | UpdateReputation { slot, .. }
            | ExpireOffer { slot, .. } => Some(*slot),
        }
    }

    /// The serialized `type` tag.
    pub fn kind_name(&self) -> &'static str {
        use LedgerEvent::*;
        match self {
            RegisterProsumer { .. } => "register_prosumer",
            SetPricePolicy { .. } => "set_price_policy",
            IssueFunds { .. } => "issue_funds",
            WithdrawEnergy { .. } => "withdraw_energy",
            PostOffer { .. } => "post_offer",
            AcceptOffer { .. } => "accept_offer",
            SplitAsset { .. } => "split_asset",
            FinalizeTrade { .. } => "finalize_trade",
            RecordTransfer { .. } => "record_transfer",
            SettleTrade { .. } => "settle_trade",
            UpdateReputation { .. } => "update_reputation",
            ExpireOffer { .. } => "expire_offer",
        }
    }

    pub fn trade(&self) -> Option<TradeId> {
        use LedgerEvent::*;
        match self {
            AcceptOffer { trade, .. }
            | FinalizeTrade { trade, .. }
            | RecordTransfer { trade, .. }
            | SettleTrade { trade, .. } => Some(*trade),
            _ => None,
        }
    }

    /// Addresses this event was authored by or is addressed to.
    pub fn addresses(&self) -> Vec<&AnonAddress> {
        use LedgerEvent::*;
        match self {
            IssueFunds { to, .. } => vec![to],
            WithdrawEnergy { target, .. } => vec![target],
            PostOffer { poster, .. } => vec![poster],
            AcceptOffer { buyer, seller, spend, .. } => {
                let mut v = vec![buyer, seller];
                if let Some(s) = spend {
                    v.push(&s.change);
                }
                v
            }
            SplitAsset { holder, .. } => vec![holder],
            FinalizeTrade { by, .. } => vec![by],
            SettleTrade { seller, refund_to, .. } => vec![seller, refund_to],
            RegisterProsumer { .. }
            | SetPricePolicy { .. }
            | RecordTransfer { .. }
            | UpdateReputation { .. }
            | ExpireOffer { .. } => vec![],
        }
    }
}
