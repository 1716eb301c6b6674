use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::event::{LedgerEvent, PricePolicy, SpendAuth};
use super::{
    AnonAddress, AssetSpec, EnergyAsset, EnergyKind, LedgerError, OfferId, ProsumerId, Side, Slot,
    TimeInterval, TokenId, TradeId,
};
use crate::ringsig::{decode_signature, ver, ver_with_policy, Group, KeyImageRegistry, RingConfig, Ristretto};

/// Exponential smoothing weight of the newest fulfillment ratio.
pub const REPUTATION_ALPHA: f64 = 0.1;
pub const DEFAULT_CLEARING_DEADLINE: Slot = 2;

/// Parameters fixed at genesis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerConfig {
    pub clearing_deadline: Slot,
    pub min_ring_size: usize,
}

impl Default for LedgerConfig {
    fn default() -> Self {
        LedgerConfig { clearing_deadline: DEFAULT_CLEARING_DEADLINE, min_ring_size: 3 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProsumerRecord {
    pub max_generation: u64,
    pub max_consumption: u64,
    pub reputation: f64,
}

impl ProsumerRecord {
    fn capacity(&self, kind: EnergyKind) -> u64 {
        match kind {
            EnergyKind::Production => self.max_generation,
            EnergyKind::Consumption => self.max_consumption,
        }
    }
}

/// Coarse reputation shown with asks instead of the exact score.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReputationBucket {
    Low,
    Medium,
    High,
}

impl ReputationBucket {
    pub fn of(score: f64) -> Self {
        if score < 0.5 {
            ReputationBucket::Low
        } else if score < 0.8 {
            ReputationBucket::Medium
        } else {
            ReputationBucket::High
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OfferState {
    Open,
    Matched,
    Expired,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Offer {
    pub id: OfferId,
    pub side: Side,
    pub spec: AssetSpec,
    pub unit_price: u64,
    pub poster: AnonAddress,
    pub posted_slot: Slot,
    pub state: OfferState,
    pub backing: Option<TokenId>,
    /// Funds held for an open bid.
    pub escrow: u64,
    pub reputation: Option<ReputationBucket>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transfer {
    pub measured: Vec<u64>,
    pub delivered: u64,
    pub promised: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trade {
    pub id: TradeId,
    pub offer: OfferId,
    pub seller: AnonAddress,
    pub buyer: AnonAddress,
    pub refund_to: AnonAddress,
    pub token: TokenId,
    pub spec: AssetSpec,
    pub escrow: u64,
    pub origin: ProsumerId,
    pub posted_slot: Slot,
    pub cleared_slot: Option<Slot>,
    pub transfer: Option<Transfer>,
    pub settlement: Option<(u64, u64)>,
}

impl Trade {
    /// Delivered over promised watt-slots; 1.0 for an empty promise.
    pub fn fulfillment(&self) -> Option<f64> {
        self.transfer.as_ref().map(|t| fulfillment_ratio(t.delivered, t.promised))
    }
}

pub(crate) fn fulfillment_ratio(delivered: u64, promised: u64) -> f64 {
    if promised == 0 {
        1.0
    } else {
        delivered as f64 / promised as f64
    }
}

pub(crate) fn smoothed(score: f64, ratio: f64) -> f64 {
    ((1.0 - REPUTATION_ALPHA) * score + REPUTATION_ALPHA * ratio).clamp(0.0, 1.0)
}

/// A trade whose clearing took, or is taking, longer than the deadline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DeadlineViolation {
    pub trade: TradeId,
    pub posted_slot: Slot,
    pub cleared_slot: Option<Slot>,
    pub latency: Slot,
}

pub(crate) fn trade_cost(spec: &AssetSpec, unit_price: u64) -> Result<u64, LedgerError> {
    unit_price
        .checked_mul(spec.power)
        .and_then(|v| v.checked_mul(spec.interval.len()))
        .ok_or(LedgerError::Overflow)
}

/// Derived state; a pure fold of the event log.
#[derive(Clone, Debug, PartialEq)]
pub struct LedgerState {
    pub config: LedgerConfig,
    pub prosumers: BTreeMap<ProsumerId, ProsumerRecord>,
    pub policy: Option<PricePolicy>,
    pub balances: BTreeMap<AnonAddress, u64>,
    pub tokens: BTreeMap<TokenId, EnergyAsset>,
    pub locks: BTreeMap<TokenId, OfferId>,
    pub offers: BTreeMap<OfferId, Offer>,
    pub trades: BTreeMap<TradeId, Trade>,
    pub key_images: KeyImageRegistry,
    /// DSO tally of withdrawn power per prosumer, kind and slot.
    pub scheduled: BTreeMap<(ProsumerId, EnergyKind, Slot), u64>,
    pub withdrawn: BTreeMap<(EnergyKind, Slot), u64>,
    pub retired: BTreeMap<(EnergyKind, Slot), u64>,
    pub issued: u64,
    pub next_token: u64,
    pub next_offer: u64,
    pub next_trade: u64,
}

fn consistent(ok: bool, what: &'static str) -> Result<(), LedgerError> {
    if ok {
        Ok(())
    } else {
        Err(LedgerError::InconsistentEvent(what))
    }
}

fn add_to<K: Ord>(map: &mut BTreeMap<K, u64>, key: K, amount: u64) {
    *map.entry(key).or_insert(0) += amount;
}

impl LedgerState {
    pub fn new(config: LedgerConfig) -> Self {
        LedgerState {
            config,
            prosumers: BTreeMap::new(),
            policy: None,
            balances: BTreeMap::new(),
            tokens: BTreeMap::new(),
            locks: BTreeMap::new(),
            offers: BTreeMap::new(),
            trades: BTreeMap::new(),
            key_images: KeyImageRegistry::new(),
            scheduled: BTreeMap::new(),
            withdrawn: BTreeMap::new(),
            retired: BTreeMap::new(),
            issued: 0,
            next_token: 0,
            next_offer: 0,
            next_trade: 0,
        }
    }

    pub fn balance(&self, addr: &AnonAddress) -> u64 {
        self.balances.get(addr).copied().unwrap_or(0)
    }

    /// SHA-256 over the canonical debug rendering; equal digests mean
    /// identical state down to float bit patterns.
    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(format!("{self:?}").as_bytes()).into()
    }

    /// Unlocked token held by `holder` that matches `spec`, lowest id first.
    pub fn find_backing(&self, holder: &AnonAddress, spec: &AssetSpec) -> Option<TokenId> {
        self.tokens
            .values()
            .find(|t| &t.holder == holder && t.spec() == *spec && !self.locks.contains_key(&t.id))
            .map(|t| t.id)
    }

    pub fn scheduled_power(&self, prosumer: ProsumerId, kind: EnergyKind, slot: Slot) -> u64 {
        self.scheduled.get(&(prosumer, kind, slot)).copied().unwrap_or(0)
    }

    /// Total fiat held in open bids and unsettled trades.
    pub fn escrowed(&self) -> u64 {
        let bids: u64 = self.offers.values().filter(|o| o.state == OfferState::Open).map(|o| o.escrow).sum();
        let trades: u64 = self.trades.values().filter(|t| t.settlement.is_none()).map(|t| t.escrow).sum();
        bids + trades
    }

    /// Trades over the deadline as of `now`: cleared late, or still
    /// uncleared with more than the deadline elapsed.
    pub fn deadline_violations(&self, now: Slot) -> Vec<DeadlineViolation> {
        let deadline = self.config.clearing_deadline;
        self.trades
            .values()
            .filter_map(|t| {
                let latency = match t.cleared_slot {
                    Some(c) => c - t.posted_slot,
                    None => now.saturating_sub(t.posted_slot),
                };
                (latency > deadline).then_some(DeadlineViolation {
                    trade: t.id,
                    posted_slot: t.posted_slot,
                    cleared_slot: t.cleared_slot,
                    latency,
                })
            })
            .collect()
    }

    /// Validates `event` against the current state and applies it. On error
    /// the state is unchanged.
    pub fn apply(&mut self, event: &LedgerEvent) -> Result<(), LedgerError> {
        use LedgerEvent::*;
        match event {
            RegisterProsumer { prosumer, max_generation, max_consumption } => {
                if self.prosumers.contains_key(prosumer) {
                    return Err(LedgerError::DuplicateProsumer(*prosumer));
                }
                self.prosumers.insert(
                    *prosumer,
                    ProsumerRecord {
                        max_generation: *max_generation,
                        max_consumption: *max_consumption,
                        reputation: 1.0,
                    },
                );
            }
            SetPricePolicy { policy, .. } => self.policy = Some(*policy),
            IssueFunds { to, amount, .. } => {
                let issued = self.issued.checked_add(*amount).ok_or(LedgerError::Overflow)?;
                self.balance(to).checked_add(*amount).ok_or(LedgerError::Overflow)?;
                self.issued = issued;
                add_to(&mut self.balances, to.clone(), *amount);
            }
            WithdrawEnergy { token, prosumer, kind, power, interval, target, .. } => {
                self.apply_withdraw(*token, *prosumer, *kind, *power, *interval, target)?
            }
            PostOffer { offer, side, spec, unit_price, poster, backing, escrow, reputation, slot } => {
                consistent(offer.0 == self.next_offer, "offer id is not the next id")?;
                TimeInterval::new(spec.interval.start, spec.interval.end)?;
                let cost = trade_cost(spec, *unit_price)?;
                match side {
                    Side::Ask => {
                        let t = backing.and_then(|b| self.tokens.get(&b)).ok_or(LedgerError::UnbackedAsk)?;
                        if &t.holder != poster || t.spec() != *spec || self.locks.contains_key(&t.id) {
                            return Err(LedgerError::UnbackedAsk);
                        }
                        consistent(*escrow == 0, "asks hold no escrow")?;
                        let score = self.prosumers.get(&t.origin).map(|p| p.reputation).unwrap_or(1.0);
                        consistent(*reputation == Some(ReputationBucket::of(score)), "reputation bucket")?;
                        self.locks.insert(t.id, *offer);
                    }
                    Side::Bid => {
                        consistent(backing.is_none() && reputation.is_none(), "bids carry no token")?;
                        consistent(*escrow == cost, "bid escrow must equal its cost")?;
                        let have = self.balance(poster);
                        if have < cost {
                            return Err(LedgerError::InsufficientFunds { need: cost, have });
                        }
                        self.balances.insert(poster.clone(), have - cost);
                    }
                }
                self.offers.insert(
                    *offer,
                    Offer {
                        id: *offer,
                        side: *side,
                        spec: *spec,
                        unit_price: *unit_price,
                        poster: poster.clone(),
                        posted_slot: *slot,
                        state: OfferState::Open,
                        backing: *backing,
                        escrow: *escrow,
                        reputation: *reputation,
                    },
                );
                self.next_offer += 1;
            }
            AcceptOffer { offer, trade, buyer, seller, token, spec, escrow, spend, slot } => {
                self.apply_accept(*offer, *trade, buyer, seller, *token, spec, *escrow, spend.as_ref(), *slot)?
            }
            SplitAsset { token, holder, power_part, interval_part, first, second, .. } => {
                let t = self.tokens.get(token).ok_or(LedgerError::TokenUnknown(*token))?;
                if &t.holder != holder {
                    return Err(LedgerError::NotHolder(*token));
                }
                if self.locks.contains_key(token) {
                    return Err(LedgerError::TokenLocked(*token));
                }
                consistent(
                    first.0 == self.next_token && second.0 == self.next_token + 1,
                    "split ids are not the next ids",
                )?;
                let (a, b) = split_parts(t, *power_part, *interval_part)?;
                let make = |id, (power, interval)| EnergyAsset { id, power, interval, ..t.clone() };
                let (a, b) = (make(*first, a), make(*second, b));
                self.tokens.remove(token);
                self.tokens.insert(*first, a);
                self.tokens.insert(*second, b);
                self.next_token += 2;
            }
            FinalizeTrade { trade, by, slot } => {
                let t = self.trades.get_mut(trade).ok_or(LedgerError::TradeUnknown(*trade))?;
                consistent(&t.seller == by, "only the seller finalizes")?;
                if t.cleared_slot.is_some() {
                    return Err(LedgerError::AlreadyCleared(*trade));
                }
                consistent(*slot >= t.posted_slot, "cleared before posted")?;
                t.cleared_slot = Some(*slot);
            }
            RecordTransfer { trade, measured, slot } => {
                let t = self.trades.get(trade).ok_or(LedgerError::TradeUnknown(*trade))?;
                consistent(t.transfer.is_none(), "transfer already recorded")?;
                let iv = t.spec.interval;
                if *slot <= iv.end {
                    return Err(LedgerError::IntervalNotElapsed { end: iv.end, now: *slot });
                }
                if measured.len() as u64 != iv.len() {
                    return Err(LedgerError::InvalidMeasurement { expected: iv.len(), got: measured.len() });
                }
                let power = t.spec.power;
                let delivered = measured.iter().map(|m| (*m).min(power)).sum();
                let promised = power * iv.len();
                let (kind, token) = (t.spec.kind, t.token);
                let t = self.trades.get_mut(trade).expect("checked above");
                t.transfer = Some(Transfer { measured: measured.clone(), delivered, promised });
                if self.tokens.remove(&token).is_some() {
                    for s in iv.slots() {
                        add_to(&mut self.retired, (kind, s), power);
                    }
                }
            }
            SettleTrade { trade, seller, refund_to, to_seller, refund, .. } => {
                let t = self.trades.get(trade).ok_or(LedgerError::TradeUnknown(*trade))?;
                let transfer = t.transfer.as_ref().ok_or(LedgerError::NotDelivered(*trade))?;
                if t.settlement.is_some() {
                    return Err(LedgerError::AlreadySettled(*trade));
                }
                let expected = settlement_split(t.escrow, transfer.delivered, transfer.promised);
                consistent((*to_seller, *refund) == expected, "settlement amounts")?;
                consistent(&t.seller == seller && &t.refund_to == refund_to, "settlement parties")?;
                let t = self.trades.get_mut(trade).expect("checked above");
                t.settlement = Some(expected);
                add_to(&mut self.balances, seller.clone(), *to_seller);
                add_to(&mut self.balances, refund_to.clone(), *refund);
            }
            UpdateReputation { prosumer, delivered, promised, score, .. } => {
                let p = self.prosumers.get_mut(prosumer).ok_or(LedgerError::UnknownProsumer(*prosumer))?;
                let expected = smoothed(p.reputation, fulfillment_ratio(*delivered, *promised));
                consistent(
                    expected.to_bits() == score.to_bits() && delivered <= promised,
                    "reputation score",
                )?;
                p.reputation = expected;
            }
            ExpireOffer { offer, .. } => {
                let o = self.offers.get_mut(offer).ok_or(LedgerError::OfferUnknown(*offer))?;
                if o.state != OfferState::Open {
                    return Err(LedgerError::OfferNotOpen(*offer));
                }
                o.state = OfferState::Expired;
                if let Some(b) = o.backing {
                    self.locks.remove(&b);
                }
                let (poster, refund) = (o.poster.clone(), o.escrow);
                add_to(&mut self.balances, poster, refund);
            }
        }
        Ok(())
    }

    fn apply_withdraw(
        &mut self,
        token: TokenId,
        prosumer: ProsumerId,
        kind: EnergyKind,
        power: u64,
        interval: TimeInterval,
        target: &AnonAddress,
    ) -> Result<(), LedgerError> {
        let record = self.prosumers.get(&prosumer).ok_or(LedgerError::UnknownProsumer(prosumer))?;
        TimeInterval::new(interval.start, interval.end)?;
        consistent(token.0 == self.next_token, "token id is not the next id")?;
        let capacity = record.capacity(kind);
        for slot in interval.slots() {
            let scheduled = self.scheduled_power(prosumer, kind, slot).saturating_add(power);
            if scheduled > capacity {
                return Err(LedgerError::CapacityExceeded { prosumer, slot, scheduled, capacity });
            }
        }
        for slot in interval.slots() {
            add_to(&mut self.scheduled, (prosumer, kind, slot), power);
            add_to(&mut self.withdrawn, (kind, slot), power);
        }
        self.tokens.insert(
            token,
            EnergyAsset { id: token, kind, power, interval, holder: target.clone(), origin: prosumer },
        );
        self.next_token += 1;
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn apply_accept(
        &mut self,
        offer_id: OfferId,
        trade: TradeId,
        buyer: &AnonAddress,
        seller: &AnonAddress,
        token: TokenId,
        spec: &AssetSpec,
        escrow: u64,
        spend: Option<&SpendAuth>,
        slot: Slot,
    ) -> Result<(), LedgerError> {
        consistent(trade.0 == self.next_trade, "trade id is not the next id")?;
        let offer = self.offers.get(&offer_id).ok_or(LedgerError::OfferUnknown(offer_id))?;
        if offer.state != OfferState::Open {
            return Err(LedgerError::OfferNotOpen(offer_id));
        }
        consistent(offer.spec == *spec, "accepted spec differs from the offer")?;
        let cost = trade_cost(spec, offer.unit_price)?;
        consistent(escrow == cost, "escrow must equal the offer cost")?;
        let mut image = None;
        match offer.side {
            Side::Ask => {
                consistent(&offer.poster == seller && offer.backing == Some(token), "ask parties")?;
                let have = self.balance(buyer);
                if have < cost {
                    return Err(LedgerError::InsufficientFunds { need: cost, have });
                }
                if let Some(auth) = spend {
                    if &auth.change == buyer {
                        return Err(LedgerError::InvalidSpend("change must go to a fresh address"));
                    }
                    let bytes = verify_spend(&self.config, auth, offer_id, buyer, slot)?;
                    if let Some(prior) = self.key_images.get(&bytes) {
                        return Err(LedgerError::DoubleSpend { prior: prior.to_string() });
                    }
                    image = Some(bytes);
                }
            }
            Side::Bid => {
                consistent(&offer.poster == buyer, "bid parties")?;
                if spend.is_some() {
                    return Err(LedgerError::InvalidSpend("bid acceptance carries no payment"));
                }
                let t = self.tokens.get(&token).ok_or(LedgerError::UnbackedAsk)?;
                if &t.holder != seller || t.spec() != *spec || self.locks.contains_key(&token) {
                    return Err(LedgerError::UnbackedAsk);
                }
            }
        }

        let side = offer.side;
        let origin = self.tokens.get(&token).map(|t| t.origin).ok_or(LedgerError::TokenUnknown(token))?;
        if side == Side::Ask {
            let have = self.balance(buyer);
            match spend {
                Some(auth) => {
                    self.balances.insert(buyer.clone(), 0);
                    add_to(&mut self.balances, auth.change.clone(), have - cost);
                }
                None => {
                    self.balances.insert(buyer.clone(), have - cost);
                }
            }
            if let Some(bytes) = image {
                self.key_images.check_and_insert(&bytes, &format!("trade-{}", trade.0));
            }
        }
        let o = self.offers.get_mut(&offer_id).expect("checked above");
        o.state = OfferState::Matched;
        // bid escrow moves into the trade
        o.escrow = 0;
        self.locks.remove(&token);
        self.tokens.get_mut(&token).expect("checked above").holder = buyer.clone();
        self.trades.insert(
            trade,
            Trade {
                id: trade,
                offer: offer_id,
                seller: seller.clone(),
                buyer: buyer.clone(),
                refund_to: spend.map(|a| a.change.clone()).unwrap_or_else(|| buyer.clone()),
                token,
                spec: *spec,
                escrow,
                origin,
                posted_slot: slot,
                cleared_slot: None,
                transfer: None,
                settlement: None,
            },
        );
        self.next_trade += 1;
        Ok(())
    }
}

/// `(to_seller, refund)` with the seller's share rounded down.
pub(crate) fn settlement_split(escrow: u64, delivered: u64, promised: u64) -> (u64, u64) {
    let to_seller = if promised == 0 {
        escrow
    } else {
        (escrow as u128 * delivered as u128 / promised as u128) as u64
    };
    (to_seller, escrow - to_seller)
}

/// Power and interval of one piece of a split token.
type Piece = (u64, TimeInterval);

fn split_parts(t: &EnergyAsset, power_part: u64, interval_part: TimeInterval) -> Result<(Piece, Piece), LedgerError> {
    let iv = t.interval;
    if interval_part.start > interval_part.end || !iv.contains(&interval_part) {
        return Err(LedgerError::NotSubdividable);
    }
    if interval_part == iv {
        if power_part > t.power {
            return Err(LedgerError::NotSubdividable);
        }
        return Ok(((power_part, iv), (t.power - power_part, iv)));
    }
    if power_part != t.power {
        return Err(LedgerError::NotSubdividable);
    }
    let rest = if interval_part.start == iv.start {
        TimeInterval { start: interval_part.end + 1, end: iv.end }
    } else if interval_part.end == iv.end {
        TimeInterval { start: iv.start, end: interval_part.start - 1 }
    } else {
        return Err(LedgerError::NotSubdividable);
    };
    Ok(((power_part, interval_part), (power_part, rest)))
}

/// Checks both signatures and returns the encoded key image.
fn verify_spend(
    config: &LedgerConfig,
    auth: &SpendAuth,
    offer: OfferId,
    buyer: &AnonAddress,
    slot: Slot,
) -> Result<Vec<u8>, LedgerError> {
    let g = Ristretto;
    let decode = |s: &str| {
        hex::decode(s)
            .ok()
            .and_then(|b| decode_signature(&g, &b).ok())
            .ok_or(LedgerError::InvalidSpend("malformed signature"))
    };
    let ring_sig = decode(&auth.signature)?;
    let ownership = decode(&auth.ownership)?;
    let msg = super::ops::spend_message(offer, buyer, &auth.change, slot);
    let policy = RingConfig { min_ring_size: config.min_ring_size };
    if !ver_with_policy(&g, &policy, &msg, &ring_sig) {
        return Err(LedgerError::InvalidSpend("ring signature does not verify"));
    }
    let buyer_key = hex::decode(&buyer.0).ok().and_then(|b| g.decode_element(&b));
    let buyer_key = buyer_key.ok_or(LedgerError::InvalidSpend("buyer address is not a public key"))?;
    if !ring_sig.ring.contains(&buyer_key) {
        return Err(LedgerError::InvalidSpend("ring does not contain the buyer"));
    }
    if ownership.ring != [buyer_key] || ownership.key_image != ring_sig.key_image || !ver(&g, &msg, &ownership) {
        return Err(LedgerError::InvalidSpend("ownership proof does not match"));
    }
    Ok(g.encode_element(&ring_sig.key_image.0))
}
