use super::event::{LedgerEvent, PricePolicy, SpendAuth};
use super::state::{
    fulfillment_ratio, settlement_split, smoothed, trade_cost, DeadlineViolation, LedgerConfig,
    LedgerState, Offer, OfferState, ReputationBucket, Trade,
};
use super::{
    AnonAddress, AssetSpec, EnergyAsset, EnergyKind, LedgerError, OfferId, ProsumerId, Side, Slot,
    TimeInterval, TokenId, TradeId,
};
use crate::ringsig::tagged_hash;

/// Asynchronous notices for off-ledger delivery.
#[derive(Clone, Debug, PartialEq)]
pub enum Notification {
    OfferPosted(Offer),
    TradeCreated(TradeId),
}

/// Message a buyer ring-signs to authorize payment for `offer`.
pub fn spend_message(offer: OfferId, buyer: &AnonAddress, change: &AnonAddress, slot: Slot) -> Vec<u8> {
    tagged_hash(
        b"microgrid/ledger/spend/v1",
        &[&offer.0.to_be_bytes(), buyer.0.as_bytes(), change.0.as_bytes(), &slot.to_be_bytes()],
    )
    .to_vec()
}

/// Single-writer ledger: the event log plus its derived state.
#[derive(Clone, Debug)]
pub struct Ledger {
    events: Vec<LedgerEvent>,
    state: LedgerState,
    outbox: Vec<Notification>,
}

impl Default for Ledger {
    fn default() -> Self {
        Self::new(LedgerConfig::default())
    }
}

impl Ledger {
    pub fn new(config: LedgerConfig) -> Self {
        Ledger { events: Vec::new(), state: LedgerState::new(config), outbox: Vec::new() }
    }

    /// Rebuilds a ledger by applying `events` from genesis.
    pub fn replay(config: LedgerConfig, events: &[LedgerEvent]) -> Result<Self, (usize, LedgerError)> {
        let mut ledger = Ledger::new(config);
        for (i, e) in events.iter().enumerate() {
            ledger.append(e.clone()).map_err(|err| (i, err))?;
        }
        ledger.outbox.clear();
        Ok(ledger)
    }

    pub fn config(&self) -> LedgerConfig {
        self.state.config
    }

    pub fn events(&self) -> &[LedgerEvent] {
        &self.events
    }

    pub fn state(&self) -> &LedgerState {
        &self.state
    }

    pub fn take_notifications(&mut self) -> Vec<Notification> {
        std::mem::take(&mut self.outbox)
    }

    /// Applies and records `event`. Rejected events leave no trace.
    pub fn append(&mut self, event: LedgerEvent) -> Result<(), LedgerError> {
        self.state.apply(&event)?;
        self.events.push(event);
        Ok(())
    }

    pub fn register_prosumer(
        &mut self,
        prosumer: ProsumerId,
        max_generation: u64,
        max_consumption: u64,
    ) -> Result<(), LedgerError> {
        self.append(LedgerEvent::RegisterProsumer { prosumer, max_generation, max_consumption })
    }

    pub fn set_price_policy(&mut self, policy: PricePolicy, slot: Slot) -> Result<(), LedgerError> {
        self.append(LedgerEvent::SetPricePolicy { policy, slot })
    }

    /// DSO issuance of fiat to an address.
    pub fn issue_funds(&mut self, to: AnonAddress, amount: u64, slot: Slot) -> Result<(), LedgerError> {
        self.append(LedgerEvent::IssueFunds { to, amount, slot })
    }

    /// DSO-validated issuance of an energy token to an anonymous address.
    pub fn withdraw_energy_asset(
        &mut self,
        prosumer: ProsumerId,
        kind: EnergyKind,
        power: u64,
        interval: TimeInterval,
        target: AnonAddress,
        slot: Slot,
    ) -> Result<EnergyAsset, LedgerError> {
        let token = TokenId(self.state.next_token);
        self.append(LedgerEvent::WithdrawEnergy { token, prosumer, kind, power, interval, target, slot })?;
        Ok(self.state.tokens[&token].clone())
    }

    pub fn post_offer(
        &mut self,
        poster: AnonAddress,
        side: Side,
        spec: AssetSpec,
        unit_price: i64,
        slot: Slot,
    ) -> Result<Offer, LedgerError> {
        let unit_price = u64::try_from(unit_price).map_err(|_| LedgerError::NegativePrice)?;
        let offer = OfferId(self.state.next_offer);
        let (backing, escrow, reputation) = match side {
            Side::Ask => {
                let token = self.state.find_backing(&poster, &spec).ok_or(LedgerError::UnbackedAsk)?;
                let origin = self.state.tokens[&token].origin;
                let score = self.state.prosumers.get(&origin).map(|p| p.reputation).unwrap_or(1.0);
                (Some(token), 0, Some(ReputationBucket::of(score)))
            }
            Side::Bid => (None, trade_cost(&spec, unit_price)?, None),
        };
        self.append(LedgerEvent::PostOffer {
            offer,
            side,
            spec,
            unit_price,
            poster,
            backing,
            escrow,
            reputation,
            slot,
        })?;
        let posted = self.state.offers[&offer].clone();
        self.outbox.push(Notification::OfferPosted(posted.clone()));
        Ok(posted)
    }

    /// Accepts an open offer. For an ask the acceptor pays; for a bid the
    /// acceptor supplies a matching token.
    pub fn accept_offer(
        &mut self,
        acceptor: AnonAddress,
        offer_id: OfferId,
        spend: Option<SpendAuth>,
        slot: Slot,
    ) -> Result<Trade, LedgerError> {
        let offer = self.state.offers.get(&offer_id).ok_or(LedgerError::OfferUnknown(offer_id))?;
        if offer.state != OfferState::Open {
            return Err(LedgerError::OfferNotOpen(offer_id));
        }
        let escrow = trade_cost(&offer.spec, offer.unit_price)?;
        let (buyer, seller, token) = match offer.side {
            Side::Ask => (acceptor, offer.poster.clone(), offer.backing.ok_or(LedgerError::UnbackedAsk)?),
            Side::Bid => {
                let token = self.state.find_backing(&acceptor, &offer.spec).ok_or(LedgerError::UnbackedAsk)?;
                (offer.poster.clone(), acceptor, token)
            }
        };
        let trade = TradeId(self.state.next_trade);
        let spec = offer.spec;
        self.append(LedgerEvent::AcceptOffer {
            offer: offer_id,
            trade,
            buyer,
            seller,
            token,
            spec,
            escrow,
            spend,
            slot,
        })?;
        self.outbox.push(Notification::TradeCreated(trade));
        Ok(self.state.trades[&trade].clone())
    }

    /// Open asks matching `spec`, best first: lowest price, then earliest
    /// post, then lowest offer id.
    pub fn matching_asks(&self, spec: &AssetSpec) -> Vec<&Offer> {
        let mut asks: Vec<&Offer> = self
            .state
            .offers
            .values()
            .filter(|o| o.state == OfferState::Open && o.side == Side::Ask && o.spec == *spec)
            .collect();
        asks.sort_by_key(|o| (o.unit_price, o.posted_slot, o.id));
        asks
    }

    /// Accepts the best open ask for `spec` under price-time priority.
    pub fn accept_best(
        &mut self,
        acceptor: AnonAddress,
        spec: &AssetSpec,
        spend: Option<SpendAuth>,
        slot: Slot,
    ) -> Result<Trade, LedgerError> {
        let best = self.matching_asks(spec).first().map(|o| o.id).ok_or(LedgerError::UnbackedAsk)?;
        self.accept_offer(acceptor, best, spend, slot)
    }

    pub fn split_asset(
        &mut self,
        holder: AnonAddress,
        token: TokenId,
        power_part: u64,
        interval_part: TimeInterval,
        slot: Slot,
    ) -> Result<(EnergyAsset, EnergyAsset), LedgerError> {
        let first = TokenId(self.state.next_token);
        let second = TokenId(self.state.next_token + 1);
        self.append(LedgerEvent::SplitAsset { token, holder, power_part, interval_part, first, second, slot })?;
        Ok((self.state.tokens[&first].clone(), self.state.tokens[&second].clone()))
    }

    /// Seller's confirmation that both legs are in place; this is the
    /// clearing point of the trade.
    pub fn finalize_trade(&mut self, by: AnonAddress, trade: TradeId, slot: Slot) -> Result<(), LedgerError> {
        self.append(LedgerEvent::FinalizeTrade { trade, by, slot })
    }

    /// Records metered delivery and updates the seller's reputation.
    /// Returns the fulfillment ratio.
    pub fn record_energy_transfer(
        &mut self,
        trade: TradeId,
        measured: Vec<u64>,
        slot: Slot,
    ) -> Result<f64, LedgerError> {
        self.append(LedgerEvent::RecordTransfer { trade, measured, slot })?;
        let t = &self.state.trades[&trade];
        let transfer = t.transfer.as_ref().expect("just recorded");
        let (delivered, promised, origin) = (transfer.delivered, transfer.promised, t.origin);
        let ratio = fulfillment_ratio(delivered, promised);
        if let Some(p) = self.state.prosumers.get(&origin) {
            let score = smoothed(p.reputation, ratio);
            self.append(LedgerEvent::UpdateReputation { prosumer: origin, delivered, promised, score, slot })?;
        }
        Ok(ratio)
    }

    /// Releases escrow to the seller in proportion to fulfillment and
    /// refunds the rest. Returns `(to_seller, refund)`.
    pub fn settle_financial(&mut self, trade: TradeId, slot: Slot) -> Result<(u64, u64), LedgerError> {
        let t = self.state.trades.get(&trade).ok_or(LedgerError::TradeUnknown(trade))?;
        let transfer = t.transfer.as_ref().ok_or(LedgerError::NotDelivered(trade))?;
        let (to_seller, refund) = settlement_split(t.escrow, transfer.delivered, transfer.promised);
        let (seller, refund_to) = (t.seller.clone(), t.refund_to.clone());
        self.append(LedgerEvent::SettleTrade { trade, seller, refund_to, to_seller, refund, slot })?;
        Ok((to_seller, refund))
    }

    /// Standalone reputation update from an externally computed ratio.
    pub fn update_reputation(&mut self, prosumer: ProsumerId, ratio: f64, slot: Slot) -> Result<f64, LedgerError> {
        if !(0.0..=1.0).contains(&ratio) {
            return Err(LedgerError::InvalidRatio(ratio));
        }
        // encode the ratio exactly as delivered/promised over a fixed scale
        const SCALE: u64 = 1 << 52;
        let delivered = (ratio * SCALE as f64) as u64;
        let p = self.state.prosumers.get(&prosumer).ok_or(LedgerError::UnknownProsumer(prosumer))?;
        let score = smoothed(p.reputation, fulfillment_ratio(delivered, SCALE));
        self.append(LedgerEvent::UpdateReputation { prosumer, delivered, promised: SCALE, score, slot })?;
        Ok(score)
    }

    /// Expires open offers whose interval has started.
    pub fn expire_offers(&mut self, now: Slot) -> Result<Vec<OfferId>, LedgerError> {
        let due: Vec<OfferId> = self
            .state
            .offers
            .values()
            .filter(|o| o.state == OfferState::Open && o.spec.interval.start <= now)
            .map(|o| o.id)
            .collect();
        for offer in &due {
            self.append(LedgerEvent::ExpireOffer { offer: *offer, slot: now })?;
        }
        Ok(due)
    }

    pub fn check_clearing_deadlines(&self, now: Slot) -> Vec<DeadlineViolation> {
        self.state.deadline_violations(now)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ringsig::{encode_signature, sig, Group, KeyPair, RingConfig, Ristretto};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn addr(s: &str) -> AnonAddress {
        AnonAddress::new(s)
    }

    fn iv(a: u64, b: u64) -> TimeInterval {
        TimeInterval::new(a, b).unwrap()
    }

    fn spec(power: u64, a: u64, b: u64) -> AssetSpec {
        AssetSpec { kind: EnergyKind::Production, power, interval: iv(a, b) }
    }

    fn market() -> Ledger {
        let mut l = Ledger::default();
        l.register_prosumer(ProsumerId(1), 500, 500).unwrap();
        l.register_prosumer(ProsumerId(2), 500, 500).unwrap();
        l
    }

    /// Sums per-slot power for one prosumer from the withdraw events.
    fn per_slot_oracle(events: &[LedgerEvent], who: ProsumerId, slot: u64) -> u64 {
        events
            .iter()
            .filter_map(|e| match e {
                LedgerEvent::WithdrawEnergy { prosumer, power, interval, kind: EnergyKind::Production, .. }
                    if *prosumer == who && interval.slots().contains(&slot) =>
                {
                    Some(*power)
                }
                _ => None,
            })
            .sum()
    }

    #[test]
    fn withdraw_respects_per_slot_capacity() {
        let mut l = market();
        l.withdraw_energy_asset(ProsumerId(1), EnergyKind::Production, 300, iv(10, 20), addr("a"), 0)
            .unwrap();
        let err = l
            .withdraw_energy_asset(ProsumerId(1), EnergyKind::Production, 300, iv(15, 25), addr("b"), 0)
            .unwrap_err();
        assert_eq!(
            err,
            LedgerError::CapacityExceeded { prosumer: ProsumerId(1), slot: 15, scheduled: 600, capacity: 500 }
        );
        // oracle: the first offending slot is the first slot where the sum would exceed capacity
        let first_bad = (15..=25).find(|s| per_slot_oracle(l.events(), ProsumerId(1), *s) + 300 > 500);
        assert_eq!(first_bad, Some(15));
        // non-overlapping interval is fine
        l.withdraw_energy_asset(ProsumerId(1), EnergyKind::Production, 300, iv(21, 25), addr("b"), 0)
            .unwrap();
        let zero = l
            .withdraw_energy_asset(ProsumerId(1), EnergyKind::Production, 0, iv(5, 5), addr("c"), 0)
            .unwrap();
        assert_eq!(zero.power, 0);
        assert_eq!(
            l.withdraw_energy_asset(ProsumerId(9), EnergyKind::Production, 1, iv(1, 1), addr("c"), 0),
            Err(LedgerError::UnknownProsumer(ProsumerId(9)))
        );
    }

    #[test]
    fn offer_accept_escrow_balances() {
        let mut l = market();
        l.withdraw_energy_asset(ProsumerId(1), EnergyKind::Production, 300, iv(10, 20), addr("s"), 0)
            .unwrap();
        l.issue_funds(addr("b"), 10_000, 0).unwrap();
        let offer = l.post_offer(addr("s"), Side::Ask, spec(300, 10, 20), 2, 1).unwrap();
        assert_eq!(l.take_notifications(), vec![Notification::OfferPosted(offer.clone())]);
        assert_eq!(offer.reputation, Some(ReputationBucket::High));
        let trade = l.accept_offer(addr("b"), offer.id, None, 2).unwrap();
        assert_eq!(trade.escrow, 6600);
        assert_eq!(l.state().balance(&addr("b")), 3400);
        assert_eq!(l.state().tokens[&trade.token].holder, addr("b"));
        assert_eq!(l.accept_offer(addr("c"), offer.id, None, 2), Err(LedgerError::OfferNotOpen(offer.id)));
    }

    #[test]
    fn rejected_posts_and_accepts() {
        let mut l = market();
        assert_eq!(l.post_offer(addr("x"), Side::Ask, spec(300, 10, 20), 2, 0), Err(LedgerError::UnbackedAsk));
        l.withdraw_energy_asset(ProsumerId(1), EnergyKind::Production, 300, iv(10, 20), addr("s"), 0)
            .unwrap();
        assert_eq!(l.post_offer(addr("s"), Side::Ask, spec(300, 10, 20), -1, 0), Err(LedgerError::NegativePrice));
        let o = l.post_offer(addr("s"), Side::Ask, spec(300, 10, 20), 2, 0).unwrap();
        // the token is locked by the first ask
        assert_eq!(l.post_offer(addr("s"), Side::Ask, spec(300, 10, 20), 1, 0), Err(LedgerError::UnbackedAsk));
        assert_eq!(
            l.accept_offer(addr("poor"), o.id, None, 1),
            Err(LedgerError::InsufficientFunds { need: 6600, have: 0 })
        );
        let before = l.events().len();
        assert!(l.accept_offer(addr("poor"), OfferId(99), None, 1).is_err());
        assert_eq!(l.events().len(), before);
    }

    #[test]
    fn price_time_priority_with_id_tiebreak() {
        let mut l = market();
        for (who, p) in [("s1", ProsumerId(1)), ("s2", ProsumerId(2)), ("s3", ProsumerId(1))] {
            l.withdraw_energy_asset(p, EnergyKind::Production, 100, iv(10, 10), addr(who), 0).unwrap();
        }
        let a = l.post_offer(addr("s1"), Side::Ask, spec(100, 10, 10), 3, 1).unwrap();
        let b = l.post_offer(addr("s2"), Side::Ask, spec(100, 10, 10), 2, 1).unwrap();
        let c = l.post_offer(addr("s3"), Side::Ask, spec(100, 10, 10), 2, 1).unwrap();
        let order: Vec<OfferId> = l.matching_asks(&spec(100, 10, 10)).iter().map(|o| o.id).collect();
        assert_eq!(order, vec![b.id, c.id, a.id]);
        l.issue_funds(addr("buyer"), 1000, 1).unwrap();
        let t = l.accept_best(addr("buyer"), &spec(100, 10, 10), None, 2).unwrap();
        assert_eq!(t.offer, b.id);
        // replaying the log resolves identically
        let replayed = Ledger::replay(l.config(), l.events()).unwrap();
        assert_eq!(replayed.state().digest(), l.state().digest());
    }

    #[test]
    fn bids_escrow_at_post() {
        let mut l = market();
        l.issue_funds(addr("b"), 500, 0).unwrap();
        let bid = l.post_offer(addr("b"), Side::Bid, spec(100, 3, 4), 2, 0).unwrap();
        assert_eq!(l.state().balance(&addr("b")), 100);
        assert_eq!(
            l.post_offer(addr("b"), Side::Bid, spec(100, 3, 4), 2, 0),
            Err(LedgerError::InsufficientFunds { need: 400, have: 100 })
        );
        assert_eq!(l.accept_offer(addr("s"), bid.id, None, 1), Err(LedgerError::UnbackedAsk));
        l.withdraw_energy_asset(ProsumerId(2), EnergyKind::Production, 100, iv(3, 4), addr("s"), 0)
            .unwrap();
        let t = l.accept_offer(addr("s"), bid.id, None, 1).unwrap();
        assert_eq!((t.buyer.clone(), t.seller.clone(), t.escrow), (addr("b"), addr("s"), 400));
        assert_eq!(l.state().escrowed(), 400);
    }

    #[test]
    fn expiry_unlocks_and_refunds() {
        let mut l = market();
        l.issue_funds(addr("b"), 500, 0).unwrap();
        l.post_offer(addr("b"), Side::Bid, spec(100, 3, 4), 2, 0).unwrap();
        l.withdraw_energy_asset(ProsumerId(2), EnergyKind::Production, 100, iv(5, 5), addr("s"), 0)
            .unwrap();
        l.post_offer(addr("s"), Side::Ask, spec(100, 5, 5), 2, 0).unwrap();
        assert_eq!(l.expire_offers(3).unwrap(), vec![OfferId(0)]);
        assert_eq!(l.state().balance(&addr("b")), 500);
        assert_eq!(l.expire_offers(5).unwrap(), vec![OfferId(1)]);
        assert!(l.state().locks.is_empty());
    }

    #[test]
    fn split_power_and_interval() {
        let mut l = market();
        let t = l
            .withdraw_energy_asset(ProsumerId(1), EnergyKind::Production, 300, iv(10, 20), addr("h"), 0)
            .unwrap();
        let (a, b) = l.split_asset(addr("h"), t.id, 100, iv(10, 20), 1).unwrap();
        assert_eq!((a.power, a.interval, b.power, b.interval), (100, iv(10, 20), 200, iv(10, 20)));
        let (c, d) = l.split_asset(addr("h"), b.id, 200, iv(10, 14), 1).unwrap();
        assert_eq!((c.interval, d.interval), (iv(10, 14), iv(15, 20)));
        // oracle: per-slot sum of live tokens equals the original 300 W everywhere
        for s in 10..=20 {
            let sum: u64 = l
                .state()
                .tokens
                .values()
                .filter(|t| t.interval.slots().contains(&s))
                .map(|t| t.power)
                .sum();
            assert_eq!(sum, 300, "slot {s}");
        }
        assert_eq!(l.split_asset(addr("h"), a.id, 400, iv(10, 20), 1), Err(LedgerError::NotSubdividable));
        assert_eq!(l.split_asset(addr("h"), d.id, 200, iv(16, 17), 1), Err(LedgerError::NotSubdividable));
        assert_eq!(l.split_asset(addr("h"), d.id, 200, iv(9, 17), 1), Err(LedgerError::NotSubdividable));
        assert_eq!(l.split_asset(addr("z"), d.id, 100, iv(15, 20), 1), Err(LedgerError::NotHolder(d.id)));
        assert_eq!(l.split_asset(addr("h"), t.id, 100, iv(10, 20), 1), Err(LedgerError::TokenUnknown(t.id)));
    }

    fn traded(measured_each: u64) -> (Ledger, TradeId) {
        let mut l = market();
        l.withdraw_energy_asset(ProsumerId(1), EnergyKind::Production, 300, iv(10, 20), addr("s"), 0)
            .unwrap();
        l.issue_funds(addr("b"), 10_000, 0).unwrap();
        let o = l.post_offer(addr("s"), Side::Ask, spec(300, 10, 20), 2, 1).unwrap();
        let t = l.accept_offer(addr("b"), o.id, None, 2).unwrap();
        l.finalize_trade(addr("s"), t.id, 3).unwrap();
        assert_eq!(l.record_energy_transfer(t.id, vec![measured_each; 11], 20), Err(LedgerError::IntervalNotElapsed { end: 20, now: 20 }));
        let ratio = l.record_energy_transfer(t.id, vec![measured_each; 11], 21).unwrap();
        assert_eq!(ratio, measured_each.min(300) as f64 / 300.0);
        (l, t.id)
    }

    #[test]
    fn full_delivery_settles_everything_to_seller() {
        let (mut l, t) = traded(300);
        assert_eq!(l.settle_financial(t, 21).unwrap(), (6600, 0));
        assert_eq!(l.state().balance(&addr("s")), 6600);
        assert_eq!(l.state().prosumers[&ProsumerId(1)].reputation, 1.0);
        assert_eq!(l.settle_financial(t, 22), Err(LedgerError::AlreadySettled(t)));
    }

    #[test]
    fn half_delivery_splits_escrow_and_conserves_fiat() {
        let (mut l, t) = traded(150);
        assert_eq!(l.settle_financial(t, 21).unwrap(), (3300, 3300));
        let total: u64 = l.state().balances.values().sum();
        assert_eq!(total + l.state().escrowed(), 10_000);
        assert_eq!(l.state().balance(&addr("b")), 3400 + 3300);
        let rep = l.state().prosumers[&ProsumerId(1)].reputation;
        assert!((rep - 0.95).abs() < 1e-12);
    }

    #[test]
    fn over_delivery_is_capped_at_promise() {
        let (mut l, t) = traded(400);
        assert_eq!(l.state().trades[&t].fulfillment(), Some(1.0));
        assert_eq!(l.settle_financial(t, 21).unwrap(), (6600, 0));
    }

    #[test]
    fn settle_and_record_errors() {
        let mut l = market();
        assert_eq!(l.settle_financial(TradeId(0), 1), Err(LedgerError::TradeUnknown(TradeId(0))));
        assert_eq!(
            l.record_energy_transfer(TradeId(0), vec![], 1),
            Err(LedgerError::TradeUnknown(TradeId(0)))
        );
        l.withdraw_energy_asset(ProsumerId(1), EnergyKind::Production, 10, iv(1, 2), addr("s"), 0).unwrap();
        l.issue_funds(addr("b"), 100, 0).unwrap();
        let o = l.post_offer(addr("s"), Side::Ask, spec(10, 1, 2), 1, 0).unwrap();
        let t = l.accept_offer(addr("b"), o.id, None, 0).unwrap();
        assert_eq!(l.settle_financial(t.id, 1), Err(LedgerError::NotDelivered(t.id)));
        assert_eq!(
            l.record_energy_transfer(t.id, vec![10], 3),
            Err(LedgerError::InvalidMeasurement { expected: 2, got: 1 })
        );
    }

    #[test]
    fn reputation_smoothing() {
        let mut l = market();
        assert_eq!(l.update_reputation(ProsumerId(1), 1.0, 0).unwrap(), 1.0);
        assert!((l.update_reputation(ProsumerId(1), 0.0, 0).unwrap() - 0.9).abs() < 1e-12);
        assert_eq!(l.update_reputation(ProsumerId(1), 1.5, 0), Err(LedgerError::InvalidRatio(1.5)));
        // 0.5 is a fixed point
        let mut m = market();
        let mut score = 1.0;
        for _ in 0..2000 {
            score = m.update_reputation(ProsumerId(2), 0.5, 0).unwrap();
        }
        assert!((score - 0.5).abs() < 1e-12);
        assert!((smoothed(0.5, 0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn clearing_deadline_scan() {
        let mut l = market();
        assert!(l.check_clearing_deadlines(100).is_empty());
        for s in 0..2 {
            l.withdraw_energy_asset(ProsumerId(1), EnergyKind::Production, 10, iv(20 + s, 20 + s), addr("s"), 0)
                .unwrap();
        }
        l.issue_funds(addr("b"), 1000, 0).unwrap();
        let o1 = l.post_offer(addr("s"), Side::Ask, spec(10, 20, 20), 1, 5).unwrap();
        let o2 = l.post_offer(addr("s"), Side::Ask, spec(10, 21, 21), 1, 5).unwrap();
        let t1 = l.accept_offer(addr("b"), o1.id, None, 5).unwrap();
        let t2 = l.accept_offer(addr("b"), o2.id, None, 5).unwrap();
        l.finalize_trade(addr("s"), t1.id, 6).unwrap();
        assert!(l.check_clearing_deadlines(7).is_empty());
        let v = l.check_clearing_deadlines(9);
        assert_eq!(v, vec![DeadlineViolation { trade: t2.id, posted_slot: 5, cleared_slot: None, latency: 4 }]);
        assert_eq!(l.finalize_trade(addr("s"), t1.id, 7), Err(LedgerError::AlreadyCleared(t1.id)));
    }

    fn ring_spend(
        g: &Ristretto,
        rng: &mut ChaCha20Rng,
        owner: &KeyPair<Ristretto>,
        decoys: &[KeyPair<Ristretto>],
        msg: &[u8],
    ) -> (String, String) {
        let mut ring: Vec<_> = decoys.iter().map(|k| k.public).collect();
        ring.insert(1, owner.public);
        let cfg = RingConfig::default();
        let s = sig(g, &cfg, msg, &ring, 1, &owner.secret, rng).unwrap();
        let own = sig(g, &RingConfig { min_ring_size: 1 }, msg, &[owner.public], 0, &owner.secret, rng).unwrap();
        (hex::encode(encode_signature(g, &s)), hex::encode(encode_signature(g, &own)))
    }

    #[test]
    fn ring_signed_spend_and_double_spend() {
        let g = Ristretto;
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let owner = KeyPair::generate(&g, &mut rng);
        let decoys: Vec<_> = (0..2).map(|_| KeyPair::generate(&g, &mut rng)).collect();
        let buyer = AnonAddress(hex::encode(g.encode_element(&owner.public)));
        let mut l = market();
        for s in 0..2 {
            l.withdraw_energy_asset(ProsumerId(1), EnergyKind::Production, 10, iv(5 + s, 5 + s), addr("s"), 0)
                .unwrap();
        }
        l.issue_funds(buyer.clone(), 100, 0).unwrap();
        let o1 = l.post_offer(addr("s"), Side::Ask, spec(10, 5, 5), 1, 0).unwrap();
        let o2 = l.post_offer(addr("s"), Side::Ask, spec(10, 6, 6), 1, 0).unwrap();

        let change = addr("change-1");
        let msg = spend_message(o1.id, &buyer, &change, 1);
        let (signature, ownership) = ring_spend(&g, &mut rng, &owner, &decoys, &msg);
        // tampered message is rejected
        let bad = SpendAuth { signature: signature.clone(), ownership: ownership.clone(), change: addr("other") };
        assert_eq!(
            l.accept_offer(buyer.clone(), o1.id, Some(bad), 1),
            Err(LedgerError::InvalidSpend("ring signature does not verify"))
        );
        let auth = SpendAuth { signature, ownership, change: change.clone() };
        l.accept_offer(buyer.clone(), o1.id, Some(auth), 1).unwrap();
        assert_eq!(l.state().balance(&buyer), 0);
        assert_eq!(l.state().balance(&change), 90);
        assert_eq!(l.state().key_images.len(), 1);

        // the same key again: refund the address and try a second spend
        l.issue_funds(buyer.clone(), 100, 1).unwrap();
        let change2 = addr("change-2");
        let msg2 = spend_message(o2.id, &buyer, &change2, 1);
        let (signature, ownership) = ring_spend(&g, &mut rng, &owner, &decoys, &msg2);
        let auth2 = SpendAuth { signature, ownership, change: change2 };
        assert_eq!(
            l.accept_offer(buyer, o2.id, Some(auth2), 1),
            Err(LedgerError::DoubleSpend { prior: "trade-0".into() })
        );
    }

    #[test]
    fn ring_signed_purchase_refunds_to_change() {
        let g = Ristretto;
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let owner = KeyPair::generate(&g, &mut rng);
        let decoys: Vec<_> = (0..2).map(|_| KeyPair::generate(&g, &mut rng)).collect();
        let buyer = AnonAddress(hex::encode(g.encode_element(&owner.public)));
        let mut l = market();
        l.withdraw_energy_asset(ProsumerId(1), EnergyKind::Production, 10, iv(5, 6), addr("s"), 0).unwrap();
        l.issue_funds(buyer.clone(), 100, 0).unwrap();
        let o = l.post_offer(addr("s"), Side::Ask, spec(10, 5, 6), 2, 0).unwrap();
        let change = addr("change");
        let msg = spend_message(o.id, &buyer, &change, 1);
        let (signature, ownership) = ring_spend(&g, &mut rng, &owner, &decoys, &msg);
        let t = l.accept_offer(buyer.clone(), o.id, Some(SpendAuth { signature, ownership, change: change.clone() }), 1)
            .unwrap();
        assert_eq!(l.state().trades[&t.id].refund_to, change);
        l.finalize_trade(addr("s"), t.id, 2).unwrap();
        l.record_energy_transfer(t.id, vec![5, 5], 7).unwrap();
        // 40 cents escrowed, half delivered
        assert_eq!(l.settle_financial(t.id, 7).unwrap(), (20, 20));
        assert_eq!(l.state().balance(&change), 60 + 20);
        assert_eq!(l.state().balance(&buyer), 0);
    }

    #[test]
    fn ring_member_cannot_spend_another_members_funds() {
        let g = Ristretto;
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let victim = KeyPair::generate(&g, &mut rng);
        let thief = KeyPair::generate(&g, &mut rng);
        let other = KeyPair::generate(&g, &mut rng);
        let victim_addr = AnonAddress(hex::encode(g.encode_element(&victim.public)));
        let mut l = market();
        l.withdraw_energy_asset(ProsumerId(1), EnergyKind::Production, 10, iv(5, 5), addr("s"), 0).unwrap();
        l.issue_funds(victim_addr.clone(), 100, 0).unwrap();
        let o = l.post_offer(addr("s"), Side::Ask, spec(10, 5, 5), 1, 0).unwrap();
        let change = addr("thief-change");
        let msg = spend_message(o.id, &victim_addr, &change, 1);
        let ring = [victim.public, thief.public, other.public];
        let s = sig(&g, &RingConfig::default(), &msg, &ring, 1, &thief.secret, &mut rng).unwrap();
        let own = sig(&g, &RingConfig { min_ring_size: 1 }, &msg, &[thief.public], 0, &thief.secret, &mut rng)
            .unwrap();
        let auth = SpendAuth {
            signature: hex::encode(encode_signature(&g, &s)),
            ownership: hex::encode(encode_signature(&g, &own)),
            change,
        };
        assert_eq!(
            l.accept_offer(victim_addr, o.id, Some(auth), 1),
            Err(LedgerError::InvalidSpend("ownership proof does not match"))
        );
    }
}
