use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use curve25519_dalek::ristretto::RistrettoPoint;
use ed25519_dalek::SigningKey;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::metrics::compute_metrics;
use super::scenario::{Scenario, TradeSpec};
use super::trace::{MessageKind, RunHeader, TraceEvent};
use super::{NetsimError, RunOutput, TRACE_SCHEMA};
use crate::ledger::{
    spend_message, AnonAddress, AssetSpec, EnergyKind, Ledger, LedgerConfig, OfferId, PricePolicy, ProsumerId, Side,
    SpendAuth, TimeInterval, TradeId,
};
use crate::onion::{
    build_path, emit_cover_traffic, unbundle, wrap, DeliveryTarget, DestinationId, DirectoryStore, EncryptionKeypair,
    Lease, LeaseSet, OnionPacket, Payload, Peeled, RouterId, RouterInfo, RouterKeys, Tunnel, TunnelId, CELL_SIZE,
};
use crate::ringsig::{
    derive_stealth, encode_signature, recover_stealth_secret, sig, Group, KeyPair, ReceiverKeys, RingConfig, Ristretto,
};

/// What one relay saw and produced while handling a cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HopRecord {
    pub router: RouterId,
    pub received: Vec<u8>,
    /// Plaintext left after removing this hop's layer.
    pub inner: Vec<u8>,
    pub forwarded: Vec<u8>,
    pub next: RouterId,
}

/// Payloads carried end to end inside garlic cloves.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "m", rename_all = "snake_case")]
enum AppMessage {
    WithdrawRequest { demand: usize, prosumer: u32, power: u64, start: u64, end: u64, target: String },
    OfferNotice { demand: usize, offer: u64, reply_to: String },
    AcceptNotice { demand: usize, trade: u64 },
    Cover,
}

impl AppMessage {
    fn kind(&self) -> MessageKind {
        match self {
            AppMessage::WithdrawRequest { .. } => MessageKind::WithdrawRequest,
            AppMessage::OfferNotice { .. } => MessageKind::OfferNotice,
            AppMessage::AcceptNotice { .. } => MessageKind::AcceptNotice,
            AppMessage::Cover => MessageKind::Cover,
        }
    }
}

#[derive(Debug)]
enum Event {
    StartTrade(usize),
    TokenReady(usize),
    Arrive { router: RouterId, msg: u64, wire: Vec<u8>, last_leg: bool },
    Flush(RouterId),
    Finalize(usize),
    Meter(usize),
    Cover(usize),
}

struct Scheduled {
    time: u64,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

enum Inbound {
    /// Lease gateway: rewraps the bundle onto the owner's inbound tunnel.
    Gateway(Tunnel),
    /// Tunnel endpoint at the owner's router.
    Endpoint(usize),
}

struct Owned {
    keys: KeyPair<Ristretto>,
    address: AnonAddress,
    spent: bool,
}

/// A prosumer or the DSO: one router and one destination.
struct Party {
    router: RouterId,
    e2e: EncryptionKeypair,
    destination: DestinationId,
    receiver: ReceiverKeys<Ristretto>,
    wallet: Vec<Owned>,
}

#[derive(Default)]
struct DemandRun {
    token_address: Option<AnonAddress>,
    offer: Option<OfferId>,
    trade: Option<TradeId>,
}

struct Outgoing {
    to: RouterId,
    msg: u64,
    packet: OnionPacket,
    last_leg: bool,
}

pub(super) struct Simulator<'a> {
    scenario: &'a Scenario,
    rng: ChaCha20Rng,
    directory: DirectoryStore,
    routers: Vec<RouterKeys>,
    inbound: BTreeMap<(RouterId, TunnelId), Inbound>,
    parties: Vec<Party>,
    ledger: Ledger,
    queue: BinaryHeap<Reverse<Scheduled>>,
    seq: u64,
    now: u64,
    batches: BTreeMap<RouterId, Vec<Outgoing>>,
    trace: Vec<TraceEvent>,
    hops: Option<Vec<HopRecord>>,
    traced_ledger: usize,
    next_msg: u64,
    demand: Vec<TradeSpec>,
    runs: Vec<DemandRun>,
    delays: BTreeMap<usize, u64>,
    decoys: Vec<RistrettoPoint>,
    horizon: u64,
}

fn address_of(keys: &KeyPair<Ristretto>) -> AnonAddress {
    AnonAddress(hex::encode(Ristretto.encode_element(&keys.public)))
}

impl<'a> Simulator<'a> {
    pub(super) fn new(scenario: &'a Scenario, config_hash: String, record_hops: bool) -> Result<Self, NetsimError> {
        let mut rng = ChaCha20Rng::seed_from_u64(scenario.seed);
        let demand = scenario.resolve_trades(&mut rng);
        let config = LedgerConfig {
            clearing_deadline: scenario.clearing_deadline,
            min_ring_size: scenario.min_ring_size,
        };
        // leases outlive every event of the run
        let horizon = (scenario.slots + 2 * scenario.clearing_deadline + 16) * scenario.slot_ms * 4;
        let mut sim = Simulator {
            scenario,
            rng,
            directory: DirectoryStore::new(),
            routers: Vec::new(),
            inbound: BTreeMap::new(),
            parties: Vec::new(),
            ledger: Ledger::new(config),
            queue: BinaryHeap::new(),
            seq: 0,
            now: 0,
            batches: BTreeMap::new(),
            trace: Vec::new(),
            hops: record_hops.then(Vec::new),
            traced_ledger: 0,
            next_msg: 0,
            runs: demand.iter().map(|_| DemandRun::default()).collect(),
            demand,
            delays: scenario.delays.iter().map(|d| (d.trade, d.finalize_delay_slots)).collect(),
            decoys: Vec::new(),
            horizon,
        };
        sim.trace.push(TraceEvent::Header(RunHeader {
            schema: TRACE_SCHEMA.to_string(),
            seed: scenario.seed,
            config_hash,
            prosumers: scenario.prosumers,
            dso: RouterId(scenario.prosumers),
            relays: scenario.relay_routers,
            hop_count: scenario.hop_count,
            slot_ms: scenario.slot_ms,
            clearing_deadline: scenario.clearing_deadline,
            max_link_ms: scenario.latency.max_ms(),
            batching_delay_ms: scenario.batching_delay_ms,
            vantage: scenario.adversary.clone(),
        }));
        sim.setup_network()?;
        sim.setup_ledger()?;
        sim.schedule_demand()?;
        Ok(sim)
    }

    fn dso(&self) -> usize {
        self.scenario.prosumers as usize
    }

    fn setup_network(&mut self) -> Result<(), NetsimError> {
        let sc = self.scenario;
        for id in 0..sc.router_count() {
            let keys = RouterKeys::generate(RouterId(id), &mut self.rng);
            let signing = SigningKey::generate(&mut self.rng);
            let role = match id {
                i if i < sc.prosumers => "prosumer",
                i if i == sc.prosumers => "dso",
                _ => "relay",
            };
            let info = RouterInfo::signed(&keys, &signing, vec![format!("sim://{id}")], 0, role.to_string());
            self.directory.publish(info.into(), 0)?;
            self.routers.push(keys);
        }
        let mut next_tunnel = 1u32;
        for party in 0..=sc.prosumers {
            let router = RouterId(party);
            let e2e = EncryptionKeypair::generate(&mut self.rng);
            let signing = SigningKey::generate(&mut self.rng);
            let gateway = RouterId(sc.prosumers + 1 + self.rng.gen_range(0..sc.relay_routers));
            let (lease_tunnel, endpoint_tunnel) = (TunnelId(next_tunnel), TunnelId(next_tunnel + 1));
            next_tunnel += 2;
            let lease = LeaseSet::signed(
                vec![Lease { gateway, tunnel: lease_tunnel }],
                self.horizon,
                &e2e,
                &signing,
                signing.verifying_key().to_bytes(),
            );
            let target = DeliveryTarget {
                gateway: router,
                tunnel: endpoint_tunnel,
                destination: lease.destination,
                e2e_key: lease.e2e_key,
            };
            let inbound = Tunnel::through(&self.directory, &[router], target, &mut self.rng)?;
            for record in &inbound.build_records {
                self.routers[record.hop.0 as usize].accept_build(record)?;
            }
            self.inbound.insert((gateway, lease_tunnel), Inbound::Gateway(inbound));
            self.inbound.insert((router, endpoint_tunnel), Inbound::Endpoint(party as usize));
            let destination = lease.destination;
            self.directory.publish(lease.into(), 0)?;
            let receiver = ReceiverKeys::generate(&Ristretto, &mut self.rng);
            self.parties.push(Party { router, e2e, destination, receiver, wallet: Vec::new() });
        }
        Ok(())
    }

    /// Derives a one-time address for `party` and adds it to its wallet.
    fn fresh_address(&mut self, party: usize) -> Result<AnonAddress, NetsimError> {
        let g = Ristretto;
        let receiver = &self.parties[party].receiver;
        let ephemeral = g.random_scalar(&mut self.rng);
        let output = derive_stealth(&g, &receiver.address(), &ephemeral)?;
        let secret = recover_stealth_secret(&g, receiver, &output)?;
        let keys = KeyPair::from_secret(&g, secret);
        let address = address_of(&keys);
        self.decoys.push(keys.public);
        self.parties[party].wallet.push(Owned { keys, address: address.clone(), spent: false });
        Ok(address)
    }

    fn setup_ledger(&mut self) -> Result<(), NetsimError> {
        let sc = self.scenario;
        for p in 0..sc.prosumers {
            self.ledger.register_prosumer(ProsumerId(p), sc.max_generation, sc.max_consumption)?;
        }
        self.ledger.set_price_policy(PricePolicy { import_price: 3, export_credit: 1 }, 0)?;
        for p in 0..sc.prosumers as usize {
            let address = self.fresh_address(p)?;
            self.ledger.issue_funds(address, sc.initial_funds, 0)?;
        }
        // zero-value DSO outputs so every ring can be filled from genesis
        while self.decoys.len() < sc.min_ring_size + 1 {
            let address = self.fresh_address(self.dso())?;
            self.ledger.issue_funds(address, 0, 0)?;
        }
        self.sync_ledger_trace();
        Ok(())
    }

    fn schedule_demand(&mut self) -> Result<(), NetsimError> {
        let sc = self.scenario;
        for i in 0..self.demand.len() {
            let t = self.demand[i];
            let offset = self.rng.gen_range(0..(sc.slot_ms / 2).max(1));
            self.schedule(t.post_slot * sc.slot_ms + offset, Event::StartTrade(i));
            self.schedule((t.end + 1) * sc.slot_ms, Event::Meter(i));
        }
        for p in 0..sc.prosumers as usize {
            let router = self.parties[p].router;
            let emissions = emit_cover_traffic(router, sc.cover_rate, sc.slots, sc.slot_ms, &mut self.rng)?;
            for e in emissions {
                self.schedule(e.at_ms, Event::Cover(p));
            }
        }
        Ok(())
    }

    fn schedule(&mut self, time: u64, event: Event) {
        self.seq += 1;
        self.queue.push(Reverse(Scheduled { time, seq: self.seq, event }));
    }

    fn slot(&self) -> u64 {
        self.now / self.scenario.slot_ms
    }

    pub(super) fn run(mut self) -> Result<RunOutput, NetsimError> {
        while let Some(Reverse(next)) = self.queue.pop() {
            self.now = next.time;
            self.handle(next.event)?;
        }
        let final_slot = self.slot().max(self.scenario.slots);
        self.trace.push(TraceEvent::End { t: self.now, final_slot });
        let metrics = compute_metrics(&self.trace)?;
        Ok(RunOutput {
            trace: self.trace,
            ledger: self.ledger,
            metrics,
            hops: self.hops.unwrap_or_default(),
            destinations: self.parties.iter().map(|p| p.destination).collect(),
            demand: self.demand,
            demand_trades: self.runs.iter().map(|r| r.trade).collect(),
        })
    }

    fn handle(&mut self, event: Event) -> Result<(), NetsimError> {
        match event {
            Event::StartTrade(i) => self.start_trade(i),
            Event::TokenReady(i) => self.post_offer(i),
            Event::Arrive { router, msg, wire, last_leg } => self.arrive(router, msg, &wire, last_leg),
            Event::Flush(router) => {
                let mut batch = self.batches.remove(&router).unwrap_or_default();
                batch.shuffle(&mut self.rng);
                for out in batch {
                    self.emit(router, out);
                }
                Ok(())
            }
            Event::Finalize(i) => self.finalize(i),
            Event::Meter(i) => self.meter(i),
            Event::Cover(p) => {
                let n = self.scenario.prosumers;
                let to = (p as u32 + self.rng.gen_range(1..n)) % n;
                self.send(p, to as usize, AppMessage::Cover)
            }
        }
    }

    fn fail(&mut self, demand: usize, reason: String) {
        self.trace.push(TraceEvent::TradeFailed { t: self.now, demand, reason });
    }

    fn sync_ledger_trace(&mut self) {
        let now_slot = self.slot();
        for (index, e) in self.ledger.events().iter().enumerate().skip(self.traced_ledger) {
            self.trace.push(TraceEvent::LedgerAppend {
                t: self.now,
                slot: e.slot().unwrap_or(now_slot),
                index,
                kind: e.kind_name().to_string(),
                trade: e.trade().map(|t| t.0),
            });
        }
        self.traced_ledger = self.ledger.events().len();
    }

    fn start_trade(&mut self, i: usize) -> Result<(), NetsimError> {
        let t = self.demand[i];
        let seller = t.seller as usize;
        let target = self.fresh_address(seller)?;
        self.runs[i].token_address = Some(target.clone());
        let msg = AppMessage::WithdrawRequest {
            demand: i,
            prosumer: t.seller,
            power: t.power,
            start: t.start,
            end: t.end,
            target: target.0,
        };
        self.send(seller, self.dso(), msg)
    }

    fn post_offer(&mut self, i: usize) -> Result<(), NetsimError> {
        let t = self.demand[i];
        let poster = self.runs[i].token_address.clone().expect("set at start");
        let spec = AssetSpec { kind: EnergyKind::Production, power: t.power, interval: TimeInterval::new(t.start, t.end)? };
        let slot = self.slot();
        match self.ledger.post_offer(poster, Side::Ask, spec, t.unit_price as i64, slot) {
            Ok(offer) => {
                self.sync_ledger_trace();
                self.runs[i].offer = Some(offer.id);
                let reply_to = hex::encode(self.parties[t.seller as usize].destination.0);
                let msg = AppMessage::OfferNotice { demand: i, offer: offer.id.0, reply_to };
                self.send(t.seller as usize, t.buyer as usize, msg)
            }
            Err(e) => {
                self.fail(i, e.to_string());
                Ok(())
            }
        }
    }

    fn accept(&mut self, i: usize, offer: OfferId, reply_to: DestinationId) -> Result<(), NetsimError> {
        let t = self.demand[i];
        let buyer = t.buyer as usize;
        let cost = t.unit_price * t.power * (t.end - t.start + 1);
        let state = self.ledger.state();
        let funding = self.parties[buyer]
            .wallet
            .iter()
            .enumerate()
            .filter(|(_, o)| !o.spent)
            .map(|(k, o)| (state.balance(&o.address), k))
            .max();
        let Some((have, k)) = funding.filter(|(have, _)| *have >= cost) else {
            let have = funding.map(|f| f.0).unwrap_or(0);
            self.fail(i, format!("buyer holds {have} cents in one address, needs {cost}"));
            return Ok(());
        };
        debug_assert!(have >= cost);
        let change = self.fresh_address(buyer)?;
        let owned = &self.parties[buyer].wallet[k];
        let (keys, address) = (owned.keys.clone(), owned.address.clone());

        let g = Ristretto;
        let size = self.scenario.min_ring_size;
        let mut candidates: Vec<RistrettoPoint> = self.decoys.iter().copied().filter(|p| *p != keys.public).collect();
        candidates.shuffle(&mut self.rng);
        let mut ring: Vec<RistrettoPoint> = candidates.into_iter().take(size.saturating_sub(1)).collect();
        ring.push(keys.public);
        ring.shuffle(&mut self.rng);
        let signer = ring.iter().position(|p| *p == keys.public).expect("signer is in the ring");

        let slot = self.slot();
        let message = spend_message(offer, &address, &change, slot);
        let cfg = RingConfig { min_ring_size: size };
        let ring_sig = sig(&g, &cfg, &message, &ring, signer, &keys.secret, &mut self.rng)?;
        let own_cfg = RingConfig { min_ring_size: 1 };
        let ownership = sig(&g, &own_cfg, &message, &[keys.public], 0, &keys.secret, &mut self.rng)?;
        let auth = SpendAuth {
            signature: hex::encode(encode_signature(&g, &ring_sig)),
            ownership: hex::encode(encode_signature(&g, &ownership)),
            change,
        };
        match self.ledger.accept_offer(address, offer, Some(auth), slot) {
            Ok(trade) => {
                self.sync_ledger_trace();
                self.parties[buyer].wallet[k].spent = true;
                self.runs[i].trade = Some(trade.id);
                let to = self.party_of(&reply_to).ok_or(NetsimError::UnknownDestination)?;
                self.send(buyer, to, AppMessage::AcceptNotice { demand: i, trade: trade.id.0 })
            }
            Err(e) => {
                self.fail(i, e.to_string());
                Ok(())
            }
        }
    }

    fn finalize(&mut self, i: usize) -> Result<(), NetsimError> {
        let (Some(trade), Some(by)) = (self.runs[i].trade, self.runs[i].token_address.clone()) else {
            return Ok(());
        };
        let slot = self.slot();
        match self.ledger.finalize_trade(by, trade, slot) {
            Ok(()) => self.sync_ledger_trace(),
            Err(e) => self.fail(i, e.to_string()),
        }
        Ok(())
    }

    fn meter(&mut self, i: usize) -> Result<(), NetsimError> {
        let Some(trade) = self.runs[i].trade else {
            return Ok(());
        };
        let t = self.demand[i];
        let reading = (t.power as f64 * t.delivered_fraction).round() as u64;
        let measured = vec![reading; (t.end - t.start + 1) as usize];
        let slot = self.slot();
        self.trace.push(TraceEvent::MeterReading { t: self.now, slot, trade: trade.0, measured: measured.clone() });
        let result = self
            .ledger
            .record_energy_transfer(trade, measured, slot)
            .and_then(|_| self.ledger.settle_financial(trade, slot));
        self.sync_ledger_trace();
        if let Err(e) = result {
            self.fail(i, e.to_string());
        }
        Ok(())
    }

    fn party_of(&self, destination: &DestinationId) -> Option<usize> {
        self.parties.iter().position(|p| p.destination == *destination)
    }

    fn send(&mut self, from: usize, to: usize, message: AppMessage) -> Result<(), NetsimError> {
        let destination = self.parties[to].destination;
        let lease = self.directory.lease_set(&destination, self.now).ok_or(NetsimError::UnknownDestination)?;
        let sender = self.parties[from].router;
        let tunnel =
            build_path(&self.directory, Some(sender), &lease, self.scenario.hop_count, self.now, &mut self.rng)?;
        for record in &tunnel.build_records {
            self.routers[record.hop.0 as usize].accept_build(record)?;
        }
        let kind = message.kind();
        let bytes = serde_json::to_vec(&message).expect("app messages serialize");
        let packet = wrap(Payload::Message(bytes), &tunnel, &mut self.rng)?;
        let msg = self.next_msg;
        self.next_msg += 1;
        let to_router = self.parties[to].router;
        self.trace.push(TraceEvent::Send { t: self.now, msg, from: sender, to: to_router, kind });
        let first = tunnel.hops()[0];
        self.transmit(sender, Outgoing { to: first, msg, packet, last_leg: false });
        Ok(())
    }

    fn transmit(&mut self, from: RouterId, out: Outgoing) {
        let b = self.scenario.batching_delay_ms;
        if b == 0 {
            self.emit(from, out);
            return;
        }
        let batch = self.batches.entry(from).or_default();
        batch.push(out);
        if batch.len() == 1 {
            self.schedule((self.now / b + 1) * b, Event::Flush(from));
        }
    }

    fn emit(&mut self, from: RouterId, out: Outgoing) {
        let lat = self.scenario.latency;
        let delay = lat.base_ms + self.rng.gen_range(0..=lat.jitter_ms);
        let dropped = lat.drop_probability > 0.0 && self.rng.gen_bool(lat.drop_probability);
        let wire = if self.scenario.padding { out.packet.as_bytes() } else { out.packet.unpadded() };
        debug_assert!(!self.scenario.padding || wire.len() == CELL_SIZE);
        self.trace.push(TraceEvent::Transmit {
            t: self.now,
            arrive: self.now + delay,
            msg: out.msg,
            src: from,
            dst: out.to,
            size: wire.len(),
            last_leg: out.last_leg,
            dropped,
        });
        if !dropped {
            let event = Event::Arrive { router: out.to, msg: out.msg, wire: wire.to_vec(), last_leg: out.last_leg };
            self.schedule(self.now + delay, event);
        }
    }

    fn arrive(&mut self, router: RouterId, msg: u64, wire: &[u8], last_leg: bool) -> Result<(), NetsimError> {
        let packet = OnionPacket::from_wire(wire)?;
        match self.routers[router.0 as usize].peel(&packet)? {
            Peeled::Relay { next, packet } => {
                if let Some(hops) = &mut self.hops {
                    let forwarded = packet.as_bytes().to_vec();
                    hops.push(HopRecord { router, received: wire.to_vec(), inner: forwarded.clone(), forwarded, next });
                }
                self.transmit(router, Outgoing { to: next, msg, packet, last_leg: false });
            }
            Peeled::Deliver { tunnel, bundle } => match self.inbound.get(&(router, tunnel)) {
                Some(Inbound::Gateway(inbound)) if !last_leg => {
                    let owner = inbound.hops()[0];
                    let packet = wrap(Payload::Garlic(bundle.clone()), inbound, &mut self.rng)?;
                    if let Some(hops) = &mut self.hops {
                        hops.push(HopRecord {
                            router,
                            received: wire.to_vec(),
                            inner: bundle.into_sealed(),
                            forwarded: packet.as_bytes().to_vec(),
                            next: owner,
                        });
                    }
                    self.transmit(router, Outgoing { to: owner, msg, packet, last_leg: true });
                }
                Some(Inbound::Endpoint(party)) => {
                    let party = *party;
                    let p = &self.parties[party];
                    let payloads = unbundle(&bundle, &p.e2e, p.destination)?;
                    for payload in payloads {
                        let message: AppMessage =
                            serde_json::from_slice(&payload).map_err(|_| NetsimError::MalformedMessage)?;
                        self.trace.push(TraceEvent::Deliver { t: self.now, msg, router, kind: message.kind() });
                        self.deliver(party, message)?;
                    }
                }
                _ => return Err(NetsimError::UnknownTunnel { router, tunnel }),
            },
        }
        Ok(())
    }

    fn deliver(&mut self, party: usize, message: AppMessage) -> Result<(), NetsimError> {
        match message {
            AppMessage::Cover => Ok(()),
            AppMessage::WithdrawRequest { demand, prosumer, power, start, end, target } if party == self.dso() => {
                let interval = TimeInterval::new(start, end)?;
                let slot = self.slot();
                let result = self.ledger.withdraw_energy_asset(
                    ProsumerId(prosumer),
                    EnergyKind::Production,
                    power,
                    interval,
                    AnonAddress(target),
                    slot,
                );
                match result {
                    Ok(_) => {
                        self.sync_ledger_trace();
                        // the seller watches the replicated ledger for its token
                        self.schedule(self.now, Event::TokenReady(demand));
                    }
                    Err(e) => self.fail(demand, e.to_string()),
                }
                Ok(())
            }
            AppMessage::OfferNotice { demand, offer, reply_to } => {
                let bytes: [u8; 32] = hex::decode(&reply_to)
                    .ok()
                    .and_then(|b| b.try_into().ok())
                    .ok_or(NetsimError::MalformedMessage)?;
                self.accept(demand, OfferId(offer), DestinationId(bytes))
            }
            AppMessage::AcceptNotice { demand, trade } => {
                if self.runs[demand].trade != Some(TradeId(trade)) {
                    return Err(NetsimError::MalformedMessage);
                }
                match self.delays.get(&demand).copied().unwrap_or(0) {
                    0 => self.finalize(demand),
                    slots => {
                        self.schedule(self.now + slots * self.scenario.slot_ms, Event::Finalize(demand));
                        Ok(())
                    }
                }
            }
            AppMessage::WithdrawRequest { .. } => Err(NetsimError::MalformedMessage),
        }
    }
}
