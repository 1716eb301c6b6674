use std::collections::{BTreeMap, BTreeSet};

use ed25519_dalek::SigningKey;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use microgrid_core::attacks::{chain_reaction_traceability, check_deductions, synthetic_history, HistoryParams};
use microgrid_core::ledger::{
    check_invariants, AnonAddress, AssetSpec, EnergyKind, Ledger, OfferId, ProsumerId, Side, TimeInterval, TokenId,
    TradeId,
};
use microgrid_core::netsim::{compute_metrics, run, RandomTrades, Scenario, TraceEvent};
use microgrid_core::onion::{
    build_path, unbundle, wrap, DirectoryStore, EncryptionKeypair, Lease, LeaseSet, Payload, Peeled, RouterId,
    RouterInfo, RouterKeys, TunnelId, CELL_SIZE, MAX_CLOVE_PAYLOAD, MAX_HOPS,
};

#[derive(Clone, Debug)]
enum Op {
    Issue { who: u8, amount: u64 },
    Withdraw { prosumer: u32, consume: bool, power: u64, start: u64, len: u64, who: u8 },
    Post { who: u8, bid: bool, power: u64, start: u64, len: u64, price: i64 },
    Accept { who: u8, offer: u64 },
    Split { who: u8, token: u64, power: u64, start: u64, len: u64 },
    Finalize { who: u8, trade: u64 },
    Record { trade: u64, measured: u64 },
    Settle { trade: u64 },
    Expire,
}

fn op() -> impl Strategy<Value = Op> {
    let who = 0u8..4;
    prop_oneof![
        (who.clone(), 0u64..5_000).prop_map(|(who, amount)| Op::Issue { who, amount }),
        (1u32..4, any::<bool>(), 1u64..400, 0u64..12, 0u64..4, who.clone()).prop_map(
            |(prosumer, consume, power, start, len, who)| Op::Withdraw { prosumer, consume, power, start, len, who }
        ),
        (who.clone(), any::<bool>(), 1u64..400, 0u64..12, 0u64..4, -1i64..6)
            .prop_map(|(who, bid, power, start, len, price)| Op::Post { who, bid, power, start, len, price }),
        (who.clone(), 0u64..12).prop_map(|(who, offer)| Op::Accept { who, offer }),
        (who.clone(), 0u64..12, 1u64..400, 0u64..12, 0u64..4)
            .prop_map(|(who, token, power, start, len)| Op::Split { who, token, power, start, len }),
        (who, 0u64..8).prop_map(|(who, trade)| Op::Finalize { who, trade }),
        (0u64..8, 0u64..500).prop_map(|(trade, measured)| Op::Record { trade, measured }),
        (0u64..8).prop_map(|trade| Op::Settle { trade }),
        Just(Op::Expire),
    ]
}

fn addr(who: u8) -> AnonAddress {
    AnonAddress::new(format!("addr-{who}"))
}

fn apply(l: &mut Ledger, op: &Op, slot: u64) {
    let iv = |start: u64, len: u64| TimeInterval::new(start, start + len).unwrap();
    // rejected operations are expected; only the resulting log matters
    let _ = match op.clone() {
        Op::Issue { who, amount } => l.issue_funds(addr(who), amount, slot).map(drop),
        Op::Withdraw { prosumer, consume, power, start, len, who } => {
            let kind = if consume { EnergyKind::Consumption } else { EnergyKind::Production };
            l.withdraw_energy_asset(ProsumerId(prosumer), kind, power, iv(start, len), addr(who), slot).map(drop)
        }
        Op::Post { who, bid, power, start, len, price } => {
            let side = if bid { Side::Bid } else { Side::Ask };
            let spec = AssetSpec { kind: EnergyKind::Production, power, interval: iv(start, len) };
            l.post_offer(addr(who), side, spec, price, slot).map(drop)
        }
        Op::Accept { who, offer } => l.accept_offer(addr(who), OfferId(offer), None, slot).map(drop),
        Op::Split { who, token, power, start, len } => {
            l.split_asset(addr(who), TokenId(token), power, iv(start, len), slot).map(drop)
        }
        Op::Finalize { who, trade } => l.finalize_trade(addr(who), TradeId(trade), slot),
        Op::Record { trade, measured } => {
            let slots = l.state().trades.get(&TradeId(trade)).map_or(1, |t| t.spec.interval.len() as usize);
            l.record_energy_transfer(TradeId(trade), vec![measured; slots], slot).map(drop)
        }
        Op::Settle { trade } => l.settle_financial(TradeId(trade), slot).map(drop),
        Op::Expire => l.expire_offers(slot).map(drop),
    };
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ledger_invariants_hold_under_any_operation_sequence(ops in prop::collection::vec(op(), 1..80)) {
        let mut l = Ledger::default();
        for p in 1..4 {
            l.register_prosumer(ProsumerId(p), 600, 600).unwrap();
        }
        for (i, op) in ops.iter().enumerate() {
            apply(&mut l, op, i as u64 / 4);
        }
        let report = check_invariants(l.config(), l.events()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(report.final_digest, l.state().digest());
        prop_assert_eq!(Ledger::replay(l.config(), l.events()).unwrap().state().digest(), l.state().digest());
        let issued: u64 = l
            .events()
            .iter()
            .filter_map(|e| match e {
                microgrid_core::ledger::LedgerEvent::IssueFunds { amount, .. } => Some(*amount),
                _ => None,
            })
            .sum();
        let held: u64 = l.state().balances.values().sum::<u64>() + l.state().escrowed();
        prop_assert_eq!(held, issued);
    }

    #[test]
    fn chain_reaction_never_deduces_wrongly(
        inputs in 1usize..60,
        ring_size in 1usize..6,
        zero_mixin_fraction in 0.0f64..=1.0,
        min_ring_size in 1usize..4,
        adversary_outputs in 0usize..40,
        extra_pool in 0usize..20,
        seed in any::<u64>(),
    ) {
        let params = HistoryParams { inputs, ring_size, zero_mixin_fraction, min_ring_size, adversary_outputs, extra_pool };
        let h = synthetic_history(&params, &mut ChaCha20Rng::seed_from_u64(seed));
        let r = chain_reaction_traceability(&h.inputs, &h.adversary_outputs);
        prop_assert!(check_deductions(&r, &h.truth).is_ok());
        prop_assert!((0.0..=1.0).contains(&r.fraction_traceable));
        prop_assert_eq!(r.depth_histogram.values().sum::<usize>(), r.deduced.len());
        let outputs: BTreeSet<_> = r.deduced.values().collect();
        prop_assert_eq!(outputs.len(), r.deduced.len(), "an output was assigned to two inputs");
    }

    #[test]
    fn onion_round_trip(seed in any::<u64>(), hops in 1usize..=MAX_HOPS, len in 0usize..=MAX_CLOVE_PAYLOAD) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let dir = DirectoryStore::new();
        let mut routers = BTreeMap::new();
        for id in 0..7 {
            let keys = RouterKeys::generate(RouterId(id), &mut rng);
            let info = RouterInfo::signed(&keys, &SigningKey::generate(&mut rng), vec![], 1, String::new());
            dir.publish(info.into(), 0).unwrap();
            routers.insert(RouterId(id), keys);
        }
        let dest = EncryptionKeypair::generate(&mut rng);
        let gateway = RouterId(seed as u32 % 7);
        let lease = LeaseSet::signed(
            vec![Lease { gateway, tunnel: TunnelId(1) }], 10, &dest, &SigningKey::generate(&mut rng), [0; 32],
        );
        let tunnel = build_path(&dir, None, &lease, hops, 0, &mut rng).unwrap();
        for r in &tunnel.build_records {
            routers.get_mut(&r.hop).unwrap().accept_build(r).unwrap();
        }
        let payload: Vec<u8> = (0..len).map(|i| (i as u64 ^ seed) as u8).collect();
        let mut packet = wrap(Payload::Message(payload.clone()), &tunnel, &mut rng).unwrap();
        let mut at = tunnel.hops()[0];
        let mut visited = vec![];
        let bundle = loop {
            prop_assert_eq!(packet.as_bytes().len(), CELL_SIZE);
            visited.push(at);
            match routers[&at].peel(&packet).unwrap() {
                Peeled::Relay { next, packet: p } => { at = next; packet = p; }
                Peeled::Deliver { bundle, tunnel: t } => { prop_assert_eq!(t, TunnelId(1)); break bundle; }
            }
        };
        prop_assert_eq!(visited.as_slice(), tunnel.hops());
        prop_assert_eq!(unbundle(&bundle, &dest, lease.destination).unwrap(), vec![payload]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn simulated_runs_are_consistent(
        seed in any::<u64>(),
        prosumers in 2u32..6,
        trades in 0u32..8,
        padding in any::<bool>(),
        batching in prop_oneof![Just(0u64), Just(50), Just(200)],
        cover_rate in prop_oneof![Just(0.0), Just(1.0)],
    ) {
        let sc = Scenario {
            seed,
            prosumers,
            padding,
            batching_delay_ms: batching,
            cover_rate,
            random_trades: RandomTrades { count: trades, ..RandomTrades::default() },
            ..Scenario::default()
        };
        let out = run(&sc).unwrap();
        check_invariants(out.ledger.config(), out.ledger.events()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(&compute_metrics(&out.trace).unwrap(), &out.metrics);
        prop_assert!(out.metrics.clearing.violations.is_empty());
        let mut sent = BTreeSet::new();
        let mut last = 0;
        for e in &out.trace {
            prop_assert!(e.time() >= last);
            last = e.time();
            match e {
                TraceEvent::Send { msg, .. } => { sent.insert(*msg); }
                TraceEvent::Transmit { msg, size, .. } => {
                    prop_assert!(sent.contains(msg));
                    if padding { prop_assert_eq!(*size, CELL_SIZE); }
                }
                TraceEvent::Deliver { msg, .. } => prop_assert!(sent.contains(msg)),
                _ => {}
            }
        }
        let ends_with_end = matches!(out.trace.last(), Some(TraceEvent::End { .. }));
        prop_assert!(ends_with_end);
    }
}
