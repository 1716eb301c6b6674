//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use ed25519_dalek::SigningKey;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use microgrid_core::attacks::{
    chain_reaction_traceability, check_deductions, synthetic_history, zkp_throughput_comparison, ClearingBudget,
    HistoryParams, RingCostModel, Scheme, ZkpCostModel,
};
use microgrid_core::ledger::{check_invariants, read_log, write_log, Ledger};
use microgrid_core::netsim::{run, run_with, RandomTrades, RunOptions, Scenario, TraceEvent};
use microgrid_core::onion::{
    build_path, unbundle, wrap, DirectoryStore, EncryptionKeypair, Lease, LeaseSet, Payload, Peeled, RouterId,
    RouterInfo, RouterKeys, TunnelId, CELL_SIZE, MAX_CLOVE_PAYLOAD, MAX_HOPS,
};
use microgrid_core::ringsig::{
    decode_signature, derive_stealth, encode_signature, lnk, recover_stealth_secret, sig, ver, Group, KeyImageRegistry,
    KeyPair, LinkStatus, ReceiverKeys, RingConfig, Ristretto, ToyGroup, ToyScalar,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: u64) -> Result<(), String> {
    ensure(elapsed < Duration::from_secs(limit_s), || format!("took {elapsed:.1?}, limit {limit_s} s"))
}

fn scenario_file(name: &str) -> Scenario {
    let path = format!("{}/../../scenarios/{name}", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    let mut doc: toml::Table = toml::from_str(&text).unwrap_or_else(|e| panic!("{path}: {e}"));
    doc.remove("schema");
    toml::Value::Table(doc).try_into().unwrap_or_else(|e| panic!("{path}: {e}"))
}

fn ring_signatures() -> Outcome {
    let start = Instant::now();
    let group = ToyGroup::standard();
    let config = RingConfig { min_ring_size: 3 };
    let mut rng = ChaCha20Rng::seed_from_u64(0xACCE_0001);
    let instances = 1000;
    let mut tampers = 0u64;
    for i in 0..instances {
        let size = rng.gen_range(3..=8);
        let keys: Vec<KeyPair<ToyGroup>> = (0..size).map(|_| KeyPair::generate(&group, &mut rng)).collect();
        let ring: Vec<_> = keys.iter().map(|k| k.public).collect();
        let signer = rng.gen_range(0..size);
        let mut message = vec![0u8; rng.gen_range(1..=32)];
        rng.fill_bytes(&mut message);
        let s = sig(&group, &config, &message, &ring, signer, &keys[signer].secret, &mut rng)
            .map_err(|e| format!("instance {i}: signing failed: {e}"))?;
        ensure(ver(&group, &message, &s), || format!("instance {i}: valid signature rejected"))?;

        // same key, different ring and message
        let mut registry = KeyImageRegistry::new();
        ensure(lnk(&group, &mut registry, &s, "first") == LinkStatus::Fresh, || format!("instance {i}: fresh image linked"))?;
        let mut other_ring: Vec<_> = (0..size - 1).map(|_| KeyPair::generate(&group, &mut rng).public).collect();
        other_ring.push(keys[signer].public);
        let again = sig(&group, &config, b"second spend", &other_ring, size - 1, &keys[signer].secret, &mut rng)
            .map_err(|e| format!("instance {i}: second signing failed: {e}"))?;
        ensure(
            lnk(&group, &mut registry, &again, "second") == LinkStatus::Linked("first".into()),
            || format!("instance {i}: double spend not linked"),
        )?;

        let encoded = encode_signature(&group, &s);
        for bit in 0..encoded.len() * 8 {
            let mut tampered = encoded.clone();
            tampered[bit / 8] ^= 1 << (bit % 8);
            let accepted = decode_signature(&group, &tampered).is_ok_and(|t| ver(&group, &message, &t));
            ensure(!accepted, || format!("instance {i}: signature bit {bit} flip accepted"))?;
        }
        for bit in 0..message.len() * 8 {
            let mut tampered = message.clone();
            tampered[bit / 8] ^= 1 << (bit % 8);
            ensure(!ver(&group, &tampered, &s), || format!("instance {i}: message bit {bit} flip accepted"))?;
        }
        tampers += ((encoded.len() + message.len()) * 8) as u64;
    }

    let images: BTreeSet<Vec<u8>> = (1..group.order())
        .map(|x| {
            let pair = KeyPair::from_secret(&group, ToyScalar(x));
            group.encode_element(&pair.key_image(&group).0)
        })
        .collect();
    ensure(images.len() as u64 == group.order() - 1, || {
        format!("{} distinct key images for {} secrets", images.len(), group.order() - 1)
    })?;

    let elapsed = start.elapsed();
    within(elapsed, 60)?;
    Ok(format!("{instances} instances, {tampers} tampers rejected, {} key images distinct, {elapsed:.1?}", images.len()))
}

fn stealth_addresses() -> Outcome {
    let group = Ristretto;
    let mut rng = ChaCha20Rng::seed_from_u64(0xACCE_0002);
    let mut one_time = BTreeSet::new();
    let pairs = 500;
    for i in 0..pairs {
        let receiver = ReceiverKeys::generate(&group, &mut rng);
        let ephemeral = group.random_scalar(&mut rng);
        let out = derive_stealth(&group, &receiver.address(), &ephemeral).map_err(|e| format!("pair {i}: {e}"))?;
        let secret =
            recover_stealth_secret(&group, &receiver, &out).map_err(|e| format!("pair {i}: recovery failed: {e}"))?;
        ensure(group.mul_base(&secret) == out.one_time, || format!("pair {i}: recovered secret does not match"))?;
        one_time.insert(group.encode_element(&out.one_time));
    }
    ensure(one_time.len() == pairs, || format!("{} distinct one-time keys for {pairs} pairs", one_time.len()))?;
    Ok(format!("{pairs} pairs recovered, all one-time keys distinct"))
}

fn onion_layer() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(0xACCE_0003);
    let dir = DirectoryStore::new();
    let mut routers: BTreeMap<RouterId, RouterKeys> = BTreeMap::new();
    for id in 0..8 {
        let keys = RouterKeys::generate(RouterId(id), &mut rng);
        let signing = SigningKey::generate(&mut rng);
        let info = RouterInfo::signed(&keys, &signing, vec![format!("10.0.0.{id}")], 1, String::new());
        dir.publish(info.into(), 0).map_err(|e| e.to_string())?;
        routers.insert(RouterId(id), keys);
    }
    let dest_keys = EncryptionKeypair::generate(&mut rng);
    let lease = LeaseSet::signed(
        vec![Lease { gateway: RouterId(0), tunnel: TunnelId(5) }],
        1_000,
        &dest_keys,
        &SigningKey::generate(&mut rng),
        [0; 32],
    );

    let mut round_trips = 0;
    for hops in 1..=MAX_HOPS {
        for p in 0..200 {
            let tunnel = build_path(&dir, Some(RouterId(7)), &lease, hops, 0, &mut rng).map_err(|e| e.to_string())?;
            for record in &tunnel.build_records {
                routers.get_mut(&record.hop).expect("known hop").accept_build(record).map_err(|e| e.to_string())?;
            }
            let mut payload = vec![0u8; rng.gen_range(0..=MAX_CLOVE_PAYLOAD)];
            rng.fill_bytes(&mut payload);
            let mut packet = wrap(Payload::Message(payload.clone()), &tunnel, &mut rng).map_err(|e| e.to_string())?;
            let mut at = tunnel.hops()[0];
            let bundle = loop {
                ensure(packet.as_bytes().len() == CELL_SIZE, || format!("{} byte cell", packet.as_bytes().len()))?;
                match routers[&at].peel(&packet).map_err(|e| format!("hops {hops} payload {p}: {e}"))? {
                    Peeled::Relay { next, packet: inner } => {
                        at = next;
                        packet = inner;
                    }
                    Peeled::Deliver { bundle, .. } => break bundle,
                }
            };
            let got = unbundle(&bundle, &dest_keys, lease.destination).map_err(|e| e.to_string())?;
            ensure(got == vec![payload], || format!("hops {hops} payload {p}: round trip differs"))?;
            round_trips += 1;
        }
    }

    let sc = Scenario { cover_rate: 1.0, ..market(6, 20, 8, 30) };
    let out = run_with(&sc, &RunOptions { record_hops: true, ..RunOptions::default() }).map_err(|e| e.to_string())?;
    let mut cells = 0;
    for e in &out.trace {
        if let TraceEvent::Transmit { size, .. } = e {
            ensure(*size == CELL_SIZE, || format!("transmitted {size} byte cell"))?;
            cells += 1;
        }
    }
    let ids: Vec<[u8; 32]> = out.destinations.iter().map(|d| d.0).collect();
    for (i, hop) in out.hops.iter().enumerate() {
        for cell in [&hop.received, &hop.forwarded] {
            ensure(cell.len() == CELL_SIZE, || format!("hop record {i} holds a {} byte cell", cell.len()))?;
        }
        for bytes in [&hop.received, &hop.inner, &hop.forwarded] {
            let leaked = bytes.windows(32).any(|w| ids.iter().any(|id| w == id));
            ensure(!leaked, || format!("hop record {i} at {} exposes a destination id", hop.router))?;
        }
    }
    ensure(!out.hops.is_empty(), || "no hop records collected".into())?;
    Ok(format!("{round_trips} round trips, {cells} cells of {CELL_SIZE} bytes, {} hop records clean", out.hops.len()))
}

fn market(prosumers: u32, trades: u32, slots: u64, seed: u64) -> Scenario {
    Scenario {
        seed,
        slots,
        prosumers,
        random_trades: RandomTrades { count: trades, ..RandomTrades::default() },
        ..Scenario::default()
    }
}

fn ledger_safety() -> Outcome {
    let start = Instant::now();
    let out = run(&market(10, 50, 100, 4)).map_err(|e| e.to_string())?;
    let state = out.ledger.state();
    ensure(out.metrics.failed_demand.is_empty(), || format!("failed demand: {:?}", out.metrics.failed_demand))?;
    let settled = state.trades.values().filter(|t| t.settlement.is_some()).count();
    ensure(settled == 50, || format!("{settled} of 50 trades settled"))?;

    let report = check_invariants(out.ledger.config(), out.ledger.events()).map_err(|e| e.to_string())?;
    let mut log = Vec::new();
    write_log(&mut log, out.ledger.config(), out.ledger.events()).map_err(|e| e.to_string())?;
    let (config, events) = read_log(log.as_slice()).map_err(|e| e.to_string())?;
    let replayed = Ledger::replay(config, &events).map_err(|(i, e)| format!("replay failed at {i}: {e}"))?;
    ensure(replayed.state().digest() == state.digest(), || "replayed digest differs".into())?;
    ensure(report.final_digest == state.digest(), || "invariant replay digest differs".into())?;
    let mut again = Vec::new();
    write_log(&mut again, config, replayed.events()).map_err(|e| e.to_string())?;
    ensure(again == log, || "re-serialized log differs".into())?;

    let elapsed = start.elapsed();
    within(elapsed, 30)?;
    Ok(format!("{} events checked, 50 trades settled, replay digest {}, {elapsed:.1?}", report.events, hex8(&report.final_digest)))
}

fn hex8(d: &[u8; 32]) -> String {
    d[..8].iter().map(|b| format!("{b:02x}")).collect()
}

fn chain_reaction() -> Outcome {
    let fixtures = [
        ("ring size 1", HistoryParams {
            inputs: 50,
            ring_size: 1,
            zero_mixin_fraction: 1.0,
            min_ring_size: 1,
            adversary_outputs: 0,
            extra_pool: 0,
        }),
        ("ring size 3, no adversary", HistoryParams {
            inputs: 50,
            ring_size: 3,
            zero_mixin_fraction: 0.0,
            min_ring_size: 3,
            adversary_outputs: 0,
            extra_pool: 0,
        }),
        ("adversary heavy", HistoryParams {
            inputs: 100,
            ring_size: 3,
            zero_mixin_fraction: 0.3,
            min_ring_size: 1,
            adversary_outputs: 100,
            extra_pool: 50,
        }),
    ];
    let mut fractions = Vec::new();
    for (name, params) in &fixtures {
        let history = synthetic_history(params, &mut ChaCha20Rng::seed_from_u64(0xACCE_0005));
        let result = chain_reaction_traceability(&history.inputs, &history.adversary_outputs);
        check_deductions(&result, &history.truth).map_err(|f| format!("{name}: false deduction {f:?}"))?;
        fractions.push(result.fraction_traceable);
    }
    ensure(fractions[0] == 1.0, || format!("ring size 1 traced {}", fractions[0]))?;
    ensure(fractions[1] == 0.0, || format!("ring size 3 traced {}", fractions[1]))?;
    ensure(fractions[2] >= 0.6, || format!("adversary heavy traced {}", fractions[2]))?;
    Ok(format!("traceable {:.2} / {:.2} / {:.2}", fractions[0], fractions[1], fractions[2]))
}

fn timing_countermeasures() -> Outcome {
    let success = |sc: &Scenario| -> Result<f64, String> {
        let out = run(sc).map_err(|e| e.to_string())?;
        out.metrics.timing_attack_success.ok_or_else(|| format!("seed {}: nothing delivered", sc.seed))
    };
    let mut plain_sum = 0.0;
    let mut hidden_sum = 0.0;
    let seeds = 20;
    for seed in 0..seeds {
        let base = Scenario { padding: false, batching_delay_ms: 0, cover_rate: 0.0, ..market(6, 10, 30, seed) };
        let hidden = Scenario { padding: true, batching_delay_ms: 200, cover_rate: 2.0, ..base.clone() };
        let (p, h) = (success(&base)?, success(&hidden)?);
        ensure(h <= p, || format!("seed {seed}: {h:.3} with countermeasures, {p:.3} without"))?;
        plain_sum += p;
        hidden_sum += h;
    }
    let (plain, hidden) = (plain_sum / seeds as f64, hidden_sum / seeds as f64);
    ensure(hidden < plain, || format!("mean {hidden:.3} not below {plain:.3}"))?;

    let single = Scenario { padding: false, trades: vec![one_flow()], ..Scenario::default() };
    let s = success(&single)?;
    ensure(s == 1.0, || format!("single flow traced {s}"))?;
    Ok(format!("mean success {plain:.3} without, {hidden:.3} with countermeasures, single flow {s:.1}"))
}

fn one_flow() -> microgrid_core::netsim::TradeSpec {
    microgrid_core::netsim::TradeSpec {
        seller: 0,
        buyer: 1,
        power: 100,
        start: 4,
        end: 5,
        unit_price: 2,
        post_slot: 1,
        delivered_fraction: 1.0,
    }
}

fn zkp_cost() -> Outcome {
    let zkp = ZkpCostModel { prove_us: 180_000_000, verify_us: 8_500 };
    let budget = ClearingBudget { slot_us: 1_000_000, deadline_slots: 2 };
    let mut checked = 0;
    for workload in 1..=1000 {
        let rows = zkp_throughput_comparison(workload, &zkp, &RingCostModel::default(), budget);
        let inline = rows.iter().find(|r| r.scheme == Scheme::ZkpProveInline).ok_or("no inline row")?;
        ensure(inline.violates_deadline, || format!("prove inline at {workload} tx/slot meets the deadline"))?;
        ensure(inline.first_violating_workload == Some(1), || format!("{inline:?}"))?;
        checked += 1;
    }
    let rows = zkp_throughput_comparison(100, &zkp, &RingCostModel::default(), budget);
    let verify = rows.iter().find(|r| r.scheme == Scheme::ZkpVerifyOnly).ok_or("no verify-only row")?;
    ensure(!verify.violates_deadline, || format!("verify only at 100 tx/slot: {verify:?}"))?;
    ensure(verify.worst_latency_us == 100 * 8_500, || format!("verify only latency {}", verify.worst_latency_us))?;
    Ok(format!(
        "prove inline violates for 1..={checked} tx/slot, verify only at 100 tx/slot takes {} us of {} us",
        verify.worst_latency_us, verify.deadline_us
    ))
}

fn bounded_clearing() -> Outcome {
    let smoke = run(&scenario_file("smoke.toml")).map_err(|e| format!("smoke: {e}"))?;
    let v = &smoke.metrics.clearing.violations;
    ensure(v.is_empty(), || format!("smoke: {} violations", v.len()))?;
    ensure(smoke.metrics.failed_demand.is_empty(), || "smoke: failed demand".into())?;

    let sc = scenario_file("deadline_miss.toml");
    let out = run(&sc).map_err(|e| format!("deadline_miss: {e}"))?;
    ensure(out.metrics.failed_demand.is_empty(), || "deadline_miss: failed demand".into())?;
    let mut expected = Vec::new();
    for d in sc.delays.iter().filter(|d| d.finalize_delay_slots > sc.clearing_deadline) {
        let trade = out.demand_trades[d.trade].ok_or_else(|| format!("demand {} never traded", d.trade))?;
        expected.push(trade);
    }
    expected.sort_unstable();
    let detected: Vec<_> = out.metrics.clearing.violations.iter().map(|v| v.trade).collect();
    ensure(detected == expected, || format!("detected {detected:?}, injected {expected:?}"))?;
    ensure(!expected.is_empty(), || "fixture injects no violation".into())?;
    Ok(format!("smoke clean over {} trades, {} injected violations detected", smoke.demand.len(), expected.len()))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("ring signatures", ring_signatures),
        ("stealth addresses", stealth_addresses),
        ("onion layer", onion_layer),
        ("ledger conservation and replay", ledger_safety),
        ("zero-mixin chain reaction", chain_reaction),
        ("timing attack countermeasures", timing_countermeasures),
        ("zkp cost model", zkp_cost),
        ("bounded clearing", bounded_clearing),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({why})", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
