use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::trace::Vantage;
use crate::onion::MAX_HOPS;

/// Per-link delay and loss.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatencyModel {
    pub base_ms: u64,
    /// Uniform extra delay in `[0, jitter_ms]`.
    pub jitter_ms: u64,
    pub drop_probability: f64,
}

impl Default for LatencyModel {
    fn default() -> Self {
        LatencyModel { base_ms: 20, jitter_ms: 10, drop_probability: 0.0 }
    }
}

impl LatencyModel {
    pub fn max_ms(&self) -> u64 {
        self.base_ms + self.jitter_ms
    }
}

/// One entry of the demand schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TradeSpec {
    pub seller: u32,
    pub buyer: u32,
    /// Watts per slot.
    pub power: u64,
    pub start: u64,
    pub end: u64,
    /// Cents per watt-slot.
    pub unit_price: u64,
    /// Slot in which the seller starts the withdraw/post/accept exchange.
    pub post_slot: u64,
    /// Share of the promised power the meter will read.
    #[serde(default = "full_delivery")]
    pub delivered_fraction: f64,
}

fn full_delivery() -> f64 {
    1.0
}

/// Trades drawn from the scenario seed, appended after the explicit ones.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomTrades {
    pub count: u32,
    pub min_power: u64,
    pub max_power: u64,
    pub max_duration: u64,
    pub max_price: u64,
}

impl Default for RandomTrades {
    fn default() -> Self {
        RandomTrades { count: 0, min_power: 50, max_power: 300, max_duration: 4, max_price: 5 }
    }
}

/// Holds the seller's finalize back by whole slots for one demand entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectedDelay {
    /// Index into the resolved demand schedule.
    pub trade: usize,
    pub finalize_delay_slots: u64,
}

/// Complete description of one simulation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub seed: u64,
    pub slots: u64,
    pub slot_ms: u64,
    pub clearing_deadline: u64,
    pub min_ring_size: usize,
    pub hop_count: usize,
    /// Relays hold cells until the next multiple of this; 0 disables batching.
    pub batching_delay_ms: u64,
    /// Mean cover messages per prosumer per slot.
    pub cover_rate: f64,
    /// Pad every cell to the fixed size on the wire.
    pub padding: bool,
    pub prosumers: u32,
    pub max_generation: u64,
    pub max_consumption: u64,
    pub relay_routers: u32,
    pub initial_funds: u64,
    pub latency: LatencyModel,
    pub trades: Vec<TradeSpec>,
    pub random_trades: RandomTrades,
    pub delays: Vec<InjectedDelay>,
    pub adversary: Vantage,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            seed: 0,
            slots: 20,
            slot_ms: 1000,
            clearing_deadline: crate::ledger::DEFAULT_CLEARING_DEADLINE,
            min_ring_size: 3,
            hop_count: 3,
            batching_delay_ms: 0,
            cover_rate: 0.0,
            padding: true,
            prosumers: 2,
            max_generation: 1000,
            max_consumption: 1000,
            relay_routers: 5,
            initial_funds: 100_000,
            latency: LatencyModel::default(),
            trades: Vec::new(),
            random_trades: RandomTrades::default(),
            delays: Vec::new(),
            adversary: Vantage::All,
        }
    }
}

/// A rejected scenario field.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// Dotted path of the offending field.
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl Scenario {
    pub fn router_count(&self) -> u32 {
        self.prosumers + 1 + self.relay_routers
    }

    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut bad = |field: &str, message: String| out.push(Diagnostic { field: field.to_string(), message });
        if self.slots == 0 {
            bad("slots", "must be at least 1".into());
        }
        if self.slot_ms == 0 {
            bad("slot_ms", "must be at least 1".into());
        }
        if self.prosumers < 2 {
            bad("prosumers", "at least two prosumers are needed to trade".into());
        }
        if self.relay_routers == 0 {
            bad("relay_routers", "at least one relay is needed as a lease gateway".into());
        }
        if self.min_ring_size == 0 {
            bad("min_ring_size", "must be at least 1".into());
        }
        if self.hop_count == 0 || self.hop_count > MAX_HOPS {
            bad("hop_count", format!("must be in 1..={MAX_HOPS}, got {}", self.hop_count));
        } else {
            // path hops exclude the sender and the entry gateway
            let available = self.router_count().saturating_sub(2) as usize;
            if available < self.hop_count {
                bad(
                    "hop_count",
                    format!(
                        "InsufficientRouters: {} hops need {} eligible routers, roster has {available}",
                        self.hop_count, self.hop_count
                    ),
                );
            }
        }
        if !self.cover_rate.is_finite() || self.cover_rate < 0.0 {
            bad("cover_rate", format!("must be a non-negative number, got {}", self.cover_rate));
        }
        let p = self.latency.drop_probability;
        if !(0.0..=1.0).contains(&p) {
            bad("latency.drop_probability", format!("must be in [0, 1], got {p}"));
        }
        let r = &self.random_trades;
        if r.count > 0 {
            if r.min_power == 0 || r.min_power > r.max_power {
                bad("random_trades.min_power", "need 0 < min_power <= max_power".into());
            }
            if r.max_power > self.max_generation {
                bad("random_trades.max_power", "exceeds max_generation".into());
            }
            if r.max_duration == 0 {
                bad("random_trades.max_duration", "must be at least 1".into());
            }
            if self.slots < r.max_duration + 4 {
                bad("slots", format!("random trades need at least {} slots", r.max_duration + 4));
            }
        }
        let mut scheduled: BTreeMap<(u32, u64), u64> = BTreeMap::new();
        for (i, t) in self.trades.iter().enumerate() {
            let field = |name: &str| format!("trades[{i}].{name}");
            if t.seller >= self.prosumers {
                bad(&field("seller"), format!("no prosumer {}", t.seller));
            }
            if t.buyer >= self.prosumers {
                bad(&field("buyer"), format!("no prosumer {}", t.buyer));
            }
            if t.seller == t.buyer {
                bad(&field("buyer"), "buyer and seller must differ".into());
            }
            if t.power == 0 {
                bad(&field("power"), "must be positive".into());
            }
            if t.start > t.end {
                bad(&field("end"), format!("start {} is after end {}", t.start, t.end));
            }
            if t.post_slot >= t.start {
                bad(&field("post_slot"), "offers must be posted before the interval starts".into());
            }
            if t.end >= self.slots {
                bad(&field("end"), format!("must end before slot {}", self.slots));
            }
            if !(0.0..=1.0).contains(&t.delivered_fraction) {
                bad(&field("delivered_fraction"), "must be in [0, 1]".into());
            }
            for s in t.start..=t.end.min(self.slots) {
                let total = scheduled.entry((t.seller, s)).or_insert(0);
                *total += t.power;
                if *total > self.max_generation {
                    bad(
                        &field("power"),
                        format!("seller {} would exceed max_generation in slot {s}", t.seller),
                    );
                    break;
                }
            }
        }
        let total = self.trades.len() + self.random_trades.count as usize;
        for (i, d) in self.delays.iter().enumerate() {
            if d.trade >= total {
                bad(&format!("delays[{i}].trade"), format!("demand schedule has {total} trades"));
            }
        }
        out
    }

    /// Explicit trades followed by `random_trades.count` draws that keep
    /// every seller within capacity.
    pub fn resolve_trades<R: Rng>(&self, rng: &mut R) -> Vec<TradeSpec> {
        let mut out = self.trades.clone();
        let mut scheduled: BTreeMap<(u32, u64), u64> = BTreeMap::new();
        for t in &out {
            for s in t.start..=t.end {
                *scheduled.entry((t.seller, s)).or_insert(0) += t.power;
            }
        }
        let r = self.random_trades;
        let mut attempts = 0;
        while out.len() < self.trades.len() + r.count as usize && attempts < 10_000 {
            attempts += 1;
            let seller = rng.gen_range(0..self.prosumers);
            let buyer = (seller + rng.gen_range(1..self.prosumers)) % self.prosumers;
            let duration = rng.gen_range(1..=r.max_duration);
            // leave room to post two slots ahead and to meter after the end
            let latest_post = self.slots - duration - 3;
            let post_slot = rng.gen_range(0..=latest_post);
            let start = rng.gen_range(post_slot + 2..=self.slots - duration - 1);
            let end = start + duration - 1;
            let power = rng.gen_range(r.min_power..=r.max_power);
            let unit_price = rng.gen_range(1..=r.max_price.max(1));
            let fits = (start..=end)
                .all(|s| scheduled.get(&(seller, s)).copied().unwrap_or(0) + power <= self.max_generation);
            if !fits {
                continue;
            }
            for s in start..=end {
                *scheduled.entry((seller, s)).or_insert(0) += power;
            }
            out.push(TradeSpec { seller, buyer, power, start, end, unit_price, post_slot, delivered_fraction: 1.0 });
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn trade(seller: u32, buyer: u32, power: u64) -> TradeSpec {
        TradeSpec { seller, buyer, power, start: 3, end: 4, unit_price: 2, post_slot: 1, delivered_fraction: 1.0 }
    }

    #[test]
    fn default_is_valid() {
        assert!(Scenario::default().validate().is_empty());
    }

    #[test]
    fn reports_each_bad_field() {
        let s = Scenario {
            hop_count: 6,
            cover_rate: -1.0,
            trades: vec![trade(0, 0, 10), trade(0, 5, 2000)],
            delays: vec![InjectedDelay { trade: 9, finalize_delay_slots: 3 }],
            ..Scenario::default()
        };
        let fields: Vec<String> = s.validate().into_iter().map(|d| d.field).collect();
        for f in ["hop_count", "cover_rate", "trades[0].buyer", "trades[1].buyer", "trades[1].power", "delays[0].trade"] {
            assert!(fields.contains(&f.to_string()), "missing {f} in {fields:?}");
        }
    }

    #[test]
    fn too_few_routers_for_hop_count() {
        let s = Scenario { prosumers: 2, relay_routers: 1, hop_count: 3, ..Scenario::default() };
        let d = s.validate();
        assert_eq!(d.len(), 1);
        assert!(d[0].message.starts_with("InsufficientRouters"));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<Scenario>(r#"{"seed":1,"hops":3}"#).is_err());
        let s: Scenario = serde_json::from_str(r#"{"seed":7,"latency":{"base_ms":5}}"#).unwrap();
        assert_eq!((s.seed, s.latency.base_ms, s.latency.jitter_ms), (7, 5, 10));
    }

    #[test]
    fn random_trades_respect_capacity_and_timing() {
        let s = Scenario {
            prosumers: 10,
            slots: 100,
            max_generation: 600,
            random_trades: RandomTrades { count: 50, ..RandomTrades::default() },
            ..Scenario::default()
        };
        let trades = s.resolve_trades(&mut ChaCha20Rng::seed_from_u64(3));
        assert_eq!(trades.len(), 50);
        let checked = Scenario { trades: trades.clone(), random_trades: RandomTrades::default(), ..s.clone() };
        assert_eq!(checked.validate(), vec![]);
        assert_eq!(trades, s.resolve_trades(&mut ChaCha20Rng::seed_from_u64(3)));
    }
}
