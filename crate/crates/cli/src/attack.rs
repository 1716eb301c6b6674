//! The `attack` command. Results go to `attacks.csv` in the run directory,
//! keyed by trace digest, attack name and resolved parameters, so a repeated
//! invocation replaces its own rows instead of adding new ones.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::str::FromStr;

use microgrid_core::attacks::{
    chain_reaction_traceability, ring_inputs_from_ledger, score_timing, timing_correlation_attack,
    zkp_throughput_comparison, ClearingBudget, OutputId, RingCostModel, TimingAttackConfig, ZkpCostModel,
};
use microgrid_core::ledger::{read_log, LedgerEvent};
use microgrid_core::netsim::{AdversaryView, GroundTruth};
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::run::{header_of, read_run_trace, LEDGER_FILE};

pub const ATTACK_SCHEMA: &str = "microgrid-attack/1";
pub const ATTACKS_FILE: &str = "attacks.csv";
const COLUMNS: [&str; 8] = ["schema", "config_hash", "trace_sha256", "attack", "params", "metric", "value", "detail"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Attack {
    Timing,
    Chain,
    Zkp,
}

impl FromStr for Attack {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "timing" => Ok(Attack::Timing),
            "chain" => Ok(Attack::Chain),
            "zkp" => Ok(Attack::Zkp),
            other => Err(CliError::UnknownAttack(other.to_string())),
        }
    }
}

impl Attack {
    fn name(self) -> &'static str {
        match self {
            Attack::Timing => "timing",
            Attack::Chain => "chain",
            Attack::Zkp => "zkp",
        }
    }
}

/// One `--param key=value` flag.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Param {
    pub key: String,
    pub value: String,
}

impl FromStr for Param {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (key, value) = s.split_once('=').ok_or_else(|| format!("expected KEY=VALUE, got {s:?}"))?;
        Ok(Param { key: key.trim().to_string(), value: value.trim().to_string() })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttackRow {
    pub config_hash: String,
    pub trace_sha256: String,
    pub attack: String,
    pub params: String,
    pub metric: String,
    pub value: String,
    pub detail: String,
}

impl AttackRow {
    fn key(&self) -> (&str, &str, &str) {
        (&self.trace_sha256, &self.attack, &self.params)
    }

    fn record(&self) -> [&str; 8] {
        [
            ATTACK_SCHEMA,
            &self.config_hash,
            &self.trace_sha256,
            &self.attack,
            &self.params,
            &self.metric,
            &self.value,
            &self.detail,
        ]
    }
}

/// Parameters with defaults filled in, in a fixed order.
struct Resolved(BTreeMap<String, String>);

impl Resolved {
    fn new(defaults: &[(&str, String)], given: &[Param]) -> Result<Self, CliError> {
        let mut map: BTreeMap<String, String> = defaults.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
        for p in given {
            if !map.contains_key(&p.key) {
                let known: Vec<_> = map.keys().cloned().collect();
                return Err(CliError::BadParam(format!("unknown parameter {:?}, expected one of {known:?}", p.key)));
            }
            map.insert(p.key.clone(), p.value.clone());
        }
        Ok(Resolved(map))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let raw = &self.0[key];
        raw.parse().map_err(|_| CliError::BadParam(format!("{key}={raw} is not valid")))
    }

    fn canonical(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
    }
}

pub fn attack_command(dir: &Path, attack: &str, params: &[Param]) -> Result<Vec<AttackRow>, CliError> {
    let attack: Attack = attack.parse()?;
    let (trace_path, trace) = read_run_trace(dir)?;
    let trace_sha256 = hex::encode(Sha256::digest(std::fs::read(&trace_path).map_err(CliError::io(&trace_path))?));
    let header = header_of(&trace_path, &trace)?;

    let mut metrics: Vec<(String, String, String)> = Vec::new();
    let resolved = match attack {
        Attack::Timing => {
            let defaults = [("window_ms", (2 * header.max_link_ms).to_string()), ("size_tolerance", "0".into())];
            let p = Resolved::new(&defaults, params)?;
            let config = TimingAttackConfig::new(p.get("window_ms")?, p.get("size_tolerance")?, header.vantage.clone())
                .map_err(|e| CliError::BadParam(e.to_string()))?;
            let view = AdversaryView::from_trace(&trace, &header.vantage);
            let guesses = timing_correlation_attack(&view, &config);
            let truth = GroundTruth::from_trace(&trace, &header.vantage);
            let success = score_timing(&guesses, &truth).map_or_else(String::new, |s| s.to_string());
            let detail = format!("{} guesses, {} deliveries", guesses.len(), truth.deliveries.len());
            metrics.push(("success".into(), success, detail));
            p
        }
        Attack::Chain => {
            let p = Resolved::new(&[("adversary", "none".into())], params)?;
            let path = dir.join(LEDGER_FILE);
            let file = File::open(&path).map_err(CliError::io(&path))?;
            let (_, events) = read_log(BufReader::new(file)).map_err(|e| CliError::artifact(&path)(e.to_string()))?;
            let (inputs, ids) = ring_inputs_from_ledger(&events);
            let adversary: BTreeSet<OutputId> = match p.0["adversary"].as_str() {
                "none" => BTreeSet::new(),
                // the DSO knows which zero-value outputs it issued as decoys
                "dso" => events
                    .iter()
                    .filter_map(|e| match e {
                        LedgerEvent::IssueFunds { to, amount: 0, .. } => ids.get(to).copied(),
                        _ => None,
                    })
                    .collect(),
                other => return Err(CliError::BadParam(format!("adversary={other}, expected none or dso"))),
            };
            let result = chain_reaction_traceability(&inputs, &adversary);
            let detail = format!("{} of {} inputs deduced", result.deduced.len(), result.total_inputs);
            metrics.push(("fraction_traceable".into(), result.fraction_traceable.to_string(), detail));
            p
        }
        Attack::Zkp => {
            let zkp = ZkpCostModel::default();
            let ring = RingCostModel::default();
            let defaults = [
                ("workload", "100".to_string()),
                ("prove_us", zkp.prove_us.to_string()),
                ("verify_us", zkp.verify_us.to_string()),
                ("ring_sign_us", ring.sign_us.to_string()),
                ("ring_verify_us", ring.verify_us.to_string()),
            ];
            let p = Resolved::new(&defaults, params)?;
            let zkp = ZkpCostModel { prove_us: p.get("prove_us")?, verify_us: p.get("verify_us")? };
            let ring = RingCostModel { sign_us: p.get("ring_sign_us")?, verify_us: p.get("ring_verify_us")? };
            let budget = ClearingBudget { slot_us: header.slot_ms * 1000, deadline_slots: header.clearing_deadline };
            for row in zkp_throughput_comparison(p.get("workload")?, &zkp, &ring, budget) {
                let scheme = serde_json::to_value(row.scheme).expect("scheme serializes");
                let first = row.first_violating_workload.map_or_else(|| "none".into(), |w| w.to_string());
                let detail = format!(
                    "worst latency {} us of {} us, first violating workload {first}",
                    row.worst_latency_us, row.deadline_us
                );
                let metric = format!("{}.violates_deadline", scheme.as_str().expect("unit variant"));
                metrics.push((metric, u8::from(row.violates_deadline).to_string(), detail));
            }
            p
        }
    };

    let rows: Vec<AttackRow> = metrics
        .into_iter()
        .map(|(metric, value, detail)| AttackRow {
            config_hash: header.config_hash.clone(),
            trace_sha256: trace_sha256.clone(),
            attack: attack.name().into(),
            params: resolved.canonical(),
            metric,
            value,
            detail,
        })
        .collect();
    store(&dir.join(ATTACKS_FILE), &rows)?;
    Ok(rows)
}

fn store(path: &Path, rows: &[AttackRow]) -> Result<(), CliError> {
    let mut existing = Vec::new();
    if path.exists() {
        let mut r = csv::Reader::from_path(path).map_err(|e| CliError::artifact(path)(e.to_string()))?;
        for rec in r.records() {
            let rec = rec.map_err(|e| CliError::artifact(path)(e.to_string()))?;
            if rec.len() != COLUMNS.len() {
                return Err(CliError::artifact(path)(format!("row with {} columns", rec.len())));
            }
            existing.push(AttackRow {
                config_hash: rec[1].into(),
                trace_sha256: rec[2].into(),
                attack: rec[3].into(),
                params: rec[4].into(),
                metric: rec[5].into(),
                value: rec[6].into(),
                detail: rec[7].into(),
            });
        }
    }
    let key = rows[0].key();
    let mut merged: Vec<AttackRow> = Vec::with_capacity(existing.len() + rows.len());
    let mut placed = false;
    for row in existing {
        if row.key() == key {
            if !placed {
                merged.extend_from_slice(rows);
                placed = true;
            }
        } else {
            merged.push(row);
        }
    }
    if !placed {
        merged.extend_from_slice(rows);
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::artifact(path)(e.to_string()))?;
    w.write_record(COLUMNS).map_err(|e| CliError::artifact(path)(e.to_string()))?;
    for row in &merged {
        w.write_record(row.record()).map_err(|e| CliError::artifact(path)(e.to_string()))?;
    }
    w.flush().map_err(CliError::io(path))
}

pub fn print_rows(rows: &[AttackRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS).expect("in-memory write");
    for r in rows {
        w.write_record(r.record()).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}
