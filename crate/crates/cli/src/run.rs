//! The `run` and `report` commands and the artifacts they share.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use microgrid_core::ledger::{check_invariants, read_log, write_log_stamped, DeadlineViolation, LedgerConfig, LedgerEvent};
use microgrid_core::netsim::{compute_metrics, read_trace, run_with, write_trace, MetricsReport, RunOptions, RunHeader, Scenario, TraceEvent};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::scenario_file::{to_toml, LoadedScenario};

pub const REPORT_SCHEMA: &str = "microgrid-report/1";
pub const TRACE_FILE: &str = "trace.jsonl";
pub const LEDGER_FILE: &str = "ledger.jsonl";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const REPORT_FILE: &str = "report.json";
pub const SCENARIO_FILE: &str = "scenario.toml";

/// Machine-readable outcome of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub config_hash: String,
    pub seed: u64,
    pub scenario: Scenario,
    pub metrics: MetricsReport,
    pub trades: usize,
    pub settled: usize,
    pub ledger_digest: String,
    /// First invariant failure, if any.
    pub invariant_failure: Option<String>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.invariant_failure.is_none() && self.metrics.clearing.violations.is_empty()
    }
}

/// What `report` can rebuild from a run directory without the scenario.
pub struct Outcome {
    pub header: RunHeader,
    pub metrics: MetricsReport,
    pub trades: usize,
    pub settled: usize,
    pub ledger_digest: String,
    pub invariant_failure: Option<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.invariant_failure.is_none() && self.metrics.clearing.violations.is_empty()
    }
}

fn ledger_outcome(config: LedgerConfig, events: &[LedgerEvent]) -> (usize, usize, String, Option<String>) {
    let mut trades = 0;
    let mut settled = 0;
    for e in events {
        match e {
            LedgerEvent::AcceptOffer { .. } => trades += 1,
            LedgerEvent::SettleTrade { .. } => settled += 1,
            _ => {}
        }
    }
    match check_invariants(config, events) {
        Ok(r) => (trades, settled, hex::encode(r.final_digest), None),
        Err(e) => (trades, settled, String::new(), Some(e.to_string())),
    }
}

pub fn run_command(loaded: &LoadedScenario, out: &Path) -> Result<RunReport, CliError> {
    std::fs::create_dir_all(out).map_err(CliError::io(out))?;
    let options = RunOptions { config_hash: loaded.config_hash.clone(), record_hops: false };
    let result = run_with(&loaded.scenario, &options)?;

    let path = out.join(TRACE_FILE);
    let mut w = BufWriter::new(File::create(&path).map_err(CliError::io(&path))?);
    write_trace(&mut w, &result.trace).and_then(|_| w.flush()).map_err(CliError::io(&path))?;

    let path = out.join(LEDGER_FILE);
    let mut w = BufWriter::new(File::create(&path).map_err(CliError::io(&path))?);
    write_log_stamped(&mut w, result.ledger.config(), Some(&loaded.config_hash), result.ledger.events())
        .map_err(|e| e.to_string())
        .and_then(|_| w.flush().map_err(|e| e.to_string()))
        .map_err(CliError::artifact(&path))?;

    let (trades, settled, ledger_digest, invariant_failure) =
        ledger_outcome(result.ledger.config(), result.ledger.events());
    let report = RunReport {
        schema: REPORT_SCHEMA.into(),
        config_hash: loaded.config_hash.clone(),
        seed: loaded.scenario.seed,
        scenario: loaded.scenario.clone(),
        metrics: result.metrics.clone(),
        trades,
        settled,
        ledger_digest,
        invariant_failure,
    };
    let header = result.header().expect("trace starts with a header").clone();
    let outcome = Outcome {
        header,
        metrics: report.metrics.clone(),
        trades,
        settled,
        ledger_digest: report.ledger_digest.clone(),
        invariant_failure: report.invariant_failure.clone(),
    };

    write_file(&out.join(METRICS_FILE), metrics_csv(&outcome).as_bytes())?;
    write_file(&out.join(SUMMARY_FILE), summary(&outcome).as_bytes())?;
    write_file(&out.join(SCENARIO_FILE), to_toml(loaded).as_bytes())?;
    let json = serde_json::to_vec_pretty(&report).expect("report serializes");
    write_file(&out.join(REPORT_FILE), &json)?;
    Ok(report)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(CliError::io(path))
}

pub fn read_run_trace(dir: &Path) -> Result<(PathBuf, Vec<TraceEvent>), CliError> {
    let path = dir.join(TRACE_FILE);
    if !path.is_file() {
        return Err(CliError::TraceMissing(dir.to_path_buf()));
    }
    let file = File::open(&path).map_err(CliError::io(&path))?;
    let trace = read_trace(BufReader::new(file)).map_err(|e| CliError::Artifact { path: path.clone(), message: e.to_string() })?;
    Ok((path, trace))
}

pub fn header_of<'a>(path: &Path, trace: &'a [TraceEvent]) -> Result<&'a RunHeader, CliError> {
    match trace.first() {
        Some(TraceEvent::Header(h)) => Ok(h),
        _ => Err(CliError::Artifact { path: path.to_path_buf(), message: "trace does not start with a header".into() }),
    }
}

/// Rebuilds the outcome of a finished run from its trace and ledger log.
pub fn report_command(dir: &Path) -> Result<Outcome, CliError> {
    let (trace_path, trace) = read_run_trace(dir)?;
    let header = header_of(&trace_path, &trace)?.clone();
    let metrics = compute_metrics(&trace).map_err(|e| CliError::Artifact { path: trace_path, message: e.to_string() })?;
    let path = dir.join(LEDGER_FILE);
    let file = File::open(&path).map_err(CliError::io(&path))?;
    let (config, events) = read_log(BufReader::new(file)).map_err(|e| CliError::artifact(&path)(e.to_string()))?;
    let (trades, settled, ledger_digest, invariant_failure) = ledger_outcome(config, &events);
    Ok(Outcome { header, metrics, trades, settled, ledger_digest, invariant_failure })
}

pub fn violation_line(v: &DeadlineViolation, deadline: u64) -> String {
    match v.cleared_slot {
        Some(c) => format!(
            "trade {} posted in slot {} cleared in slot {c}: {} slots, deadline {deadline}",
            v.trade.0, v.posted_slot, v.latency
        ),
        None => format!(
            "trade {} posted in slot {} never cleared: {} slots open, deadline {deadline}",
            v.trade.0, v.posted_slot, v.latency
        ),
    }
}

pub fn summary(o: &Outcome) -> String {
    let h = &o.header;
    let m = &o.metrics;
    let mut s = String::new();
    let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"));
    let _ = writeln!(s, "schema: {REPORT_SCHEMA}");
    let _ = writeln!(s, "config_hash: {}", h.config_hash);
    let _ = writeln!(s, "seed: {}", h.seed);
    let _ = writeln!(s, "final slot: {}", m.final_slot);
    let _ = writeln!(s, "trades: {} accepted, {} settled", o.trades, o.settled);
    let _ = writeln!(s, "deadline violations: {}", m.clearing.violations.len());
    for v in &m.clearing.violations {
        let _ = writeln!(s, "  {}", violation_line(v, h.clearing_deadline));
    }
    match &o.invariant_failure {
        None => {
            let _ = writeln!(s, "invariants: ok, ledger digest {}", o.ledger_digest);
        }
        Some(e) => {
            let _ = writeln!(s, "invariants: FAILED: {e}");
        }
    }
    let failed = if m.failed_demand.is_empty() {
        "none".to_string()
    } else {
        m.failed_demand.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
    };
    let _ = writeln!(s, "failed demand entries: {failed}");
    let _ = writeln!(
        s,
        "messages: {} sent, {} real delivered, {} cover delivered",
        m.messages_sent, m.real_delivered, m.cover_delivered
    );
    let _ = writeln!(s, "cells: {} sent, {} dropped", m.cells_sent, m.cells_dropped);
    let _ = writeln!(s, "mean sender entropy (bits): {}", opt(m.mean_entropy_bits));
    let _ = writeln!(s, "timing attack success: {}", opt(m.timing_attack_success));
    let _ = writeln!(s, "result: {}", if o.passed() { "PASS" } else { "FAIL" });
    s
}

pub fn metrics_csv(o: &Outcome) -> String {
    let m = &o.metrics;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
    let rows: Vec<(&str, String)> = vec![
        ("final_slot", m.final_slot.to_string()),
        ("trades_accepted", o.trades.to_string()),
        ("trades_settled", o.settled.to_string()),
        ("deadline_violations", m.clearing.violations.len().to_string()),
        ("invariants_ok", u8::from(o.invariant_failure.is_none()).to_string()),
        ("failed_demand", m.failed_demand.len().to_string()),
        ("messages_sent", m.messages_sent.to_string()),
        ("real_delivered", m.real_delivered.to_string()),
        ("cover_delivered", m.cover_delivered.to_string()),
        ("cells_sent", m.cells_sent.to_string()),
        ("cells_dropped", m.cells_dropped.to_string()),
        ("bytes_sent", m.bytes_sent.values().sum::<u64>().to_string()),
        ("mean_entropy_bits", opt(m.mean_entropy_bits)),
        ("timing_attack_success", opt(m.timing_attack_success)),
    ];
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["schema", "config_hash", "seed", "metric", "value"]).expect("in-memory write");
    for (metric, value) in rows {
        let seed = o.header.seed.to_string();
        w.write_record([REPORT_SCHEMA, &o.header.config_hash, &seed, metric, &value]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}
