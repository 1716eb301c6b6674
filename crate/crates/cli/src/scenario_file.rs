//! Scenario files: TOML documents mirroring [`Scenario`], with an optional
//! `schema` key and `--set key=value` overrides applied on top.
//!
//! Override keys are dotted paths into the document; array entries are
//! addressed by index, as in `trades.0.power=200`. Values are read as TOML
//! literals and fall back to plain strings. Precedence is flags over file
//! over defaults.

use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use microgrid_core::netsim::Scenario;
use serde::Deserialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use toml_edit::{ImDocument, Item};

use crate::error::{CliError, Located};

pub const SCENARIO_SCHEMA: &str = "microgrid-scenario/1";

/// One `--set key=value` flag.
#[derive(Clone, Debug, PartialEq)]
pub struct Override {
    pub path: String,
    pub value: Value,
}

impl FromStr for Override {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (path, raw) = s.split_once('=').ok_or_else(|| format!("expected KEY=VALUE, got {s:?}"))?;
        let path = path.trim();
        if path.is_empty() || path.split('.').any(str::is_empty) {
            return Err(format!("bad key {path:?}"));
        }
        Ok(Override { path: path.to_string(), value: literal(raw.trim()) })
    }
}

fn literal(raw: &str) -> Value {
    #[derive(Deserialize)]
    struct Holder {
        v: Value,
    }
    toml_edit::de::from_str::<Holder>(&format!("v = {raw}")).map(|h| h.v).unwrap_or_else(|_| Value::String(raw.into()))
}

/// A scenario ready to run.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    /// SHA-256 of the canonical JSON encoding, hex.
    pub config_hash: String,
}

pub fn config_hash(scenario: &Scenario) -> String {
    let canonical = serde_json::to_vec(scenario).expect("scenario serializes");
    hex::encode(Sha256::digest(canonical))
}

pub fn load(path: &Path, overrides: &[Override]) -> Result<LoadedScenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    parse(&path.display().to_string(), &text, overrides)
}

pub fn parse(file: &str, text: &str, overrides: &[Override]) -> Result<LoadedScenario, CliError> {
    let doc = ImDocument::parse(text).map_err(|e| {
        let (line, column) = line_col(text, e.span().map_or(0, |s| s.start));
        CliError::Parse { file: file.into(), line, column, message: e.message().trim().to_string() }
    })?;
    let locate = |field: &str, message: String| Located {
        file: file.into(),
        line: span_of(&doc, field).map(|s| line_col(text, s.start).0),
        field: field.to_string(),
        message,
        from_flag: overrides.iter().any(|o| field == o.path || field.starts_with(&format!("{}.", o.path))),
    };

    let mut file_value: Value = toml_edit::de::from_str(text).map_err(|e| {
        let (line, column) = line_col(text, e.span().map_or(0, |s| s.start));
        CliError::Parse { file: file.into(), line, column, message: e.message().trim().to_string() }
    })?;
    let root = file_value.as_object_mut().expect("a TOML document is a table");
    match root.remove("schema") {
        None => {}
        Some(Value::String(s)) if s == SCENARIO_SCHEMA => {}
        Some(other) => {
            let message = format!("unsupported schema {other}, expected {SCENARIO_SCHEMA:?}");
            return Err(CliError::Invalid(vec![locate("schema", message)]));
        }
    }
    let mut value = serde_json::to_value(Scenario::default()).expect("scenario serializes");
    merge(&mut value, file_value);
    for o in overrides {
        set_path(&mut value, o).map_err(|message| {
            CliError::Invalid(vec![Located {
                file: file.into(),
                line: None,
                field: o.path.clone(),
                message,
                from_flag: true,
            }])
        })?;
    }

    let scenario: Scenario = serde_path_to_error::deserialize(&value).map_err(|e| {
        let field = dotted(&e.path().to_string());
        CliError::Invalid(vec![locate(&field, e.inner().to_string())])
    })?;
    let diagnostics = scenario.validate();
    if !diagnostics.is_empty() {
        let located = diagnostics.into_iter().map(|d| locate(&dotted(&d.field), d.message)).collect();
        return Err(CliError::Invalid(located));
    }
    let config_hash = config_hash(&scenario);
    Ok(LoadedScenario { scenario, config_hash })
}

/// Rewrites `trades[1].power` as `trades.1.power`.
fn dotted(path: &str) -> String {
    path.replace('[', ".").replace(']', "")
}

/// Tables merge key by key; anything else replaces.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(base), Value::Object(over)) => {
            for (k, v) in over {
                match base.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        base.insert(k, v);
                    }
                }
            }
        }
        (base, over) => *base = over,
    }
}

fn set_path(root: &mut Value, o: &Override) -> Result<(), String> {
    let segments: Vec<&str> = o.path.split('.').collect();
    let mut at = root;
    for (depth, seg) in segments.iter().enumerate() {
        let parent = segments[..depth].join(".");
        at = match at {
            Value::Object(map) => map.entry(seg.to_string()).or_insert_with(|| Value::Object(Map::new())),
            Value::Array(items) => {
                let len = items.len();
                let index: usize = seg.parse().map_err(|_| format!("{parent} is a list, {seg:?} is not an index"))?;
                items.get_mut(index).ok_or_else(|| format!("{parent} has {len} entries, no index {index}"))?
            }
            _ => return Err(format!("{parent} is not a table")),
        };
    }
    *at = o.value.clone();
    Ok(())
}

/// Span of the deepest part of `field` present in the document.
fn span_of(doc: &ImDocument<&str>, field: &str) -> Option<Range<usize>> {
    let mut item: &Item = doc.as_item();
    let mut best = None;
    for seg in field.split('.') {
        let next = match seg.parse::<usize>() {
            Ok(i) => item.get(i),
            Err(_) => item.get(seg),
        };
        let Some(next) = next else { break };
        // a key's own position beats its table's
        let key_span = item.as_table_like().and_then(|t| t.key(seg)).and_then(|k| k.span());
        best = key_span.or_else(|| next.span()).or(best);
        item = next;
    }
    best
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

/// The resolved scenario as a TOML document that reloads to the same hash.
pub fn to_toml(loaded: &LoadedScenario) -> String {
    let body = toml_edit::ser::to_string_pretty(&loaded.scenario).expect("scenario serializes");
    format!("# config_hash = {}\nschema = {SCENARIO_SCHEMA:?}\n{body}", loaded.config_hash)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn invalid(text: &str, overrides: &[Override]) -> Vec<Located> {
        match parse("s.toml", text, overrides) {
            Err(CliError::Invalid(v)) => v,
            other => panic!("expected diagnostics, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_the_default_scenario() {
        let loaded = parse("s.toml", "", &[]).unwrap();
        assert_eq!(loaded.scenario, Scenario::default());
        assert_eq!(loaded.config_hash, config_hash(&Scenario::default()));
    }

    #[test]
    fn negative_cover_rate_cites_field_and_line() {
        let d = invalid("seed = 1\n\ncover_rate = -1.0\n", &[]);
        assert_eq!(d.len(), 1);
        assert_eq!((d[0].field.as_str(), d[0].line), ("cover_rate", Some(3)));
    }

    #[test]
    fn nested_fields_and_unknown_keys_are_located() {
        let text = "slots = 30\n\n[[trades]]\nseller = 0\nbuyer = 1\npower = 100\nstart = 4\nend = 5\nunit_price = 1\npost_slot = 1\n\n[[trades]]\nseller = 0\nbuyer = 0\npower = 100\nstart = 4\nend = 5\nunit_price = 1\npost_slot = 1\n";
        let d = invalid(text, &[]);
        assert_eq!(d[0].field, "trades.1.buyer");
        assert_eq!(d[0].line, Some(14));
        let d = invalid("[latency]\nbase_ms = 5\nspeed = 3\n", &[]);
        assert_eq!(d[0].field, "latency.speed");
        assert_eq!(d[0].line, Some(3));
        assert!(d[0].message.contains("unknown field"), "{}", d[0].message);
    }

    #[test]
    fn parse_error_has_position() {
        match parse("s.toml", "seed = 1\nslots = = 2\n", &[]) {
            Err(CliError::Parse { line: 2, column, .. }) => assert!(column > 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overrides_win_and_are_attributed() {
        let set = |s: &str| s.parse::<Override>().unwrap();
        let loaded = parse("s.toml", "seed = 1\n[latency]\nbase_ms = 5\n", &[set("seed=9"), set("latency.jitter_ms=2")])
            .unwrap();
        assert_eq!(loaded.scenario.seed, 9);
        assert_eq!(loaded.scenario.latency.base_ms, 5);
        assert_eq!(loaded.scenario.latency.jitter_ms, 2);
        let d = invalid("", &[set("cover_rate=-2")]);
        assert!(d[0].from_flag);
        assert!(d[0].to_string().contains("--set cover_rate"));
        let d = invalid("", &[set("trades.0.power=3")]);
        assert!(d[0].message.contains("no index 0"));
    }

    #[test]
    fn schema_key_is_checked() {
        parse("s.toml", "schema = \"microgrid-scenario/1\"\n", &[]).unwrap();
        let d = invalid("schema = \"microgrid-scenario/9\"\n", &[]);
        assert_eq!((d[0].field.as_str(), d[0].line), ("schema", Some(1)));
    }

    #[test]
    fn hop_count_beyond_roster() {
        let d = invalid("prosumers = 2\nrelay_routers = 1\nhop_count = 3\n", &[]);
        assert_eq!(d[0].field, "hop_count");
        assert_eq!(d[0].line, Some(3));
        assert!(d[0].message.starts_with("InsufficientRouters"));
    }

    #[test]
    fn resolved_toml_reloads_to_same_hash() {
        let text = "seed = 4\ncover_rate = 1.5\n[random_trades]\ncount = 3\n[[delays]]\ntrade = 1\nfinalize_delay_slots = 3\n";
        let loaded = parse("s.toml", text, &[]).unwrap();
        let again = parse("resolved.toml", &to_toml(&loaded), &[]).unwrap();
        assert_eq!(again, loaded);
    }
}
