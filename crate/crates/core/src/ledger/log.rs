//! Line-delimited JSON event log.
//!
//! The first line is a header naming the schema and the genesis
//! configuration; every following line is one event.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::event::LedgerEvent;
use super::state::LedgerConfig;

pub const LOG_SCHEMA: &str = "microgrid-ledger/1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    schema: String,
    config: LedgerConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported schema {0:?}")]
    Schema(String),
    #[error("empty log")]
    Empty,
}

pub fn write_log<W: Write>(out: W, config: LedgerConfig, events: &[LedgerEvent]) -> Result<(), LogError> {
    write_log_stamped(out, config, None, events)
}

/// [`write_log`] with the hash of the run configuration in the header line.
pub fn write_log_stamped<W: Write>(
    mut out: W,
    config: LedgerConfig,
    config_hash: Option<&str>,
    events: &[LedgerEvent],
) -> Result<(), LogError> {
    let header = Header { schema: LOG_SCHEMA.to_string(), config, config_hash: config_hash.map(str::to_string) };
    serde_json::to_writer(&mut out, &header).map_err(std::io::Error::from)?;
    out.write_all(b"\n")?;
    for e in events {
        serde_json::to_writer(&mut out, e).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_log<R: BufRead>(input: R) -> Result<(LedgerConfig, Vec<LedgerEvent>), LogError> {
    let mut lines = input.lines().enumerate();
    let (_, first) = lines.next().ok_or(LogError::Empty)?;
    let header: Header =
        serde_json::from_str(&first?).map_err(|e| LogError::Parse { line: 1, message: e.to_string() })?;
    if header.schema != LOG_SCHEMA {
        return Err(LogError::Schema(header.schema));
    }
    let mut events = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e = serde_json::from_str(&line).map_err(|e| LogError::Parse { line: i + 1, message: e.to_string() })?;
        events.push(e);
    }
    Ok((header.config, events))
}
