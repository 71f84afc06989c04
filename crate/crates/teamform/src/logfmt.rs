//! JSON-lines event logs: a header carrying the config snapshot and seed,
//! then one object per kernel log record.

use crate::config::RunConfig;
use serde::{Deserialize, Serialize};
use std::borrow::Cow;
use std::io::{BufRead, Write};
use teamform_core::log::LogRecord;
use teamform_core::time::SimTime;

pub const FORMAT: &str = "teamform-log";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub config: RunConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JsonRecord {
    pub t: String,
    pub seq: u64,
    pub kind: String,
    pub node: Option<u32>,
    pub peer: Option<u32>,
    pub msg_type: Option<String>,
    pub tokens: u32,
    pub detail: String,
}

impl From<&LogRecord> for JsonRecord {
    fn from(r: &LogRecord) -> Self {
        JsonRecord {
            t: r.t.to_string(),
            seq: r.seq,
            kind: r.kind.to_string(),
            node: r.node,
            peer: r.peer,
            msg_type: r.msg_type.as_ref().map(|m| m.to_string()),
            tokens: r.tokens,
            detail: r.detail.clone(),
        }
    }
}

impl JsonRecord {
    pub fn to_record(&self) -> Result<LogRecord, String> {
        Ok(LogRecord {
            t: self.t.parse::<SimTime>().map_err(|_| format!("bad time {:?} at seq {}", self.t, self.seq))?,
            seq: self.seq,
            kind: Cow::Owned(self.kind.clone()),
            node: self.node,
            peer: self.peer,
            msg_type: self.msg_type.clone().map(Cow::Owned),
            tokens: self.tokens,
            detail: self.detail.clone(),
        })
    }
}

pub fn header_line(config: &RunConfig, seed: u64) -> String {
    let h = Header { format: FORMAT.into(), version: crate::config::VERSION, seed, config: config.snapshot(seed) };
    serde_json::to_string(&h).expect("header serializes")
}

pub fn record_line(r: &LogRecord) -> String {
    serde_json::to_string(&JsonRecord::from(r)).expect("record serializes")
}

pub fn write_log(mut out: impl Write, config: &RunConfig, seed: u64, records: &[LogRecord]) -> std::io::Result<()> {
    writeln!(out, "{}", header_line(config, seed))?;
    for r in records {
        writeln!(out, "{}", record_line(r))?;
    }
    out.flush()
}

/// A log as read back: the parsed header and the raw record lines.
pub struct LogFile {
    pub header: Header,
    pub lines: Vec<String>,
}

impl LogFile {
    pub fn read(input: impl BufRead) -> Result<Self, String> {
        let mut lines = input.lines();
        let first = lines.next().ok_or("empty log")?.map_err(|e| e.to_string())?;
        let header: Header = serde_json::from_str(&first).map_err(|e| format!("bad header: {e}"))?;
        if header.format != FORMAT {
            return Err(format!("not a {FORMAT} file"));
        }
        let lines = lines.collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
        Ok(LogFile { header, lines: lines.into_iter().filter(|l| !l.trim().is_empty()).collect() })
    }

    pub fn records(&self) -> Result<Vec<LogRecord>, String> {
        self.lines
            .iter()
            .enumerate()
            .map(|(i, l)| {
                serde_json::from_str::<JsonRecord>(l).map_err(|e| format!("line {}: {e}", i + 2))?.to_record()
            })
            .collect()
    }
}

/// Sequence number of a record line, if it parses.
pub fn seq_of(line: &str) -> Option<u64> {
    serde_json::from_str::<JsonRecord>(line).ok().map(|r| r.seq)
}
