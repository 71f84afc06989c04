//! Re-execution of logged runs and offline log checks.

use crate::config::RunConfig;
use crate::exec::{execute, Options};
use crate::logfmt::{record_line, seq_of, LogFile};
use teamform_core::apps::vtf::Palette;
use teamform_core::log::LogRecord;
use teamform_core::monitor::offline::{check_log, LogReport};
use teamform_core::monitor::{CheckSet, Violation};

pub struct ReplayReport {
    /// Seq of the first record that differs; `None` when identical.
    pub divergence: Option<u64>,
    pub original: usize,
    pub replayed: usize,
    pub violation_count: u64,
    pub violations: Vec<Violation>,
    pub error: Option<String>,
    pub offline: LogReport,
    pub table_transitions: u64,
    pub table_checks: u64,
}

impl ReplayReport {
    pub fn identical(&self) -> bool {
        self.divergence.is_none()
    }

    pub fn clean(&self) -> bool {
        self.identical() && self.violation_count == 0 && self.error.is_none() && self.offline.ok()
    }

    pub fn verdict(&self) -> String {
        match self.divergence {
            None => format!("identical, {} violations", self.violation_count),
            Some(seq) => format!(
                "diverged at seq {seq} ({} records logged, {} replayed), {} violations",
                self.original, self.replayed, self.violation_count
            ),
        }
    }
}

/// First index where two line lists differ, as a seq number.
pub fn first_divergence(original: &[String], replayed: &[String]) -> Option<u64> {
    let i = (0..original.len().max(replayed.len())).find(|&i| original.get(i) != replayed.get(i))?;
    let line = original.get(i).or(replayed.get(i))?;
    Some(seq_of(line).unwrap_or(i as u64))
}

fn sigma_lookup(cfg: &RunConfig) -> impl Fn(u16) -> u32 {
    let sigmas: Vec<u32> = match cfg.sigma_vec.clone().map(Palette::new) {
        Some(Ok(p)) => p.rules().iter().map(|r| r.sigma()).collect(),
        _ => vec![cfg.team_size()],
    };
    move |i| sigmas.get(i as usize).copied().unwrap_or(2)
}

/// Re-executes the run described by the header and compares logs.
pub fn replay(log: &LogFile, checks: CheckSet) -> Result<ReplayReport, String> {
    let cfg = &log.header.config;
    cfg.validate().map_err(|e| e.to_string())?;
    let seed = log.header.seed;
    let out = execute(cfg, seed, &Options { log_events: true, checks: Some(checks), record: false }).map_err(|e| e.to_string())?;
    let records: Vec<LogRecord> = out.log.unwrap_or_default();
    let replayed: Vec<String> = records.iter().map(record_line).collect();
    let offline = check_log(&records, sigma_lookup(cfg));
    Ok(ReplayReport {
        divergence: first_divergence(&log.lines, &replayed),
        original: log.lines.len(),
        replayed: replayed.len(),
        violation_count: out.probe.violation_count,
        violations: out.probe.violations,
        error: out.error,
        offline,
        table_transitions: out.probe.metrics.table_transitions,
        table_checks: out.probe.metrics.table_checks,
    })
}

/// Channel-layer conformance for a logged run: the logged records are
/// checked offline, and the run is re-executed with the table checker on,
/// which also confirms the log is the one the configuration produces.
pub fn check_tables(log: &LogFile) -> Result<ReplayReport, String> {
    let logged = log.records()?;
    let mut r = replay(log, CheckSet { tables: true, ..CheckSet::light() })?;
    r.offline = check_log(&logged, sigma_lookup(&log.header.config));
    Ok(r)
}
