//! Seed and grid sweeps fanned out over worker threads, with artifacts.

use crate::config::{ConfigError, Experiment, RunConfig};
use crate::exec::{execute, MetricsRow, Options, Outcome};
use crate::logfmt::write_log;
use crate::lowerbound::{self, LbRow};
use rayon::prelude::*;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use teamform_core::stats::median;

pub const OUT_ENV: &str = "TEAMFORM_OUT";

/// Output directory: command line, then environment, then config, then `out`.
pub fn out_dir(cli: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    if let Some(p) = cli {
        return p.into();
    }
    if let Some(p) = std::env::var_os(OUT_ENV).filter(|p| !p.is_empty()) {
        return p.into();
    }
    cfg.output.dir.clone().unwrap_or_else(|| "out".into())
}

/// What a worker keeps after its run; logs go straight to disk.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub row: MetricsRow,
    pub violations: Vec<String>,
    pub error: Option<String>,
    pub unique_leader: Option<bool>,
    pub log_path: Option<PathBuf>,
}

#[derive(Debug)]
pub struct BatchReport {
    pub records: Vec<RunRecord>,
    pub metrics_path: PathBuf,
    pub violations_path: Option<PathBuf>,
}

impl BatchReport {
    pub fn failed(&self) -> bool {
        self.records.iter().any(|r| r.row.violations > 0 || r.error.is_some())
    }

    pub fn summary(&self) -> String {
        let rs = &self.records;
        let loads: Vec<f64> = rs.iter().filter_map(|r| r.row.load).collect();
        let p50: Vec<f64> = rs.iter().filter_map(|r| r.row.reaction_p50).collect();
        let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
        let mut s = format!(
            "runs {}  aborted {}  with violations {}  violations {}  teams {}  censored windows {}  median load {}  median reaction p50 {}",
            rs.len(),
            rs.iter().filter(|r| r.error.is_some()).count(),
            rs.iter().filter(|r| r.row.violations > 0).count(),
            rs.iter().map(|r| r.row.violations).sum::<u64>(),
            rs.iter().map(|r| r.row.teams).sum::<u64>(),
            rs.iter().map(|r| r.row.reaction_censored).sum::<u64>(),
            fmt(median(&loads)),
            fmt(median(&p50)),
        );
        let le: Vec<bool> = rs.iter().filter_map(|r| r.unique_leader).collect();
        if !le.is_empty() {
            let k = le.iter().filter(|&&u| u).count();
            s += &format!("  unique leader {k}/{}", le.len());
        }
        s
    }
}

fn log_name(cfg: &RunConfig, seed: u64) -> String {
    format!("{}-n{}-s{}-seed{seed}.jsonl", cfg.experiment.name(), cfg.n, cfg.team_size())
}

fn run_one(cfg: &RunConfig, seed: u64, dir: &Path, log_events: bool) -> Result<RunRecord, ConfigError> {
    let out = execute(cfg, seed, &Options { log_events, ..Options::default() })?;
    let log_path = match &out.log {
        Some(log) => {
            let path = dir.join(log_name(cfg, seed));
            let io = |source| ConfigError::Io { path: path.clone(), source };
            let f = File::create(&path).map_err(io)?;
            write_log(BufWriter::new(f), cfg, seed, log).map_err(io)?;
            Some(path)
        }
        None => None,
    };
    let mut violations: Vec<String> = out
        .probe
        .violations
        .iter()
        .map(|v| format!("n={} sigma={} seed={seed} check={} t={} {}", cfg.n, cfg.team_size(), v.check, v.time, v.detail))
        .collect();
    let hidden = out.probe.violation_count.saturating_sub(out.probe.violations.len() as u64);
    if hidden > 0 {
        violations.push(format!("n={} sigma={} seed={seed} ... {hidden} more not stored", cfg.n, cfg.team_size()));
    }
    let unique_leader = match &out.outcome {
        Outcome::Le(o) => Some(o.unique_leader()),
        _ => None,
    };
    Ok(RunRecord { row: out.row, violations, error: out.error, unique_leader, log_path })
}

/// Runs every grid point for every seed and writes `metrics.csv` (and
/// `violations.txt` when anything fired) under `dir`.
pub fn run_batch(cfg: &RunConfig, seeds: &[u64], dir: &Path, log_events: bool) -> Result<BatchReport, ConfigError> {
    let points = cfg.grid()?;
    fs::create_dir_all(dir).map_err(|source| ConfigError::Io { path: dir.into(), source })?;
    let jobs: Vec<(&RunConfig, u64)> = points.iter().flat_map(|p| seeds.iter().map(move |&s| (p, s))).collect();
    let records = jobs
        .par_iter()
        .map(|&(p, s)| run_one(p, s, dir, log_events))
        .collect::<Result<Vec<_>, _>>()?;
    let metrics_path = dir.join("metrics.csv");
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |e: csv::Error| ConfigError::Io { path: path.clone(), source: e.into() }
    };
    let mut w = csv::Writer::from_path(&metrics_path).map_err(io(&metrics_path))?;
    for r in &records {
        w.serialize(&r.row).map_err(io(&metrics_path))?;
    }
    w.flush().map_err(|source| ConfigError::Io { path: metrics_path.clone(), source })?;
    let bad: Vec<&String> = records
        .iter()
        .flat_map(|r| r.violations.iter().chain(r.error.iter()))
        .collect();
    let violations_path = if bad.is_empty() {
        None
    } else {
        let path = dir.join("violations.txt");
        let io = |source| ConfigError::Io { path: path.clone(), source };
        let mut f = BufWriter::new(File::create(&path).map_err(io)?);
        for line in bad {
            writeln!(f, "{line}").map_err(io)?;
        }
        f.flush().map_err(io)?;
        Some(path)
    };
    Ok(BatchReport { records, metrics_path, violations_path })
}

/// Lower-bound rows for each configured mode, written to `lowerbound.csv`.
pub fn run_lowerbound(cfg: &RunConfig, seed: u64, dir: &Path) -> Result<(Vec<LbRow>, PathBuf), ConfigError> {
    if cfg.experiment != Experiment::Lowerbound {
        return Err(ConfigError::Invalid("not a lowerbound configuration".into()));
    }
    let lb = cfg.lowerbound.as_ref().expect("validated");
    let params = cfg.ce().expect("validated");
    let rows: Vec<LbRow> = lb
        .modes
        .iter()
        .map(|m| {
            let s = lowerbound::run(params, m.mode(), lb.selection.selection(), seed, lb.trials);
            lowerbound::row(params, m.mode(), &s)
        })
        .collect();
    fs::create_dir_all(dir).map_err(|source| ConfigError::Io { path: dir.into(), source })?;
    let path = dir.join("lowerbound.csv");
    let io = |e: csv::Error| ConfigError::Io { path: path.clone(), source: e.into() };
    let mut w = csv::Writer::from_path(&path).map_err(io)?;
    for r in &rows {
        w.serialize(r).map_err(io)?;
    }
    w.flush().map_err(|source| ConfigError::Io { path: path.clone(), source })?;
    Ok((rows, path))
}
