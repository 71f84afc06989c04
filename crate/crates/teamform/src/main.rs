use clap::{Args, Parser, Subcommand};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use teamform::batch::{out_dir, run_batch, run_lowerbound};
use teamform::config::{Experiment, LowerboundCfg, ModeName, Policy, RunConfig, Seeds, SelectionName};
use teamform::logfmt::LogFile;
use teamform::replay::{check_tables, replay, ReplayReport};
use teamform::ConfigError;
use teamform_core::monitor::CheckSet;

const OK: u8 = 0;
const VIOLATIONS: u8 = 1;
const CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "teamform", version, about = "Team formation simulator and experiment driver")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment for one seed or a seed range.
    Run(RunArgs),
    /// Run a seed range (and the config's grid) in parallel and summarize.
    Sweep(RunArgs),
    /// Re-execute a JSONL log and compare it byte for byte.
    Replay {
        log: PathBuf,
    },
    /// Channel-layer conformance of a JSONL log.
    CheckTables {
        log: PathBuf,
    },
    /// Central-entity Monte Carlo.
    Lowerbound(LbArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Inclusive range, `a..b`.
    #[arg(long)]
    seeds: Option<Seeds>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    log_events: bool,
    #[arg(long)]
    policy: Option<Policy>,
}

#[derive(Args)]
struct LbArgs {
    #[arg(long, conflicts_with_all = ["n", "sigma", "f"])]
    config: Option<PathBuf>,
    #[arg(long, requires_all = ["sigma", "f"])]
    n: Option<u32>,
    #[arg(long)]
    sigma: Option<u32>,
    #[arg(long)]
    f: Option<u32>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, value_parser = ["bernoulli", "mechanistic"])]
    mode: Option<String>,
    #[arg(long, value_parser = ["largest", "smallest", "random"])]
    selection: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn config_error(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(CONFIG)
}

fn load(args: &RunArgs) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = Some(s);
        cfg.seeds = None;
    }
    if let Some(r) = args.seeds {
        cfg.seeds = Some(r);
    }
    if let Some(p) = args.policy {
        cfg.policy = p;
    }
    if args.log_events {
        cfg.output.log_events = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_run(args: RunArgs, sweep: bool) -> ExitCode {
    let cfg = match load(&args) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    let dir = out_dir(args.out.as_deref(), &cfg);
    if cfg.experiment == Experiment::Lowerbound {
        return lowerbound(&cfg, cfg.seed.unwrap_or(0), &dir);
    }
    if sweep && cfg.seeds.is_none() && cfg.sweep.is_none() {
        return config_error("sweep needs --seeds, seeds in the config or a [sweep] grid");
    }
    let seeds = cfg.seed_list();
    let report = match run_batch(&cfg, &seeds, &dir, cfg.output.log_events) {
        Ok(r) => r,
        Err(e) => return config_error(e),
    };
    if !sweep && report.records.len() == 1 {
        let r = &report.records[0];
        println!(
            "seed {}: teams {}  messages {}  violations {}{}",
            r.row.seed,
            r.row.teams,
            r.row.messages_total,
            r.row.violations,
            r.error.as_ref().map(|e| format!("  aborted: {e}")).unwrap_or_default()
        );
    } else {
        println!("{}", report.summary());
    }
    println!("metrics: {}", report.metrics_path.display());
    for r in report.records.iter().filter_map(|r| r.log_path.as_ref()).take(1) {
        println!("logs: {}", r.parent().unwrap_or(Path::new(".")).display());
    }
    if report.failed() {
        if let Some(p) = &report.violations_path {
            println!("violation report: {}", p.display());
        }
        return ExitCode::from(VIOLATIONS);
    }
    ExitCode::from(OK)
}

fn lowerbound(cfg: &RunConfig, seed: u64, dir: &Path) -> ExitCode {
    let (rows, path) = match run_lowerbound(cfg, seed, dir) {
        Ok(x) => x,
        Err(e) => return config_error(e),
    };
    let mut ok = true;
    for r in &rows {
        let tail = match r.tail_holds() {
            None => "tail n/a (mu > sigma/8)".to_string(),
            Some(h) => format!("tail {:.3e} <= {:.3e}: {}", r.tail_emp, r.tail_bound.unwrap_or(f64::NAN), if h { "ok" } else { "FAIL" }),
        };
        println!(
            "{} n={} sigma={} f={} p={:.4} trials={}: P[H=0] {:.4e} (exact {:.4e}), hit rate {:.4}, {}  {}",
            r.mode,
            r.n,
            r.sigma,
            r.f,
            r.p,
            r.trials,
            r.p_no_hit_emp,
            r.p_no_hit_exact,
            r.hit_rate,
            tail,
            if r.passes() { "PASS" } else { "FAIL" }
        );
        ok &= r.passes();
    }
    println!("lowerbound: {}", path.display());
    ExitCode::from(if ok { OK } else { VIOLATIONS })
}

fn cmd_lowerbound(a: LbArgs) -> ExitCode {
    let mut cfg = match &a.config {
        Some(p) => match RunConfig::load(p) {
            Ok(c) => c,
            Err(e) => return config_error(e),
        },
        None => {
            let Some(n) = a.n else { return config_error("lowerbound needs --config or --n, --sigma and --f") };
            let mut c = RunConfig::new(Experiment::Lowerbound, n);
            c.sigma = a.sigma;
            c.lowerbound = Some(LowerboundCfg {
                f: a.f.unwrap_or(0),
                trials: 1_000_000,
                modes: vec![ModeName::Bernoulli, ModeName::Mechanistic],
                selection: SelectionName::Largest,
            });
            c
        }
    };
    if cfg.experiment != Experiment::Lowerbound {
        return config_error("config is not a lowerbound experiment");
    }
    if let Some(lb) = cfg.lowerbound.as_mut() {
        if let Some(t) = a.trials {
            lb.trials = t;
        }
        match a.mode.as_deref() {
            Some("bernoulli") => lb.modes = vec![ModeName::Bernoulli],
            Some("mechanistic") => lb.modes = vec![ModeName::Mechanistic],
            _ => {}
        }
        match a.selection.as_deref() {
            Some("smallest") => lb.selection = SelectionName::Smallest,
            Some("random") => lb.selection = SelectionName::Random,
            Some("largest") => lb.selection = SelectionName::Largest,
            _ => {}
        }
    }
    if let Err(e) = cfg.validate() {
        return config_error(e);
    }
    let dir = out_dir(a.out.as_deref(), &cfg);
    lowerbound(&cfg, a.seed.or(cfg.seed).unwrap_or(0), &dir)
}

fn read_log(path: &Path) -> Result<LogFile, String> {
    let f = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    LogFile::read(BufReader::new(f))
}

fn print_report(r: &ReplayReport) {
    for v in &r.violations {
        println!("violation {} at t={}: {}", v.check, v.time, v.detail);
    }
    if let Some(e) = &r.error {
        println!("run aborted: {e}");
    }
    for i in &r.offline.issues {
        println!("log issue: {i}");
    }
}

fn cmd_replay(path: &Path, tables_only: bool) -> ExitCode {
    let log = match read_log(path) {
        Ok(l) => l,
        Err(e) => return config_error(e),
    };
    let r = if tables_only { check_tables(&log) } else { replay(&log, CheckSet::all()) };
    let r = match r {
        Ok(r) => r,
        Err(e) => return config_error(e),
    };
    print_report(&r);
    if tables_only {
        println!(
            "{} table transitions, {} pair checks, {} violations, log {}",
            r.table_transitions,
            r.table_checks,
            r.violation_count,
            if r.identical() { "matches its configuration".to_string() } else { r.verdict() }
        );
    } else {
        println!("{}", r.verdict());
    }
    ExitCode::from(if r.clean() { OK } else { VIOLATIONS })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { CONFIG } else { OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.cmd {
        Cmd::Run(a) => cmd_run(a, false),
        Cmd::Sweep(a) => cmd_run(a, true),
        Cmd::Replay { log } => cmd_replay(&log, false),
        Cmd::CheckTables { log } => cmd_replay(&log, true),
        Cmd::Lowerbound(a) => cmd_lowerbound(a),
    }
}
