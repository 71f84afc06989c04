//! Executes one configured run and summarizes it.

use crate::config::{ConfigError, DecisionEntry, Experiment, RunConfig, Time};
use serde::Serialize;
use std::collections::BTreeMap;
use teamform_core::adversary::{Adversary, Decision, InjectionSpec, Target};
use teamform_core::app::Application;
use teamform_core::apps::dtc::{self, DtcApp, DtcOutcome};
use teamform_core::apps::le::{self, LeApp, LeOutcome, LeRun};
use teamform_core::apps::vtf::{self, Palette, VtfApp, VtfOutcome};
use teamform_core::kernel::{World, WorldConfig};
use teamform_core::log::LogRecord;
use teamform_core::monitor::{CheckSet, Probe};
use teamform_core::stats::quantile;
use teamform_core::time::SimTime;

/// Message names per layer; everything else is application or trace traffic.
pub const CHANNEL_LAYER: [&str; 7] = ["Busy", "TokensUpdate", "NotBusy", "ChannelAck", "BusyAck", "Channel", "NoChannel"];
pub const PRINCIPAL_LAYER: [&str; 5] = ["TokensPlease", "Waiting", "NoTransport", "Transport", "GoOn"];

/// One CSV row per run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRow {
    pub seed: u64,
    pub n: u32,
    pub sigma: u32,
    pub policy: &'static str,
    pub messages_total: u64,
    /// Messages per adversary-injected token; empty when nothing was injected.
    pub load: Option<f64>,
    pub reaction_p50: Option<f64>,
    pub reaction_p95: Option<f64>,
    pub teams: u64,
    pub violations: u64,
    pub experiment: &'static str,
    pub channel_messages: u64,
    pub principal_messages: u64,
    pub injected: u64,
    pub reaction_samples: usize,
    pub reaction_censored: u64,
    pub end_time: f64,
    pub aborted: bool,
}

#[derive(Clone, Debug, Default)]
pub struct WorldSummary {
    pub messages_total: u64,
    pub by_type: BTreeMap<String, u64>,
    pub channel_messages: u64,
    pub principal_messages: u64,
    /// Adversary injections over all instances.
    pub injected: u64,
    pub skipped_injections: u64,
    pub teams: u64,
    pub deleted: u64,
    pub censored: bool,
    pub end_time: f64,
    pub last_injection: f64,
    pub horizon: f64,
    /// Busy primaries of instance 0 and their token counts at the end.
    pub holders: Vec<(u32, u32)>,
    pub audit_ok: bool,
    pub activations: u64,
}

#[derive(Clone, Debug)]
pub enum Outcome {
    Tf,
    Le(LeOutcome),
    Vtf(VtfOutcome),
    Dtc(DtcOutcome),
}

pub struct RunOutput {
    pub seed: u64,
    pub config: RunConfig,
    pub row: MetricsRow,
    pub probe: Probe,
    pub summary: WorldSummary,
    pub outcome: Outcome,
    pub log: Option<Vec<LogRecord>>,
    /// Set when the kernel aborted the run.
    pub error: Option<String>,
    /// Adversary decisions, when recording was requested.
    pub decisions: Option<Vec<DecisionEntry>>,
}

impl RunOutput {
    pub fn ok(&self) -> bool {
        self.error.is_none() && self.probe.violation_count == 0
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Options {
    pub log_events: bool,
    /// Overrides the configured checks.
    pub checks: Option<CheckSet>,
    /// Record adversary decisions for later scripted replay.
    pub record: bool,
}

/// Adversary injection schedule: explicit entries then generated load.
pub fn schedule(cfg: &RunConfig) -> Vec<InjectionSpec> {
    let mut out: Vec<InjectionSpec> = cfg
        .injections
        .iter()
        .map(|e| InjectionSpec { time: e.time.0, target: e.target(), count: e.count, inst: e.color })
        .collect();
    if let Some(l) = &cfg.load {
        let mut t = l.start.0;
        let mut push = |color: u16, k: u32, out: &mut Vec<InjectionSpec>| {
            for _ in 0..k {
                out.push(InjectionSpec { time: t, target: Target::AnyNonFaulty, count: 1, inst: color });
                t = t + l.spacing.0;
            }
        };
        push(0, l.tokens, &mut out);
        for (c, &k) in l.colors.iter().enumerate() {
            push(c as u16, k, &mut out);
        }
    }
    out
}

pub fn last_injection(sched: &[InjectionSpec]) -> SimTime {
    sched.iter().map(|s| s.time).max().unwrap_or(SimTime::ZERO)
}

/// Configured horizon, or the last injection plus `100 (sigma + ln n)`.
pub fn horizon(cfg: &RunConfig, sched: &[InjectionSpec]) -> SimTime {
    if let Some(t) = cfg.max_sim_time {
        return t.0;
    }
    let extra = 100.0 * (cfg.team_size() as f64 + (cfg.n as f64).ln());
    last_injection(sched) + SimTime::from_f64(extra)
}

fn adversary(cfg: &RunConfig, seed: u64) -> Adversary {
    match &cfg.script {
        Some(script) => Adversary::scripted(
            script
                .iter()
                .map(|d| match *d {
                    DecisionEntry::Delay { src, dst, ticks } => Decision::Delay { src, dst, ticks },
                    DecisionEntry::Inject { time, node, count } => Decision::Inject { time: time.0, node, count },
                    DecisionEntry::Toggle { time, node } => Decision::Toggle { time: time.0, node },
                })
                .collect(),
        ),
        None => Adversary::new(cfg.policy.kind(), seed),
    }
}

fn base_world(cfg: &RunConfig, seed: u64, sched: &[InjectionSpec], log_events: bool) -> WorldConfig {
    let mut w = WorldConfig::tf(cfg.n, cfg.sigma.unwrap_or(2), seed);
    w.c = cfg.c;
    w.epsilon = cfg.epsilon;
    w.fragile = cfg.fragile;
    w.toggles = cfg.toggles;
    w.initial = cfg.initial.status();
    w.trace = cfg.trace;
    w.mutation = cfg.mutation.mutation();
    w.max_time = horizon(cfg, sched);
    w.log_events = log_events;
    w
}

struct Driven<A: Application> {
    world: Option<World<A>>,
    probe: Probe,
    error: Option<String>,
    decisions: Option<Vec<DecisionEntry>>,
}

fn drive<A: Application>(wc: WorldConfig, mut adv: Adversary, sched: Vec<InjectionSpec>, app: A, checks: CheckSet, record: bool) -> Driven<A> {
    let mut probe = Probe::new(checks);
    if record {
        adv.start_recording();
    }
    match World::new(wc, adv, sched, app) {
        Err(e) => Driven { world: None, probe, error: Some(e.to_string()), decisions: None },
        Ok(mut w) => {
            w.run(|w, s| probe.observe(w, s));
            probe.finish(&w);
            let error = w.error.as_ref().map(|e| e.to_string());
            let decisions = record.then(|| w.adversary.take_recording().into_iter().map(entry).collect());
            Driven { world: Some(w), probe, error, decisions }
        }
    }
}

fn entry(d: Decision) -> DecisionEntry {
    match d {
        Decision::Delay { src, dst, ticks } => DecisionEntry::Delay { src, dst, ticks },
        Decision::Inject { time, node, count } => DecisionEntry::Inject { time: Time(time), node, count },
        Decision::Toggle { time, node } => DecisionEntry::Toggle { time: Time(time), node },
    }
}

fn summarize<A: Application>(w: &World<A>, sched: &[InjectionSpec]) -> WorldSummary {
    let by_type: BTreeMap<String, u64> = w.messages_by_type.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    let layer = |names: &[&str]| names.iter().map(|n| by_type.get(*n).copied().unwrap_or(0)).sum();
    let injected = w.ledgers.iter().map(|l| l.adversary).sum();
    let holders = (0..w.n())
        .filter_map(|v| {
            let t = w.nodes[v as usize][0].primary.tok.total();
            (t > 0).then_some((v, t))
        })
        .collect();
    WorldSummary {
        messages_total: w.messages_total,
        channel_messages: layer(&CHANNEL_LAYER),
        principal_messages: layer(&PRINCIPAL_LAYER),
        by_type,
        injected,
        skipped_injections: sched.iter().map(|x| x.count as u64).sum::<u64>().saturating_sub(injected),
        teams: w.ledgers.iter().map(|l| l.teams).sum(),
        deleted: w.ledgers.iter().map(|l| l.deleted).sum(),
        censored: w.censored,
        end_time: w.now().as_f64(),
        last_injection: last_injection(sched).as_f64(),
        horizon: w.cfg.max_time.as_f64(),
        holders,
        audit_ok: (0..w.ledgers.len()).all(|i| w.audit(i as u16).balances()),
        activations: w.activations,
    }
}

fn finish<A: Application>(
    cfg: &RunConfig,
    seed: u64,
    d: Driven<A>,
    sched: &[InjectionSpec],
    outcome: impl FnOnce(&World<A>) -> Outcome,
) -> RunOutput {
    let (summary, outcome, log) = match &d.world {
        Some(w) => {
            let log = w.cfg.log_events.then(|| w.log.clone());
            (summarize(w, sched), outcome(w), log)
        }
        None => (WorldSummary::default(), Outcome::Tf, None),
    };
    let r = &d.probe.metrics.reaction;
    let row = MetricsRow {
        seed,
        n: cfg.n,
        sigma: cfg.team_size(),
        policy: cfg.policy.kind().name(),
        messages_total: summary.messages_total,
        load: (summary.injected > 0).then(|| summary.messages_total as f64 / summary.injected as f64),
        reaction_p50: quantile(r, 0.5),
        reaction_p95: quantile(r, 0.95),
        teams: summary.teams,
        violations: d.probe.violation_count,
        experiment: cfg.experiment.name(),
        channel_messages: summary.channel_messages,
        principal_messages: summary.principal_messages,
        injected: summary.injected,
        reaction_samples: r.len(),
        reaction_censored: d.probe.metrics.reaction_censored,
        end_time: summary.end_time,
        aborted: d.error.is_some(),
    };
    RunOutput { seed, config: cfg.snapshot(seed), row, probe: d.probe, summary, outcome, log, error: d.error, decisions: d.decisions }
}

/// Runs one seed of a validated, non-lowerbound configuration.
pub fn execute(cfg: &RunConfig, seed: u64, opts: &Options) -> Result<RunOutput, ConfigError> {
    let sched = schedule(cfg);
    let checks = opts.checks.unwrap_or_else(|| cfg.checks.set());
    let adv = adversary(cfg, seed);
    match cfg.experiment {
        Experiment::Tf | Experiment::Conformance => {
            let mut wc = base_world(cfg, seed, &sched, opts.log_events);
            let checks = if cfg.experiment == Experiment::Conformance {
                wc.trace = true;
                opts.checks.unwrap_or(CheckSet::all())
            } else {
                checks
            };
            let d = drive(wc, adv, sched.clone(), (), checks, opts.record);
            Ok(finish(cfg, seed, d, &sched, |_| Outcome::Tf))
        }
        Experiment::Dtc => {
            let wc = base_world(cfg, seed, &sched, opts.log_events);
            let d = drive(wc, adv, sched.clone(), DtcApp::default(), checks, opts.record);
            Ok(finish(cfg, seed, d, &sched, |w| Outcome::Dtc(dtc::outcome(w))))
        }
        Experiment::Vtf => {
            let palette = Palette::new(cfg.sigma_vec.clone().unwrap_or_default())
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            let mut wc = base_world(cfg, seed, &sched, opts.log_events);
            wc.rules = palette.rules();
            let d = drive(wc, adv, sched.clone(), VtfApp::new(palette), checks, opts.record);
            Ok(finish(cfg, seed, d, &sched, |w| Outcome::Vtf(vtf::outcome(w))))
        }
        Experiment::LeImplicit | Experiment::LeExplicit => {
            let lc = cfg.le();
            lc.validate().map_err(|e| ConfigError::Invalid(format!("leader election: {e:?}")))?;
            let run = LeRun { policy: cfg.policy.kind(), fragile: cfg.fragile, toggles: cfg.toggles, checks };
            let mut wc = le::world_config(&lc, seed, &run);
            wc.c = cfg.c;
            wc.trace = cfg.trace;
            wc.mutation = cfg.mutation.mutation();
            wc.max_time = horizon(cfg, &sched);
            wc.log_events = opts.log_events;
            let d = drive(wc, adv, sched.clone(), LeApp::new(lc), checks, opts.record);
            Ok(finish(cfg, seed, d, &sched, |w| Outcome::Le(le::outcome(w))))
        }
        Experiment::Lowerbound => Err(ConfigError::Invalid("the lowerbound experiment is not a simulation run".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Load, Policy};

    fn tf(n: u32, sigma: u32, tokens: u32) -> RunConfig {
        let mut c = RunConfig::new(Experiment::Tf, n);
        c.sigma = Some(sigma);
        c.load = Some(Load { tokens, start: Time::default(), spacing: Time(SimTime::from_f64(0.5)), colors: vec![] });
        c
    }

    #[test]
    fn happy_path_tf() {
        let c = tf(32, 3, 7);
        c.validate().unwrap();
        let o = execute(&c, 7, &Options::default()).unwrap();
        assert!(o.ok(), "{:?}", o.probe.violations);
        assert_eq!(o.row.teams, 2);
        assert_eq!(o.summary.injected, 7);
        assert_eq!(o.summary.holders.len(), 1);
        assert_eq!(o.summary.holders[0].1, 1);
        assert!(o.summary.audit_ok);
        assert_eq!(o.row.load, Some(o.row.messages_total as f64 / 7.0));
        assert!(o.row.channel_messages + o.row.principal_messages <= o.row.messages_total);
    }

    #[test]
    fn generated_load_is_evenly_spaced() {
        let c = tf(8, 2, 3);
        let s = schedule(&c);
        let t: Vec<String> = s.iter().map(|x| x.time.to_string()).collect();
        assert_eq!(t, ["0", "1/2", "1"]);
        let h = horizon(&c, &s).as_f64();
        assert!((h - (1.0 + 100.0 * (2.0 + 8f64.ln()))).abs() < 1e-5);
    }

    #[test]
    fn logs_only_when_asked() {
        let c = tf(8, 2, 2);
        assert!(execute(&c, 1, &Options::default()).unwrap().log.is_none());
        let o = execute(&c, 1, &Options { log_events: true, ..Options::default() }).unwrap();
        assert!(!o.log.unwrap().is_empty());
    }

    #[test]
    fn every_app_runs() {
        let mut v = RunConfig::new(Experiment::Vtf, 16);
        v.sigma_vec = Some(vec![2, 3]);
        v.load = Some(Load { tokens: 0, start: Time::default(), spacing: Time(SimTime::UNIT), colors: vec![2, 3] });
        v.validate().unwrap();
        let o = execute(&v, 3, &Options::default()).unwrap();
        let Outcome::Vtf(out) = &o.outcome else { panic!() };
        assert_eq!(out.teams.len(), 1);

        let mut d = tf(16, 3, 7);
        d.experiment = Experiment::Dtc;
        let o = execute(&d, 3, &Options::default()).unwrap();
        let Outcome::Dtc(out) = &o.outcome else { panic!() };
        assert_eq!(out.alarms.len(), 2);

        let mut l = RunConfig::new(Experiment::LeImplicit, 64);
        l.epsilon = 0.25;
        l.c_le = 4.0;
        l.validate().unwrap();
        let o = execute(&l, 3, &Options::default()).unwrap();
        assert!(matches!(o.outcome, Outcome::Le(_)));
        assert!(o.row.load.is_none());
    }

    #[test]
    fn recorded_decisions_replay_verbatim() {
        let mut c = tf(16, 3, 8);
        let rec = execute(&c, 4, &Options { log_events: true, record: true, ..Options::default() }).unwrap();
        c.policy = Policy::Scripted;
        c.script = rec.decisions.clone();
        c.validate().unwrap();
        let again = execute(&c, 4, &Options { log_events: true, ..Options::default() }).unwrap();
        assert!(again.error.is_none(), "{:?}", again.error);
        assert_eq!(rec.log, again.log);
    }
}
