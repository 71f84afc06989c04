//! Versioned run configuration.
//!
//! Files are TOML; the snapshot embedded in event logs is the same structure
//! as JSON, with every external file inlined and a single seed fixed.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use teamform_core::adversary::{PolicyKind, Target};
use teamform_core::apps::le::{LeConfig, TermImpl};
use teamform_core::kernel::InitialStatus;
use teamform_core::lowerbound::{CeError, CeParams, Mode, Selection};
use teamform_core::monitor::CheckSet;
use teamform_core::protocol::Mutation;
use teamform_core::time::SimTime;
use thiserror::Error;

pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported config version {0}, expected {VERSION}")]
    Version(u32),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

/// Simulated time, written as a string rational ("3/2") and read from an
/// integer, a float or such a string.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Time(pub SimTime);

impl Serialize for Time {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for Time {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Float(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(u) => Ok(Time(SimTime::from_units(u))),
            Raw::Float(x) if x >= 0.0 && x.is_finite() => Ok(Time(SimTime::from_f64(x))),
            Raw::Float(x) => Err(serde::de::Error::custom(format!("time {x} must be finite and non-negative"))),
            Raw::Str(s) => s.parse::<SimTime>().map(Time).map_err(|_| {
                serde::de::Error::custom(format!("time {s:?}: expected an integer or num/den with den a power of two up to 2^20"))
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Tf,
    LeImplicit,
    LeExplicit,
    Vtf,
    Dtc,
    Lowerbound,
    Conformance,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Tf => "tf",
            Experiment::LeImplicit => "le_implicit",
            Experiment::LeExplicit => "le_explicit",
            Experiment::Vtf => "vtf",
            Experiment::Dtc => "dtc",
            Experiment::Lowerbound => "lowerbound",
            Experiment::Conformance => "conformance",
        }
    }

    pub fn is_le(self) -> bool {
        matches!(self, Experiment::LeImplicit | Experiment::LeExplicit)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    #[default]
    UniformRandom,
    ConstantMaxDelay,
    Scripted,
    #[serde(alias = "anti_gather")]
    AntiGatherHeuristic,
}

impl Policy {
    pub fn kind(self) -> PolicyKind {
        match self {
            Policy::UniformRandom => PolicyKind::UniformRandom,
            Policy::ConstantMaxDelay => PolicyKind::ConstantMaxDelay,
            Policy::Scripted => PolicyKind::Scripted,
            Policy::AntiGatherHeuristic => PolicyKind::AntiGather,
        }
    }
}

impl FromStr for Policy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match PolicyKind::parse(s).ok_or_else(|| format!("unknown policy {s:?}"))? {
            PolicyKind::UniformRandom => Policy::UniformRandom,
            PolicyKind::ConstantMaxDelay => Policy::ConstantMaxDelay,
            PolicyKind::Scripted => Policy::Scripted,
            PolicyKind::AntiGather => Policy::AntiGatherHeuristic,
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initial {
    #[default]
    AllFaulty,
    Coin,
}

impl Initial {
    pub fn status(self) -> InitialStatus {
        match self {
            Initial::AllFaulty => InitialStatus::AllFaulty,
            Initial::Coin => InitialStatus::Coin,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    #[default]
    AccumulationBased,
    TermTokens,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationKind {
    #[default]
    None,
    SkipChannelAck,
    NoFormAtPhaseEnd,
}

impl MutationKind {
    pub fn mutation(self) -> Mutation {
        match self {
            MutationKind::None => Mutation::None,
            MutationKind::SkipChannelAck => Mutation::SkipChannelAck,
            MutationKind::NoFormAtPhaseEnd => Mutation::NoFormAtPhaseEnd,
        }
    }
}

/// Injection target: a node id or `"any"` (any non-faulty node).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeTarget(pub Option<u32>);

impl Serialize for NodeTarget {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Some(v) => s.serialize_u32(v),
            None => s.serialize_str("any"),
        }
    }
}

impl<'de> Deserialize<'de> for NodeTarget {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Id(u32),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Id(v) => Ok(NodeTarget(Some(v))),
            Raw::Name(s) if s == "any" || s == "any-nonfaulty" => Ok(NodeTarget(None)),
            Raw::Name(s) => Err(serde::de::Error::custom(format!("node {s:?}: expected an id or \"any\""))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectionEntry {
    pub time: Time,
    pub node: NodeTarget,
    pub count: u32,
    #[serde(default)]
    pub color: u16,
}

impl InjectionEntry {
    pub fn target(&self) -> Target {
        match self.node.0 {
            Some(v) => Target::Node(v),
            None => Target::AnyNonFaulty,
        }
    }
}

/// One recorded adversary decision for the scripted policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DecisionEntry {
    Delay { src: u32, dst: u32, ticks: u64 },
    Inject { time: Time, node: u32, count: u32 },
    Toggle { time: Time, node: u32 },
}

/// Generated load: `tokens` single-token injections at any non-faulty node,
/// `spacing` apart from `start`. For vTF, `colors` gives per-color counts
/// injected color after color.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Load {
    #[serde(default)]
    pub tokens: u32,
    #[serde(default)]
    pub start: Time,
    #[serde(default)]
    pub spacing: Time,
    #[serde(default)]
    pub colors: Vec<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckToggles {
    #[serde(default = "yes")]
    pub tables: bool,
    #[serde(default = "yes")]
    pub guarantees: bool,
    #[serde(default = "yes")]
    pub phases: bool,
    #[serde(default = "yes")]
    pub forgetful: bool,
    #[serde(default = "yes")]
    pub potentials: bool,
    #[serde(default = "yes")]
    pub conservation: bool,
    #[serde(default = "yes")]
    pub trace: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Checks {
    Preset(Preset),
    Custom(CheckToggles),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    All,
    Light,
    None,
}

impl Default for Checks {
    fn default() -> Self {
        Checks::Preset(Preset::All)
    }
}

impl Checks {
    pub fn set(self) -> CheckSet {
        match self {
            Checks::Preset(Preset::All) => CheckSet::all(),
            Checks::Preset(Preset::Light) => CheckSet::light(),
            Checks::Preset(Preset::None) => CheckSet {
                tables: false,
                guarantees: false,
                phases: false,
                forgetful: false,
                potentials: false,
                conservation: false,
                trace: false,
            },
            Checks::Custom(t) => CheckSet {
                tables: t.tables,
                guarantees: t.guarantees,
                phases: t.phases,
                forgetful: t.forgetful,
                potentials: t.potentials,
                conservation: t.conservation,
                trace: t.trace,
            },
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub log_events: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Bernoulli,
    Mechanistic,
}

impl ModeName {
    pub fn mode(self) -> Mode {
        match self {
            ModeName::Bernoulli => Mode::Bernoulli,
            ModeName::Mechanistic => Mode::Mechanistic,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionName {
    #[default]
    Largest,
    Smallest,
    Random,
}

impl SelectionName {
    pub fn selection(self) -> Selection {
        match self {
            SelectionName::Largest => Selection::Largest,
            SelectionName::Smallest => Selection::Smallest,
            SelectionName::Random => Selection::Random,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerboundCfg {
    pub f: u32,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "both_modes")]
    pub modes: Vec<ModeName>,
    #[serde(default)]
    pub selection: SelectionName,
}

fn default_trials() -> u64 {
    1_000_000
}

fn both_modes() -> Vec<ModeName> {
    vec![ModeName::Bernoulli, ModeName::Mechanistic]
}

/// Parameter grid swept in addition to seeds.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default)]
    pub n: Vec<u32>,
    #[serde(default)]
    pub sigma: Vec<u32>,
}

/// Inclusive seed range, written `a..b` or `a..=b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Seeds {
    pub first: u64,
    pub last: u64,
}

impl Seeds {
    pub fn iter(self) -> impl Iterator<Item = u64> {
        self.first..=self.last
    }

    pub fn len(self) -> u64 {
        self.last - self.first + 1
    }
}

impl FromStr for Seeds {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("seed range {s:?}: expected a..b");
        if let Ok(v) = s.trim().parse::<u64>() {
            return Ok(Seeds { first: v, last: v });
        }
        let (a, b) = s.split_once("..").ok_or_else(bad)?;
        let b = b.strip_prefix('=').unwrap_or(b);
        let first: u64 = a.trim().parse().map_err(|_| bad())?;
        let last: u64 = b.trim().parse().map_err(|_| bad())?;
        if last < first {
            return Err(format!("seed range {s:?} is empty"));
        }
        Ok(Seeds { first, last })
    }
}

impl fmt::Display for Seeds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.first, self.last)
    }
}

impl Serialize for Seeds {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Seeds {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub experiment: Experiment,
    pub n: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_vec: Option<Vec<u32>>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_c_le")]
    pub c_le: f64,
    #[serde(default)]
    pub policy: Policy,
    #[serde(default)]
    pub fragile: bool,
    #[serde(default)]
    pub toggles: bool,
    #[serde(default)]
    pub initial: Initial,
    #[serde(default)]
    pub term: Term,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Seeds>,
    /// Run horizon in time units; defaults to the last injection plus
    /// 100 (sigma + ln n).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_sim_time: Option<Time>,
    #[serde(default)]
    pub trace: bool,
    #[serde(default)]
    pub mutation: MutationKind,
    #[serde(default)]
    pub injections: Vec<InjectionEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub injections_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load: Option<Load>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<Vec<DecisionEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script_file: Option<PathBuf>,
    #[serde(default)]
    pub checks: Checks,
    #[serde(default)]
    pub output: Output,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lowerbound: Option<LowerboundCfg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Grid>,
}

fn default_epsilon() -> f64 {
    1.0
}

fn default_c() -> f64 {
    3.0
}

fn default_c_le() -> f64 {
    10.0
}

impl RunConfig {
    /// Minimal configuration for an experiment; callers fill in the rest.
    pub fn new(experiment: Experiment, n: u32) -> Self {
        RunConfig {
            version: VERSION,
            experiment,
            n,
            sigma: None,
            sigma_vec: None,
            epsilon: default_epsilon(),
            c: default_c(),
            c_le: default_c_le(),
            policy: Policy::default(),
            fragile: false,
            toggles: false,
            initial: Initial::default(),
            term: Term::default(),
            seed: None,
            seeds: None,
            max_sim_time: None,
            trace: false,
            mutation: MutationKind::None,
            injections: Vec::new(),
            injections_file: None,
            load: None,
            script: None,
            script_file: None,
            checks: Checks::default(),
            output: Output::default(),
            lowerbound: None,
            sweep: None,
        }
    }

    pub fn parse_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Reads, inlines referenced files (relative to the config's directory)
    /// and validates.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let mut cfg = Self::parse_toml(&text)?;
        cfg.inline_files(path.parent().unwrap_or(Path::new(".")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn inline_files(&mut self, base: &Path) -> Result<(), ConfigError> {
        if let Some(f) = self.injections_file.take() {
            let entries: Vec<InjectionEntry> = read_json(&base.join(f))?;
            self.injections.extend(entries);
        }
        if let Some(f) = self.script_file.take() {
            if self.script.is_some() {
                return invalid("script and script_file are exclusive");
            }
            self.script = Some(read_json(&base.join(f))?);
        }
        Ok(())
    }

    pub fn le(&self) -> LeConfig {
        LeConfig {
            n: self.n,
            epsilon: self.epsilon,
            c_le: self.c_le,
            term: match self.term {
                Term::AccumulationBased => TermImpl::AccumulationBased,
                Term::TermTokens => TermImpl::TermTokens,
            },
            explicit: self.experiment == Experiment::LeExplicit,
        }
    }

    pub fn ce(&self) -> Option<CeParams> {
        Some(CeParams { n: self.n, sigma: self.sigma?, f: self.lowerbound.as_ref()?.f })
    }

    /// Effective team size: the configured one, derived for leader election,
    /// the palette total for vTF.
    pub fn team_size(&self) -> u32 {
        if self.experiment.is_le() {
            self.le().sigma()
        } else if let Some(v) = &self.sigma_vec {
            v.iter().sum()
        } else {
            self.sigma.unwrap_or(0)
        }
    }

    pub fn colors(&self) -> usize {
        if self.experiment == Experiment::Vtf {
            self.sigma_vec.as_ref().map_or(0, Vec::len)
        } else {
            1
        }
    }

    /// Configurations of every grid point, each validated.
    pub fn grid(&self) -> Result<Vec<RunConfig>, ConfigError> {
        let Some(g) = &self.sweep else { return Ok(vec![self.clone()]) };
        let ns = if g.n.is_empty() { vec![self.n] } else { g.n.clone() };
        let sigmas: Vec<Option<u32>> = if g.sigma.is_empty() { vec![self.sigma] } else { g.sigma.iter().map(|&s| Some(s)).collect() };
        let mut out = Vec::new();
        for &n in &ns {
            for &s in &sigmas {
                let mut c = self.clone();
                c.sweep = None;
                c.n = n;
                c.sigma = s;
                c.validate()?;
                out.push(c);
            }
        }
        Ok(out)
    }

    /// Single-seed snapshot as embedded in a log header.
    pub fn snapshot(&self, seed: u64) -> RunConfig {
        let mut c = self.clone();
        c.seed = Some(seed);
        c.seeds = None;
        c.sweep = None;
        c.output = Output { dir: None, log_events: true };
        c
    }

    pub fn seed_list(&self) -> Vec<u64> {
        match (self.seeds, self.seed) {
            (Some(r), _) => r.iter().collect(),
            (None, Some(s)) => vec![s],
            (None, None) => vec![0],
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != VERSION {
            return Err(ConfigError::Version(self.version));
        }
        if self.sweep.is_some() {
            // Points are validated individually.
            return self.grid().map(|_| ());
        }
        let n = self.n;
        if n < 2 {
            return invalid("n must be at least 2");
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return invalid("epsilon must lie in (0, 1]");
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return invalid("c must be positive");
        }
        let check_sigma = |s: u32| -> Result<(), ConfigError> {
            if s < 2 {
                return invalid(format!("sigma = {s}: team formation needs sigma >= 2 (sigma = 1 is trivial)"));
            }
            if s > n {
                return invalid(format!("sigma = {s} exceeds n = {n}"));
            }
            Ok(())
        };
        match self.experiment {
            Experiment::Tf | Experiment::Dtc | Experiment::Conformance => {
                let Some(s) = self.sigma else { return invalid("sigma is required") };
                check_sigma(s)?;
                if self.sigma_vec.is_some() {
                    return invalid("sigma_vec is only used by vtf");
                }
            }
            Experiment::Vtf => {
                let Some(v) = &self.sigma_vec else { return invalid("vtf needs sigma_vec") };
                if v.is_empty() {
                    return invalid("sigma_vec is empty");
                }
                for &s in v {
                    check_sigma(s)?;
                }
                if self.sigma.is_some() {
                    return invalid("vtf takes sigma_vec, not sigma");
                }
            }
            Experiment::LeImplicit | Experiment::LeExplicit => {
                if self.sigma.is_some() || self.sigma_vec.is_some() {
                    return invalid("leader election derives sigma from n, epsilon and c_le");
                }
                if self.le().validate().is_err() {
                    return invalid("leader election needs 0 < epsilon < 1/2, c_le > 0 and a derived sigma >= 2");
                }
                if self.le().sigma() > n {
                    return invalid("derived leader-election sigma exceeds n");
                }
                if !self.injections.is_empty() || self.load.is_some() {
                    return invalid("leader election takes no injections");
                }
            }
            Experiment::Lowerbound => {
                let Some(s) = self.sigma else { return invalid("sigma is required") };
                check_sigma(s)?;
                let Some(lb) = &self.lowerbound else { return invalid("lowerbound needs a [lowerbound] table") };
                if lb.trials == 0 {
                    return invalid("lowerbound trials must be positive");
                }
                if lb.modes.is_empty() {
                    return invalid("lowerbound modes is empty");
                }
                if let Err(e) = self.ce().expect("sigma and table present").validate() {
                    return invalid(match e {
                        CeError::SigmaRange => "lowerbound needs 2 <= sigma <= n/2",
                        CeError::ProbabilityRange => "lowerbound p = (3f + 1.5 sigma)/n must lie in (0, 1)",
                        CeError::NotLargeEnough => "lowerbound needs n - 2f >= 2n/3 and 2f + sigma <= 2n/3",
                        CeError::TailRegime => "lowerbound tail regime",
                    });
                }
            }
        }
        if self.experiment != Experiment::Lowerbound && self.lowerbound.is_some() {
            return invalid("[lowerbound] is only used by the lowerbound experiment");
        }
        let colors = self.colors();
        for (i, e) in self.injections.iter().enumerate() {
            if e.count == 0 {
                return invalid(format!("injection {i} has count 0"));
            }
            if matches!(e.node.0, Some(v) if v >= n) {
                return invalid(format!("injection {i} targets node outside 0..{n}"));
            }
            if e.color as usize >= colors {
                return invalid(format!("injection {i} has color {} outside the palette", e.color));
            }
        }
        if let Some(l) = &self.load {
            if self.experiment == Experiment::Vtf {
                if l.colors.len() > colors {
                    return invalid("load.colors is longer than sigma_vec");
                }
            } else if !l.colors.is_empty() {
                return invalid("load.colors is only used by vtf");
            }
        }
        match (self.policy, &self.script) {
            (Policy::Scripted, None) => return invalid("the scripted policy needs script or script_file"),
            (p, Some(_)) if p != Policy::Scripted => return invalid("script given but policy is not scripted"),
            _ => {}
        }
        if let Some(script) = &self.script {
            for d in script {
                let (a, b) = match *d {
                    DecisionEntry::Delay { src, dst, .. } => (src, dst),
                    DecisionEntry::Inject { node, .. } | DecisionEntry::Toggle { node, .. } => (node, node),
                };
                if a >= n || b >= n {
                    return invalid("script references a node outside the network");
                }
            }
        }
        if (self.toggles || self.initial == Initial::Coin) && !self.fragile && !self.experiment.is_le() {
            return invalid("toggles and coin initial status need fragile = true");
        }
        Ok(())
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))
}
