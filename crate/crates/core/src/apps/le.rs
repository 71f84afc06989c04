//! Leader election. Candidates inject one token each; the node performing
//! the first formation becomes leader and announces termination with
//! marked (TERM) tokens.

use crate::adversary::{Adversary, InjectionSpec, PolicyKind};
use crate::app::{AppApi, AppNote, Application};
use crate::bag::{Bag, TeamRule};
use crate::kernel::{InitialStatus, KernelError, World, WorldConfig};
use crate::monitor::{CheckSet, Probe};
use crate::msg::{InstId, NodeId, Payload};
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TermImpl {
    AccumulationBased,
    TermTokens,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Undecided,
    Leader,
    NotLeader,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Undecided => "undecided",
            Status::Leader => "leader",
            Status::NotLeader => "not-leader",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeConfig {
    pub n: u32,
    pub epsilon: f64,
    pub c_le: f64,
    pub term: TermImpl,
    pub explicit: bool,
}

#[derive(Debug, PartialEq, Eq)]
pub enum LeError {
    Epsilon,
    Sigma,
}

impl LeConfig {
    pub fn validate(&self) -> Result<(), LeError> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(LeError::Epsilon);
        }
        if self.sigma() < 2 {
            return Err(LeError::Sigma);
        }
        Ok(())
    }

    pub fn sigma(&self) -> u32 {
        let ln = libm::log(self.n as f64);
        libm::ceil((1.0 - self.epsilon / 2.0) * (0.5 + self.epsilon) * self.c_le * ln - 1e-9) as u32
    }

    pub fn candidate_probability(&self) -> f64 {
        (self.c_le * libm::log(self.n as f64) / self.n as f64).min(1.0)
    }
}

pub struct LeApp {
    pub cfg: LeConfig,
    pub sigma: u32,
    pub status: Vec<Status>,
    pub candidates: u32,
    /// Port toward the leader, per node (explicit mode).
    pub port: Vec<Option<NodeId>>,
    /// Nodes that were ever leader, in order.
    pub leaders: Vec<NodeId>,
    pub announcements: u64,
    /// Leader itself held a TERM batch after its election.
    pub leader_saw_term: bool,
}

impl LeApp {
    pub fn new(cfg: LeConfig) -> Self {
        let n = cfg.n as usize;
        LeApp {
            sigma: cfg.sigma(),
            cfg,
            status: vec![Status::Undecided; n],
            candidates: 0,
            port: vec![None; n],
            leaders: Vec::new(),
            announcements: 0,
            leader_saw_term: false,
        }
    }

    fn lose(&mut self, v: NodeId, api: &mut AppApi) {
        if self.status[v as usize] == Status::Undecided {
            self.status[v as usize] = Status::NotLeader;
            api.note(AppNote::Status { node: v, status: Status::NotLeader.name() });
        }
    }

    fn saw_term(&mut self, v: NodeId, api: &mut AppApi) {
        if self.status[v as usize] == Status::Leader {
            self.leader_saw_term = true;
        }
        self.lose(v, api);
    }
}

impl Application for LeApp {
    fn on_start(&mut self, api: &mut AppApi) {
        let v = api.node;
        if api.rng.gen_bool(self.cfg.candidate_probability()) {
            self.candidates += 1;
            api.inject(0, Bag::plain(1));
        } else {
            self.lose(v, api);
        }
    }

    fn on_team(&mut self, _inst: InstId, teams: &[Bag], api: &mut AppApi) {
        let v = api.node;
        let term: u32 = teams.iter().map(|t| t.b).sum();
        let clean = teams.iter().any(|t| t.b == 0);
        if clean && self.status[v as usize] == Status::Undecided {
            self.status[v as usize] = Status::Leader;
            self.leaders.push(v);
            api.note(AppNote::Status { node: v, status: Status::Leader.name() });
            match self.cfg.term {
                TermImpl::AccumulationBased => api.inject(0, Bag::marked(1)),
                TermImpl::TermTokens => api.inject(0, Bag::marked(self.sigma - 1)),
            }
            if self.cfg.explicit {
                for u in 0..api.n {
                    if u != v {
                        self.announcements += 1;
                        api.send(u, Payload::LeaderAnnounce);
                    }
                }
            }
        } else if clean && self.status[v as usize] == Status::NotLeader {
            // Counted by the caller as a second election.
            self.leaders.push(v);
        }
        if term > 0 {
            self.saw_term(v, api);
            if self.cfg.term == TermImpl::TermTokens {
                // Pure TERM teams exist only after a double election; regenerating
                // them would re-form at the same instant forever.
                let mixed: u32 = teams.iter().filter(|t| t.a > 0).map(|t| t.b).sum();
                api.inject(0, Bag::marked(mixed));
            }
        }
    }

    fn on_transport_sent(&mut self, _inst: InstId, _bag: Bag, api: &mut AppApi) {
        let v = api.node;
        self.lose(v, api);
    }

    fn on_tokens_received(&mut self, _inst: InstId, bag: Bag, api: &mut AppApi) {
        if bag.b > 0 {
            let v = api.node;
            self.saw_term(v, api);
        }
    }

    fn on_message(&mut self, src: NodeId, payload: &Payload, api: &mut AppApi) {
        if let Payload::LeaderAnnounce = payload {
            self.port[api.node as usize] = Some(src);
        }
    }
}

#[derive(Clone, Debug)]
pub struct LeOutcome {
    pub status: Vec<Status>,
    pub faulty: Vec<bool>,
    pub port: Vec<Option<NodeId>>,
    pub candidates: u32,
    pub sigma: u32,
    /// Every formation of clean tokens, by node.
    pub leaders: Vec<NodeId>,
    pub announcements: u64,
    pub leader_saw_term: bool,
    pub messages: u64,
    pub finish: f64,
}

impl LeOutcome {
    pub fn unique_leader(&self) -> bool {
        self.leaders.len() == 1
    }

    pub fn leader(&self) -> Option<NodeId> {
        self.leaders.first().copied()
    }

    /// Non-faulty nodes still undecided.
    pub fn undecided(&self) -> usize {
        (0..self.status.len()).filter(|&v| !self.faulty[v] && self.status[v] == Status::Undecided).count()
    }
}

pub struct LeRun {
    pub policy: PolicyKind,
    pub fragile: bool,
    pub toggles: bool,
    pub checks: CheckSet,
}

impl Default for LeRun {
    fn default() -> Self {
        LeRun { policy: PolicyKind::UniformRandom, fragile: false, toggles: false, checks: CheckSet::light() }
    }
}

/// World configuration used for an election.
pub fn world_config(cfg: &LeConfig, seed: u64, run: &LeRun) -> WorldConfig {
    let mut w = WorldConfig::tf(cfg.n, cfg.sigma(), seed);
    // The election assumes (1/2 + eps) n non-fragile nodes.
    w.epsilon = 0.5 + cfg.epsilon;
    w.fragile = run.fragile;
    w.toggles = run.toggles;
    w.initial = InitialStatus::Coin;
    w.start_events = true;
    w.rules = vec![TeamRule::Plain { sigma: cfg.sigma() }];
    w
}

pub fn run(cfg: LeConfig, seed: u64, run: &LeRun) -> Result<(LeOutcome, Probe), KernelError> {
    cfg.validate().map_err(|_| KernelError::BadConfig("leader election needs 0 < epsilon < 1/2 and sigma >= 2"))?;
    let wc = world_config(&cfg, seed, run);
    let adv = Adversary::new(run.policy, seed);
    let schedule: Vec<InjectionSpec> = Vec::new();
    let (w, p) = super::run_probed(wc, adv, schedule, LeApp::new(cfg), run.checks)?;
    Ok((outcome(&w), p))
}

pub fn outcome(w: &World<LeApp>) -> LeOutcome {
    let app = &w.app;
    LeOutcome {
        status: app.status.clone(),
        faulty: w.faulty.clone(),
        port: app.port.clone(),
        candidates: app.candidates,
        sigma: app.sigma,
        leaders: app.leaders.clone(),
        announcements: app.announcements,
        leader_saw_term: app.leader_saw_term,
        messages: w.messages_total,
        finish: w.now().as_f64(),
    }
}
