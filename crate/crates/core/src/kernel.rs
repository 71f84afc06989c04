//! Deterministic discrete-event kernel.

use crate::adversary::{choose_fragile_set, fragile_stream, Adversary, AdversaryError, Decision, InjectionSpec};
use crate::app::{AppApi, AppNote, Application};
use crate::bag::{Bag, TeamRule};
use crate::log::{kind, LogRecord};
use crate::msg::{Envelope, InstId, NodeId, Payload, PrincipalMsg, Role};
use crate::protocol::{Ctx, Effects, Mutation, Note, OutMsg, PhaseType, TfNode, TraceOrigin};
use crate::pu_graph::PuGraph;
use crate::rng::{stream, StreamRng, TAG_RUNTIME};
use crate::time::{Delay, SimTime};
use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};
use core::fmt;
use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitialStatus {
    /// Every fragile node starts faulty.
    AllFaulty,
    /// Each fragile node starts faulty with probability 1/2.
    Coin,
}

#[derive(Clone, Debug)]
pub struct WorldConfig {
    pub n: u32,
    pub c: f64,
    pub epsilon: f64,
    /// Whether the adversary gets a fragile set at all.
    pub fragile: bool,
    pub initial: InitialStatus,
    pub seed: u64,
    /// One rule per TF instance.
    pub rules: Vec<TeamRule>,
    pub trace: bool,
    pub mutation: Mutation,
    /// Toggle fragile nodes at quiescent times.
    pub toggles: bool,
    pub max_time: SimTime,
    pub log_events: bool,
    /// Deliver a time-0 start activation to every non-faulty node.
    pub start_events: bool,
}

impl WorldConfig {
    pub fn tf(n: u32, sigma: u32, seed: u64) -> Self {
        WorldConfig {
            n,
            c: 3.0,
            epsilon: 1.0,
            fragile: false,
            initial: InitialStatus::AllFaulty,
            seed,
            rules: alloc::vec![TeamRule::Plain { sigma }],
            trace: false,
            mutation: Mutation::None,
            toggles: false,
            max_time: SimTime::from_units(1_000_000),
            log_events: false,
            start_events: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KernelError {
    InvalidDelay { src: NodeId, dst: NodeId, ticks: u64 },
    FaultySender(NodeId),
    NotFragile(NodeId),
    NotQuiescent,
    Adversary(AdversaryError),
    BadConfig(&'static str),
}

impl fmt::Display for KernelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelError::InvalidDelay { src, dst, ticks } => {
                write!(f, "delay of {ticks} ticks on link {src}->{dst} outside (0, 1]")
            }
            KernelError::FaultySender(v) => write!(f, "send attributed to faulty node {v}"),
            KernelError::NotFragile(v) => write!(f, "node {v} is not fragile"),
            KernelError::NotQuiescent => f.write_str("status toggle at a non-quiescent time"),
            KernelError::Adversary(e) => write!(f, "adversary: {e}"),
            KernelError::BadConfig(m) => write!(f, "bad config: {m}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Adversary,
    Fake,
    App,
}

/// Token accounting for one instance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Ledger {
    /// All real injections (adversary and application).
    pub injected: u64,
    /// Adversary injections only.
    pub adversary: u64,
    pub fake_total: u64,
    pub deleted: u64,
    pub teams: u64,
    pub in_transit: u64,
    pub limbo: u64,
    pub fake_pending: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Audit {
    pub injected: u64,
    pub deleted: u64,
    pub held: u64,
    pub in_transit: u64,
    pub limbo: u64,
}

impl Audit {
    pub fn balances(&self) -> bool {
        self.injected == self.deleted + self.held + self.in_transit + self.limbo
    }
}

#[derive(Clone, Debug)]
enum Event {
    Deliver(Envelope),
    Inject { node: NodeId, inst: InstId, bag: Bag, source: Source },
    Start { node: NodeId },
    Scheduled(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Key {
    time: SimTime,
    class: u8,
    seq: u64,
}

struct Queued {
    key: Key,
    ev: Event,
}

impl PartialEq for Queued {
    fn eq(&self, o: &Self) -> bool {
        self.key == o.key
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Queued {
    fn cmp(&self, o: &Self) -> Ordering {
        self.key.cmp(&o.key)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Cause {
    Deliver(Envelope),
    Inject { inst: InstId, bag: Bag, source: Source },
    Start,
}

#[derive(Clone, Debug)]
pub struct Activation {
    pub time: SimTime,
    pub node: NodeId,
    pub cause: Cause,
    pub notes: Vec<(InstId, Note)>,
    pub app_notes: Vec<AppNote>,
    pub sends: Vec<Envelope>,
}

impl Activation {
    pub fn teams(&self) -> impl Iterator<Item = (InstId, &Vec<Bag>)> {
        self.notes.iter().filter_map(|(i, n)| match n {
            Note::Team { teams, .. } => Some((*i, teams)),
            _ => None,
        })
    }
}

#[derive(Clone, Debug)]
pub enum Step {
    Activation(Activation),
    /// Envelope delivered to a faulty node.
    Lost(Envelope),
    Toggles { time: SimTime, flips: Vec<(NodeId, bool)> },
    InjectionSkipped { time: SimTime, count: u32 },
}

pub struct World<A: Application = ()> {
    pub cfg: WorldConfig,
    pub graph: PuGraph,
    /// `nodes[v][inst]`.
    pub nodes: Vec<Vec<TfNode>>,
    rngs: Vec<StreamRng>,
    pub fragile: Vec<bool>,
    pub faulty: Vec<bool>,
    queue: BinaryHeap<Reverse<Queued>>,
    now: SimTime,
    next_key: u64,
    next_send: u64,
    next_record: u64,
    link_last: BTreeMap<(NodeId, NodeId), (SimTime, u64)>,
    in_flight: usize,
    class0: usize,
    pub ledgers: Vec<Ledger>,
    pub adversary: Adversary,
    schedule: Vec<InjectionSpec>,
    pub app: A,
    ids: u64,
    gids: u64,
    effects: Effects,
    pub log: Vec<LogRecord>,
    pub messages_total: u64,
    pub messages_by_type: BTreeMap<&'static str, u64>,
    pub activations: u64,
    toggled: bool,
    pub error: Option<KernelError>,
    /// Events were left unprocessed at `max_time`.
    pub censored: bool,
    busy: Vec<u32>,
}

impl<A: Application> World<A> {
    pub fn new(cfg: WorldConfig, adversary: Adversary, schedule: Vec<InjectionSpec>, app: A) -> Result<Self, KernelError> {
        if cfg.n < 2 {
            return Err(KernelError::BadConfig("n must be at least 2"));
        }
        if cfg.rules.is_empty() {
            return Err(KernelError::BadConfig("at least one instance"));
        }
        let n = cfg.n as usize;
        let mut frng = fragile_stream(cfg.seed);
        let fragile = if cfg.fragile {
            choose_fragile_set(cfg.n, cfg.epsilon, &mut frng).map_err(KernelError::Adversary)?
        } else {
            alloc::vec![false; n]
        };
        let faulty = fragile
            .iter()
            .map(|&f| {
                f && match cfg.initial {
                    InitialStatus::AllFaulty => true,
                    InitialStatus::Coin => frng.gen::<bool>(),
                }
            })
            .collect();
        let insts = cfg.rules.len();
        let mut w = World {
            graph: PuGraph::new(cfg.seed, cfg.n, cfg.c),
            nodes: (0..n).map(|_| (0..insts).map(|_| TfNode::new(cfg.trace)).collect()).collect(),
            rngs: (0..n).map(|v| stream(cfg.seed, TAG_RUNTIME, v as u64)).collect(),
            fragile,
            faulty,
            queue: BinaryHeap::new(),
            now: SimTime::ZERO,
            next_key: 0,
            next_send: 0,
            next_record: 0,
            link_last: BTreeMap::new(),
            in_flight: 0,
            class0: 0,
            ledgers: alloc::vec![Ledger::default(); insts],
            adversary,
            schedule,
            app,
            ids: 0,
            gids: 0,
            effects: Effects::default(),
            log: Vec::new(),
            messages_total: 0,
            messages_by_type: BTreeMap::new(),
            activations: 0,
            toggled: false,
            error: None,
            censored: false,
            busy: alloc::vec![0; n],
            cfg,
        };
        for i in 0..w.schedule.len() {
            let t = w.schedule[i].time;
            w.push(t, 1, Event::Scheduled(i));
        }
        if w.cfg.start_events {
            for v in 0..w.cfg.n {
                if !w.faulty[v as usize] {
                    w.push(SimTime::ZERO, 1, Event::Start { node: v });
                }
            }
        }
        Ok(w)
    }

    fn push(&mut self, time: SimTime, class: u8, ev: Event) {
        self.next_key += 1;
        if class == 0 {
            self.class0 += 1;
        }
        self.queue.push(Reverse(Queued { key: Key { time, class, seq: self.next_key }, ev }));
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn n(&self) -> u32 {
        self.cfg.n
    }

    pub fn rule(&self, inst: InstId) -> TeamRule {
        self.cfg.rules[inst as usize]
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight
    }

    pub fn is_busy(&self, v: NodeId) -> bool {
        self.busy[v as usize] > 0
    }

    pub fn next_event_time(&self) -> Option<SimTime> {
        self.queue.peek().map(|q| q.0.key.time)
    }

    pub fn take_decisions(&mut self) -> Vec<Decision> {
        self.adversary.take_recording()
    }

    pub fn audit(&self, inst: InstId) -> Audit {
        let l = &self.ledgers[inst as usize];
        let held: u64 = self
            .nodes
            .iter()
            .map(|insts| {
                let p = &insts[inst as usize].primary;
                (p.tok.total() + p.pending.total()) as u64
            })
            .sum::<u64>()
            + l.fake_pending;
        Audit {
            injected: l.injected,
            deleted: l.deleted,
            held,
            in_transit: l.in_transit,
            limbo: l.limbo,
        }
    }

    pub fn tokens_in_system(&self) -> u64 {
        (0..self.cfg.rules.len())
            .map(|i| {
                let a = self.audit(i as InstId);
                a.held + a.in_transit
            })
            .sum()
    }

    /// No envelopes in transit, no immediate follow-up events and no tokens.
    pub fn is_quiescent(&self) -> bool {
        self.in_flight == 0 && self.class0 == 0 && self.tokens_in_system() == 0
    }

    /// The scheduling rule: FIFO per directed link, delays in (0, 1].
    pub fn schedule_send(&mut self, src: NodeId, dst: NodeId, msg: OutMsg, delay: Delay) -> Result<Envelope, KernelError> {
        if !delay.is_valid() {
            return Err(KernelError::InvalidDelay { src, dst, ticks: delay.0 });
        }
        if self.faulty[src as usize] {
            return Err(KernelError::FaultySender(src));
        }
        let nominal = self.now + SimTime(delay.0);
        let (last, lseq) = self.link_last.get(&(src, dst)).copied().unwrap_or((SimTime::ZERO, 0));
        // Equal times keep send order through the queue's sequence tie-break.
        let deliver_at = nominal.max(last).min(self.now + SimTime::UNIT);
        self.link_last.insert((src, dst), (deliver_at, lseq + 1));
        self.next_send += 1;
        let env = Envelope {
            id: self.next_send,
            src,
            dst,
            inst: msg.inst,
            payload: msg.payload,
            sent_at: self.now,
            deliver_at,
            tag: msg.tag,
            trace: msg.trace,
            link_seq: lseq + 1,
        };
        let t = env.payload.tokens().total() as u64;
        self.ledgers[env.inst as usize].in_transit += t;
        self.in_flight += 1;
        self.messages_total += 1;
        *self.messages_by_type.entry(env.payload.name()).or_insert(0) += 1;
        self.push(deliver_at, 1, Event::Deliver(env.clone()));
        Ok(env)
    }

    /// Flips a fragile node's status. Only legal at quiescent times.
    pub fn toggle_status(&mut self, v: NodeId) -> Result<bool, KernelError> {
        if !self.fragile[v as usize] {
            return Err(KernelError::NotFragile(v));
        }
        if !self.is_quiescent() {
            return Err(KernelError::NotQuiescent);
        }
        let f = &mut self.faulty[v as usize];
        *f = !*f;
        let now_faulty = *f;
        self.log_rec(kind::TOGGLE, Some(v), None, None, 0, if now_faulty { "faulty" } else { "up" }.into());
        Ok(now_faulty)
    }

    fn log_rec(&mut self, k: &'static str, node: Option<NodeId>, peer: Option<NodeId>, msg: Option<&'static str>, tokens: u32, detail: String) {
        if !self.cfg.log_events {
            return;
        }
        self.next_record += 1;
        self.log.push(LogRecord { t: self.now, seq: self.next_record, kind: k.into(), node, peer, msg_type: msg.map(Into::into), tokens, detail });
    }

    fn fail(&mut self, e: KernelError) -> Option<Step> {
        self.error = Some(e);
        None
    }

    /// Runs until the queue is exhausted, the horizon passes, or an error.
    pub fn run(&mut self, mut observe: impl FnMut(&World<A>, &Step)) {
        while let Some(s) = self.step() {
            observe(self, &s);
        }
    }

    pub fn step(&mut self) -> Option<Step> {
        if self.error.is_some() {
            return None;
        }
        if let Some(s) = self.maybe_toggle() {
            return Some(s);
        }
        let Reverse(q) = self.queue.pop()?;
        if q.key.time > self.cfg.max_time {
            self.queue.push(Reverse(q));
            self.censored = true;
            return None;
        }
        if q.key.class == 0 {
            self.class0 -= 1;
        }
        self.now = q.key.time;
        self.toggled = false;
        match q.ev {
            Event::Deliver(env) => {
                self.in_flight -= 1;
                let toks = env.payload.tokens().total() as u64;
                self.ledgers[env.inst as usize].in_transit -= toks;
                if self.faulty[env.dst as usize] {
                    self.ledgers[env.inst as usize].limbo += toks;
                    self.log_rec(kind::LOST, Some(env.dst), Some(env.src), Some(env.payload.name()), toks as u32, format!("inst={} id={}", env.inst, env.id));
                    return Some(Step::Lost(env));
                }
                let dst = env.dst;
                self.activate(dst, Cause::Deliver(env))
            }
            Event::Inject { node, inst, bag, source } => self.activate(node, Cause::Inject { inst, bag, source }),
            Event::Start { node } => self.activate(node, Cause::Start),
            Event::Scheduled(i) => {
                let spec = self.schedule[i].clone();
                let busy = &self.busy;
                let r = self.adversary.target(self.now, &spec, &self.faulty, &|v| busy[v as usize] > 0);
                match r {
                    Err(e) => self.fail(KernelError::Adversary(e)),
                    Ok(None) => {
                        self.log_rec(kind::INJECT_SKIPPED, None, None, None, spec.count, String::new());
                        Some(Step::InjectionSkipped { time: self.now, count: spec.count })
                    }
                    Ok(Some(v)) => {
                        let bag = Bag::plain(spec.count);
                        self.activate(v, Cause::Inject { inst: spec.inst, bag, source: Source::Adversary })
                    }
                }
            }
        }
    }

    fn maybe_toggle(&mut self) -> Option<Step> {
        if !self.cfg.toggles || self.toggled || !self.fragile.iter().any(|&f| f) || !self.is_quiescent() {
            return None;
        }
        let next = self.next_event_time()?;
        let at = self.now + SimTime::UNIT;
        if next < self.now + SimTime::from_units(2) || at > self.cfg.max_time {
            return None;
        }
        self.toggled = true;
        self.now = at;
        let mut flips = Vec::new();
        for v in 0..self.cfg.n {
            if self.fragile[v as usize] && self.adversary.toggle(at, v) {
                match self.toggle_status(v) {
                    Ok(f) => flips.push((v, f)),
                    Err(e) => return self.fail(e),
                }
            }
        }
        Some(Step::Toggles { time: at, flips })
    }

    fn activate(&mut self, node: NodeId, cause: Cause) -> Option<Step> {
        self.activations += 1;
        self.graph.ensure(node);
        self.effects.clear();
        let v = node as usize;
        let mut received: Option<(InstId, Bag)> = None;
        let mut app_call: Option<Cause> = None;
        match &cause {
            Cause::Deliver(env) => {
                if self.cfg.log_events {
                    let d = format!("inst={} id={} link_seq={}", env.inst, env.id, env.link_seq);
                    self.log_rec(kind::DELIVER, Some(node), Some(env.src), Some(env.payload.name()), env.payload.tokens().total(), d);
                }
                match env.payload.dst_role() {
                    Role::Node if !matches!(env.payload, Payload::TraceReport { .. }) => app_call = Some(cause.clone()),
                    _ => {
                        let inst = env.inst;
                        let mut cx = Ctx {
                            me: node,
                            inst,
                            rule: self.cfg.rules[inst as usize],
                            utilities: self.graph.utilities(node),
                            rng: &mut self.rngs[v],
                            out: &mut self.effects,
                            ids: &mut self.ids,
                            mutation: self.cfg.mutation,
                        };
                        self.nodes[v][inst as usize].deliver(env.src, env.payload.clone(), env.tag, env.trace.clone(), &mut cx);
                        if let Payload::RelayDown(PrincipalMsg::Transport(bag)) = env.payload {
                            let screened = self.effects.notes.iter().any(|(_, n)| matches!(n, Note::Screened { .. }));
                            if !screened {
                                received = Some((inst, bag));
                            }
                        }
                    }
                }
            }
            Cause::Inject { inst, bag, source } => {
                let inst = *inst;
                let l = &mut self.ledgers[inst as usize];
                let k = match source {
                    Source::Fake => {
                        l.fake_pending -= bag.total() as u64;
                        kind::FAKE_INJECT
                    }
                    Source::Adversary => {
                        l.injected += bag.total() as u64;
                        l.adversary += bag.total() as u64;
                        kind::INJECT
                    }
                    Source::App => {
                        l.injected += bag.total() as u64;
                        kind::APP_INJECT
                    }
                };
                let origin = if *source == Source::Fake || !self.cfg.trace {
                    TraceOrigin::Fake
                } else {
                    let start = self.gids;
                    self.gids += bag.total() as u64;
                    TraceOrigin::Injected((start..self.gids).collect())
                };
                if self.cfg.log_events {
                    let d = format!("inst={inst} a={} b={}", bag.a, bag.b);
                    self.log_rec(k, Some(node), None, None, bag.total(), d);
                }
                let mut cx = Ctx {
                    me: node,
                    inst,
                    rule: self.cfg.rules[inst as usize],
                    utilities: self.graph.utilities(node),
                    rng: &mut self.rngs[v],
                    out: &mut self.effects,
                    ids: &mut self.ids,
                    mutation: self.cfg.mutation,
                };
                self.nodes[v][inst as usize].inject(*bag, origin, &mut cx);
            }
            Cause::Start => {
                self.log_rec(kind::START, Some(node), None, None, 0, String::new());
                app_call = Some(Cause::Start);
            }
        }

        let mut api = AppApi {
            now: self.now,
            node,
            n: self.cfg.n,
            rng: &mut self.rngs[v],
            injects: Vec::new(),
            sends: Vec::new(),
            notes: Vec::new(),
        };
        match app_call {
            Some(Cause::Start) => self.app.on_start(&mut api),
            Some(Cause::Deliver(env)) => self.app.on_message(env.src, &env.payload, &mut api),
            _ => {}
        }
        if let Some((inst, bag)) = received {
            self.app.on_tokens_received(inst, bag, &mut api);
        }
        for (inst, note) in self.effects.notes.iter() {
            match note {
                Note::Team { teams, .. } => {
                    let l = &mut self.ledgers[*inst as usize];
                    l.teams += teams.len() as u64;
                    l.deleted += teams.iter().map(|t| t.total() as u64).sum::<u64>();
                    self.app.on_team(*inst, teams, &mut api);
                }
                Note::TransportSent { bag, .. } => self.app.on_transport_sent(*inst, *bag, &mut api),
                Note::Screened { tokens, .. } => self.ledgers[*inst as usize].limbo += tokens.total() as u64,
                _ => {}
            }
        }
        let AppApi { injects, sends: app_sends, notes: app_notes, .. } = api;

        let notes = core::mem::take(&mut self.effects.notes);
        let outs = core::mem::take(&mut self.effects.sends);
        let fakes = core::mem::take(&mut self.effects.fake);
        if self.cfg.log_events {
            self.log_notes(node, &notes);
            for n in &app_notes {
                let d = format!("{n:?}");
                self.log_rec(kind::APP, Some(node), None, None, 0, d);
            }
        }
        for (inst, bag) in fakes {
            let l = &mut self.ledgers[inst as usize];
            l.fake_pending += bag.total() as u64;
            l.fake_total += bag.total() as u64;
            self.push(self.now, 0, Event::Inject { node, inst, bag, source: Source::Fake });
        }
        for (inst, bag) in injects {
            self.push(self.now, 0, Event::Inject { node, inst, bag, source: Source::App });
        }
        let mut sends = Vec::with_capacity(outs.len() + app_sends.len());
        let all = outs.into_iter().chain(app_sends.into_iter().map(|(dst, payload)| OutMsg {
            dst,
            inst: 0,
            payload,
            tag: 0,
            trace: None,
        }));
        for m in all {
            let busy = &self.busy;
            let d = match self.adversary.delay(node, m.dst, &m.payload, &|x| busy[x as usize] > 0) {
                Ok(d) => d,
                Err(e) => return self.fail(KernelError::Adversary(e)),
            };
            let dst = m.dst;
            match self.schedule_send(node, dst, m, d) {
                Ok(env) => {
                    if self.cfg.log_events {
                        let det = format!("inst={} id={} deliver={} tag={}", env.inst, env.id, env.deliver_at, env.tag);
                        self.log_rec(kind::SEND, Some(node), Some(dst), Some(env.payload.name()), env.payload.tokens().total(), det);
                    }
                    sends.push(env);
                }
                Err(e) => return self.fail(e),
            }
        }
        self.busy[v] = self.nodes[v].iter().filter(|t| t.primary.is_busy()).count() as u32;
        Some(Step::Activation(Activation { time: self.now, node, cause, notes, app_notes, sends }))
    }

    fn log_notes(&mut self, node: NodeId, notes: &[(InstId, Note)]) {
        for (inst, n) in notes {
            let inst = *inst;
            match n {
                Note::Team { teams, remainder, formation, .. } => {
                    let tot: u32 = teams.iter().map(|t| t.total()).sum();
                    let d = format!("inst={inst} teams={} sigma={} remainder={} formation={formation}", teams.len(), self.rule(inst).sigma(), remainder.total());
                    self.log_rec(kind::TEAM, Some(node), None, None, tot, d);
                }
                Note::PhaseBegin { kind: k, .. } => {
                    let d = format!("inst={inst} type={}", if *k == PhaseType::Center { "center" } else { "arm" });
                    self.log_rec(kind::PHASE_BEGIN, Some(node), None, None, 0, d);
                }
                Note::PhaseEnd { .. } => self.log_rec(kind::PHASE_END, Some(node), None, None, 0, format!("inst={inst}")),
                Note::ChannelUp { p1, p2, id, .. } => {
                    let d = format!("inst={inst} id={id} p1={p1} p2={p2}");
                    self.log_rec(kind::CHANNEL_CREATE, Some(node), None, None, 0, d);
                }
                Note::ChannelDown { id, .. } => self.log_rec(kind::CHANNEL_RELEASE, Some(node), None, None, 0, format!("inst={inst} id={id}")),
                Note::Screened { from, msg, tokens, id, .. } => {
                    self.log_rec(kind::SCREEN, Some(node), Some(*from), Some(msg), tokens.total(), format!("inst={inst} id={id}"));
                }
                Note::Origin { formation, count, .. } => {
                    self.log_rec(kind::ORIGIN, Some(node), None, None, *count, format!("inst={inst} formation={formation}"));
                }
                _ => {}
            }
        }
    }
}
