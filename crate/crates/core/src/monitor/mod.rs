//! Online checkers and metrics. A [`Probe`] observes every kernel step with
//! read access to the world and records violations and measurements.

pub mod offline;
pub mod tables;

use crate::app::Application;
use crate::bag::{Color, TeamRule};
use crate::kernel::{Activation, Cause, Source, Step, World};
use crate::msg::{Envelope, InstId, NodeId, Payload, PrincipalMsg, Role};
use crate::protocol::{Note, TableEvent};
use crate::time::SimTime;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use tables::{pair_state, PairKey, TableChecker};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckSet {
    pub tables: bool,
    pub guarantees: bool,
    pub phases: bool,
    pub forgetful: bool,
    pub potentials: bool,
    pub conservation: bool,
    pub trace: bool,
}

impl CheckSet {
    pub fn all() -> Self {
        CheckSet { tables: true, guarantees: true, phases: true, forgetful: true, potentials: true, conservation: true, trace: true }
    }

    /// Metrics and cheap checks only.
    pub fn light() -> Self {
        CheckSet { tables: false, guarantees: false, phases: true, forgetful: false, potentials: false, conservation: false, trace: false }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub check: &'static str,
    pub time: SimTime,
    pub detail: String,
}

#[derive(Clone, Debug, Default)]
pub struct Metrics {
    pub teams: u64,
    pub team_times: Vec<SimTime>,
    /// Reaction samples in time units.
    pub reaction: Vec<f64>,
    pub reaction_censored: u64,
    pub max_channels: usize,
    pub max_phase: f64,
    pub phases: u64,
    /// Channel retirement samples: (retired in time, total decided).
    pub retire_success: u64,
    pub retire_total: u64,
    /// Stagnant-window samples of the two-maximum potential.
    pub psi_hat_increase: u64,
    pub psi_hat_windows: u64,
    pub quiescent_checks: u64,
    pub table_transitions: u64,
    pub table_checks: u64,
    pub transport_retirements: u64,
    pub screened: u64,
    pub origin_callbacks: u64,
}

struct L3 {
    id: u64,
    ends: [u8; 2],
    ps: [NodeId; 2],
}

#[derive(Default)]
struct InstState {
    busy_since: BTreeMap<NodeId, SimTime>,
    busy_order: BTreeSet<(SimTime, NodeId)>,
    /// Current color of busy primaries, tracked for two-color instances.
    busy_color: BTreeMap<NodeId, Color>,
    op_count: u32,
    zero_since: SimTime,
    g2_flagged: bool,
    g2_next: SimTime,
}

pub struct Probe {
    pub checks: CheckSet,
    pub violations: Vec<Violation>,
    pub violation_count: u64,
    pub metrics: Metrics,
    pub table: TableChecker,
    phase_start: BTreeMap<(InstId, NodeId), SimTime>,
    phase_flagged: BTreeSet<(InstId, NodeId)>,
    chan_info: BTreeMap<u64, (InstId, NodeId, NodeId, NodeId)>,
    registered: BTreeMap<u64, u8>,
    insts: Vec<InstState>,
    g3_deadlines: Vec<(SimTime, InstId, NodeId, NodeId, u64)>,
    /// RelayUp envelope id -> first send time.
    relay_up: BTreeMap<u64, SimTime>,
    /// RelayDown envelope id -> first-hop send time.
    relay_down: BTreeMap<u64, SimTime>,
    /// In-flight Transport envelopes: id -> (inst, target primary, channel, tokens).
    transports: BTreeMap<u64, (InstId, NodeId, u64, u32)>,
    psi: Option<(i64, i64)>,
    psi_hat_series: Vec<(SimTime, i64)>,
    windows: Vec<(SimTime, Option<SimTime>)>,
    window_open: Option<SimTime>,
    l3: Vec<L3>,
    gid_origin: Vec<NodeId>,
    consumed: BTreeMap<u64, u64>,
    notified: BTreeSet<u64>,
    paths: BTreeMap<u64, Vec<u64>>,
    last_time: SimTime,
    tokens_before: Option<u64>,
    pub toggle_times: Vec<SimTime>,
}

const MAX_STORED: usize = 200;

impl Probe {
    pub fn new(checks: CheckSet) -> Self {
        Probe {
            checks,
            violations: Vec::new(),
            violation_count: 0,
            metrics: Metrics::default(),
            table: TableChecker::default(),
            phase_start: BTreeMap::new(),
            phase_flagged: BTreeSet::new(),
            chan_info: BTreeMap::new(),
            registered: BTreeMap::new(),
            insts: Vec::new(),
            g3_deadlines: Vec::new(),
            relay_up: BTreeMap::new(),
            relay_down: BTreeMap::new(),
            transports: BTreeMap::new(),
            psi: None,
            psi_hat_series: Vec::new(),
            windows: Vec::new(),
            window_open: None,
            l3: Vec::new(),
            gid_origin: Vec::new(),
            consumed: BTreeMap::new(),
            notified: BTreeSet::new(),
            paths: BTreeMap::new(),
            last_time: SimTime::ZERO,
            tokens_before: None,
            toggle_times: Vec::new(),
        }
    }

    fn flag(&mut self, check: &'static str, time: SimTime, detail: String) {
        self.violation_count += 1;
        if self.violations.len() < MAX_STORED {
            self.violations.push(Violation { check, time, detail });
        }
    }

    pub fn is_clean(&self) -> bool {
        self.violation_count == 0
    }

    pub fn count(&self, check: &str) -> usize {
        self.violations.iter().filter(|v| v.check == check).count()
    }

    fn inst(&mut self, i: InstId) -> &mut InstState {
        while self.insts.len() <= i as usize {
            self.insts.push(InstState::default());
        }
        &mut self.insts[i as usize]
    }

    /// Time-driven checks over the interval since the previous step.
    fn advance<A: Application>(&mut self, w: &World<A>, t: SimTime) {
        if self.checks.guarantees {
            let four = SimTime::from_units(4);
            for i in 0..self.insts.len() {
                let s = &self.insts[i];
                if s.op_count != 0 || s.g2_flagged || s.busy_order.len() < 2 || t <= s.g2_next {
                    continue;
                }
                // Earliest moment two busy primaries sharing a live utility coexist.
                // Two-color utilities never pair same-colored primaries.
                let busy: Vec<(SimTime, NodeId)> = s.busy_order.iter().copied().collect();
                let mut best: Option<SimTime> = None;
                'outer: for (j, &(tq, q)) in busy.iter().enumerate().skip(1) {
                    let uq = w.graph.drawn(q).unwrap_or(&[]);
                    for &(_, p) in &busy[..j] {
                        if s.busy_color.get(&p).is_some_and(|c| s.busy_color.get(&q) == Some(c)) {
                            continue;
                        }
                        let up = w.graph.drawn(p).unwrap_or(&[]);
                        if uq.iter().any(|u| !w.faulty[*u as usize] && up.contains(u)) {
                            best = Some(tq);
                            break 'outer;
                        }
                    }
                }
                let Some(b) = best else {
                    self.insts[i].g2_next = t;
                    continue;
                };
                let start = b.max(s.zero_since);
                if t > start + four {
                    let d = format!("inst {i}: busy primaries with a common live utility since {start} without an operational channel");
                    self.insts[i].g2_flagged = true;
                    self.flag("guarantee2", t, d);
                } else {
                    self.insts[i].g2_next = start + four;
                }
            }
            let due: Vec<_> = self.g3_deadlines.iter().filter(|d| d.0 < t).cloned().collect();
            self.g3_deadlines.retain(|d| d.0 >= t);
            for (dl, inst, peer, u, id) in due {
                if w.nodes[peer as usize][inst as usize].primary.meds.get(&u) == Some(&id) {
                    self.flag("guarantee3", t, format!("channel {id} still in C({peer}) at deadline {dl}"));
                }
            }
            let two = SimTime::from_units(2);
            let late: Vec<(u64, SimTime)> = self
                .relay_up
                .iter()
                .chain(self.relay_down.iter())
                .filter(|(_, &t0)| t > t0 + two)
                .map(|(k, v)| (*k, *v))
                .collect();
            for (k, t0) in late {
                self.relay_up.remove(&k);
                self.relay_down.remove(&k);
                self.flag("guarantee4", t, format!("relayed envelope {k} sent at {t0} undelivered after 2 units"));
            }
        }
        if self.checks.phases {
            let eight = SimTime::from_units(8);
            let over: Vec<_> = self
                .phase_start
                .iter()
                .filter(|(k, &s)| t > s + eight && !self.phase_flagged.contains(k))
                .map(|(k, s)| (*k, *s))
                .collect();
            for (k, s) in over {
                self.phase_flagged.insert(k);
                self.flag("phase_bound", t, format!("phase of primary {} (inst {}) begun at {s} still open", k.1, k.0));
            }
        }
        self.last_time = t;
    }

    pub fn observe<A: Application>(&mut self, w: &World<A>, step: &Step) {
        match step {
            Step::Activation(a) => {
                self.advance(w, a.time);
                self.activation(w, a);
            }
            Step::Lost(env) => {
                self.advance(w, env.deliver_at);
                self.transports.remove(&env.id);
                self.relay_up.remove(&env.id);
                self.relay_down.remove(&env.id);
                if self.checks.conservation && env.payload.tokens().total() > 0 {
                    self.flag("limbo", env.deliver_at, format!("tokens lost with envelope {}", env.id));
                }
            }
            Step::Toggles { time, .. } => {
                self.advance(w, *time);
                self.toggle_times.push(*time);
                if !w.is_quiescent() {
                    self.flag("toggle", *time, "status toggle at a non-quiescent time".into());
                }
            }
            Step::InjectionSkipped { time, .. } => self.advance(w, *time),
        }
    }

    fn activation<A: Application>(&mut self, w: &World<A>, a: &Activation) {
        let t = a.time;
        let mut events: Vec<(PairKey, TableEvent)> = Vec::new();
        let mut touched: BTreeSet<PairKey> = BTreeSet::new();
        let up = |v: NodeId| !w.faulty[v as usize];
        let screened = a.notes.iter().any(|(_, n)| matches!(n, Note::Screened { .. }));

        match &a.cause {
            Cause::Deliver(env) => {
                if let Some(code) = env.payload.table_code() {
                    let to_u = env.payload.dst_role() == Role::Utility;
                    let k = if to_u { (env.inst, env.src, env.dst) } else { (env.inst, env.dst, env.src) };
                    if self.checks.tables && up(k.1) && up(k.2) {
                        if let Err(e) = self.table.pop(k, to_u, code) {
                            self.flag("fifo", t, e);
                        }
                        events.push((k, TableEvent::Recv(code)));
                        touched.insert(k);
                    }
                }
                self.relayed_delivery(w, a, env, screened);
                if let Some(x) = self.transports.remove(&env.id) {
                    if let Payload::RelayUp(_) = env.payload {
                        for s in &a.sends {
                            if matches!(s.payload, Payload::RelayDown(PrincipalMsg::Transport(_))) {
                                self.transports.insert(s.id, x);
                            }
                        }
                    }
                }
            }
            Cause::Inject { bag, source, .. } => {
                if w.cfg.trace && *source != Source::Fake {
                    for _ in 0..bag.total() {
                        self.gid_origin.push(a.node);
                    }
                }
            }
            Cause::Start => {}
        }

        let mut team_here = false;
        let mut transport_sent = false;
        let mut grew_after_transport = false;
        for (inst, note) in &a.notes {
            let inst = *inst;
            match note {
                Note::TokInc { p } | Note::TokToggle { p, .. } => {
                    let ev = if matches!(note, Note::TokInc { .. }) { TableEvent::TokInc } else { TableEvent::TokToggle };
                    if inst == 0 && transport_sent && (ev == TableEvent::TokInc || matches!(note, Note::TokToggle { busy: true, .. })) {
                        grew_after_transport = true;
                    }
                    if self.checks.tables && up(*p) {
                        if let Some(us) = w.graph.drawn(*p) {
                            for &u in us {
                                if up(u) {
                                    events.push(((inst, *p, u), ev));
                                    touched.insert((inst, *p, u));
                                }
                            }
                        }
                    }
                    let rule = w.rule(inst);
                    let s = self.inst(inst);
                    if let Note::TokToggle { busy, .. } = note {
                        if let Some(old) = s.busy_since.remove(p) {
                            s.busy_order.remove(&(old, *p));
                        }
                        s.busy_color.remove(p);
                        if *busy {
                            s.busy_since.insert(*p, t);
                            s.busy_order.insert((t, *p));
                        }
                    }
                    if rule == TeamRule::Diff && s.busy_since.contains_key(p) {
                        let c = rule.color_of(w.nodes[*p as usize][inst as usize].primary.tok);
                        if s.busy_color.insert(*p, c).is_some_and(|old| old != c) {
                            let old = s.busy_since.insert(*p, t).unwrap();
                            s.busy_order.remove(&(old, *p));
                            s.busy_order.insert((t, *p));
                        }
                    }
                }
                Note::MedToggle { u, p } => {
                    let folded = matches!(&a.cause, Cause::Deliver(e) if e.src == *p && matches!(e.payload, Payload::NotBusy));
                    if self.checks.tables && !folded && up(*u) && up(*p) {
                        events.push(((inst, *p, *u), TableEvent::MedToggle));
                        touched.insert((inst, *p, *u));
                    }
                }
                Note::ChannelUp { u, p1, p2, id } => {
                    self.chan_info.insert(*id, (inst, *u, *p1, *p2));
                }
                Note::ChannelDown { .. } => {}
                Note::Operational { p, u, id, on } => {
                    let idle = a.notes.iter().any(|(i, n)| *i == inst && matches!(n, Note::TokToggle { p: q, busy: false } if q == p));
                    self.operational(w, t, inst, *p, *u, *id, *on, idle)
                }
                Note::PhaseBegin { p, .. } => {
                    self.metrics.phases += 1;
                    self.phase_start.insert((inst, *p), t);
                    let meds: Vec<u64> = w.nodes[*p as usize][inst as usize].primary.meds.values().copied().collect();
                    for id in meds {
                        if self.registered.get(&id) == Some(&2) {
                            let (_, _, p1, p2) = self.chan_info[&id];
                            self.l3.push(L3 { id, ends: [0, 0], ps: [p1, p2] });
                        }
                    }
                }
                Note::PhaseEnd { p } => {
                    if let Some(s) = self.phase_start.remove(&(inst, *p)) {
                        self.phase_flagged.remove(&(inst, *p));
                        let d = (t - s).as_f64();
                        if d > self.metrics.max_phase {
                            self.metrics.max_phase = d;
                        }
                        if self.checks.phases && d > 8.0 {
                            self.flag("phase_bound", t, format!("phase of {p} lasted {d}"));
                        }
                    }
                    let mut keep = Vec::new();
                    for mut s in core::mem::take(&mut self.l3) {
                        for i in 0..2 {
                            if s.ps[i] == *p {
                                s.ends[i] += 1;
                            }
                        }
                        if s.ends.iter().any(|&e| e >= 3) {
                            self.metrics.retire_total += 1;
                        } else {
                            keep.push(s);
                        }
                    }
                    self.l3 = keep;
                }
                Note::Team { p, teams, formation, gids, .. } => {
                    team_here |= inst == 0;
                    let rule = w.rule(inst);
                    for tm in teams {
                        let ok = match rule {
                            TeamRule::Plain { sigma } => tm.total() == sigma,
                            TeamRule::Diff => tm.a == 1 && tm.b == 1,
                        };
                        if !ok {
                            self.flag("safety", t, format!("team at {p} deleted {tm:?} under {rule:?}"));
                        }
                    }
                    self.metrics.teams += teams.len() as u64;
                    for _ in 0..teams.len() {
                        self.metrics.team_times.push(t);
                    }
                    if self.checks.trace && w.cfg.trace {
                        self.trace_formation(t, *formation, gids);
                    }
                }
                Note::TransportSent { p, bag, .. } => {
                    transport_sent |= inst == 0;
                    self.metrics.transport_retirements += 1;
                    if w.rule(inst).teams(*bag) > 0 || bag.is_empty() {
                        self.flag("transport_above_sigma", t, format!("primary {p} transported {bag:?}"));
                    }
                }
                Note::Screened { tokens, at, from, .. } => {
                    self.metrics.screened += 1;
                    if tokens.total() > 0 {
                        self.flag("limbo", t, format!("{at} screened {} tokens from {from}", tokens.total()));
                    }
                }
                Note::Origin { .. } => self.metrics.origin_callbacks += 1,
                Note::Ignored { .. } => {}
            }
        }

        if self.checks.trace {
            for (_, n) in &a.notes {
                if let Note::Origin { node, formation, count, gids } = n {
                    self.trace_origin(t, *node, *formation, *count, gids);
                }
            }
        }

        for env in &a.sends {
            if let Some(code) = env.payload.table_code() {
                let to_u = env.payload.dst_role() == Role::Utility;
                let k = if to_u { (env.inst, env.src, env.dst) } else { (env.inst, env.dst, env.src) };
                if self.checks.tables && up(k.1) && up(k.2) {
                    self.table.push(k, to_u, code);
                    touched.insert(k);
                }
            }
            match &env.payload {
                Payload::RelayUp(m) => {
                    if self.checks.guarantees {
                        self.relay_up.insert(env.id, t);
                    }
                    if let PrincipalMsg::Transport(bag) = m {
                        if let Some(&(inst, _, p1, p2)) = self.chan_info.get(&env.tag) {
                            let target = if p1 == env.src { p2 } else { p1 };
                            self.transports.insert(env.id, (inst, target, env.tag, bag.total()));
                        }
                    }
                }
                _ => {}
            }
            if let Some(tr) = &env.trace {
                for g in &tr.gids {
                    self.paths.entry(*g).or_default().push(env.id);
                }
            }
        }

        if self.checks.tables {
            for (k, ev) in events {
                if let Err(e) = self.table.apply(k, ev) {
                    self.flag("table9", t, e);
                }
            }
            for k in touched {
                let (l0, l1) = self.table.links.get(&k).cloned().unwrap_or_default();
                let s = pair_state(&w.nodes[k.1 as usize][k.0 as usize], &w.nodes[k.2 as usize][k.0 as usize], k.1, k.2, &l0, &l1);
                if let Err(e) = self.table.verify(k, &s) {
                    self.flag("table8", t, e);
                    // Resynchronise so one fault does not cascade.
                    let rows = self.table.classify(&s);
                    if let Some(r) = rows.first() {
                        self.table.rows.insert(k, *r);
                    }
                }
            }
            self.metrics.table_transitions = self.table.transitions;
            self.metrics.table_checks = self.table.checked;
        }

        // Guarantee 1 and 5 at the activated node.
        for (i, tf) in w.nodes[a.node as usize].iter().enumerate() {
            let c = tf.primary.meds.len();
            if c > self.metrics.max_channels {
                self.metrics.max_channels = c;
            }
            if self.checks.guarantees && c > 0 && !tf.primary.is_busy() {
                self.flag("guarantee1", t, format!("primary {} (inst {i}) has channels but no tokens", a.node));
            }
            if self.checks.guarantees {
                if let Some(us) = w.graph.drawn(a.node) {
                    if c > us.len() {
                        self.flag("guarantee5", t, format!("|C({})| = {c} exceeds |U| = {}", a.node, us.len()));
                    }
                }
            }
        }

        if self.checks.guarantees {
            for (id, &(inst, target, chan, _)) in &self.transports {
                let p = &w.nodes[target as usize][inst as usize].primary;
                if !p.is_busy() || !p.meds.values().any(|&c| c == chan) {
                    let d = format!("Transport {id} in flight toward {target} but channel {chan} not in its set");
                    self.violation_count += 1;
                    if self.violations.len() < MAX_STORED {
                        self.violations.push(Violation { check: "obs2", time: t, detail: d });
                    }
                }
            }
        }

        if self.checks.conservation {
            for i in 0..w.cfg.rules.len() {
                let au = w.audit(i as InstId);
                if !au.balances() {
                    self.flag("conservation", t, format!("inst {i}: {au:?}"));
                }
            }
        }

        if let (true, TeamRule::Plain { sigma }) = (self.checks.potentials, w.rule(0)) {
            let before_tokens = self.tokens_before.unwrap_or(0);
            let (psi, psi_hat) = self.potentials(w);
            if let Some((p0, h0)) = self.psi {
                if !team_here {
                    if transport_sent && !grew_after_transport && psi - p0 != 1 {
                        self.flag("psi", t, format!("Transport retirement moved psi by {}", psi - p0));
                    } else if psi < p0 {
                        self.flag("psi", t, format!("psi fell from {p0} to {psi}"));
                    }
                    if before_tokens >= sigma as u64 && psi_hat < h0 {
                        self.flag("psi_hat", t, format!("psi_hat fell from {h0} to {psi_hat}"));
                    }
                }
            }
            self.psi = Some((psi, psi_hat));
            if self.psi_hat_series.last().map(|x| x.0) == Some(t) {
                self.psi_hat_series.pop();
            }
            self.psi_hat_series.push((t, psi_hat));
        }

        // Reaction windows on instance 0.
        let sigma = w.rule(0).sigma() as u64;
        let l = &w.ledgers[0];
        let tokens = l.injected - l.deleted - l.limbo;
        self.tokens_before = Some(tokens);
        if team_here {
            if let Some(s) = self.window_open.take() {
                self.metrics.reaction.push((t - s).as_f64());
                self.windows.push((s, Some(t)));
            }
        }
        if self.window_open.is_none() && tokens >= sigma {
            self.window_open = Some(t);
        }

        if self.checks.forgetful && w.is_quiescent() {
            self.metrics.quiescent_checks += 1;
            for (v, insts) in w.nodes.iter().enumerate() {
                for (i, tf) in insts.iter().enumerate() {
                    if !tf.is_initial() {
                        let d = format!("node {v} inst {i} not in initial state at quiescence: {:?} {:?}", tf.primary, tf.utility);
                        self.flag("forgetful", t, d);
                    }
                }
            }
        }
    }

    fn relayed_delivery<A: Application>(&mut self, w: &World<A>, a: &Activation, env: &Envelope, screened: bool) {
        if !self.checks.guarantees {
            return;
        }
        let t = a.time;
        match &env.payload {
            Payload::RelayUp(_) => {
                let t0 = self.relay_up.remove(&env.id).unwrap_or(env.sent_at);
                if screened {
                    self.screen_ok(w, t, env);
                } else {
                    for s in &a.sends {
                        if s.payload.is_relayed() {
                            self.relay_down.insert(s.id, t0);
                        }
                    }
                }
            }
            Payload::RelayDown(_) => {
                let t0 = self.relay_down.remove(&env.id).unwrap_or(env.sent_at);
                if screened {
                    self.screen_ok(w, t, env);
                } else {
                    let p = &w.nodes[env.dst as usize][env.inst as usize].primary;
                    let dropped = a.notes.iter().find_map(|(_, n)| match n {
                        Note::Operational { p, u, id, on: false } if *p == env.dst && *u == env.src => Some(*id),
                        _ => None,
                    });
                    let id = dropped.or_else(|| p.meds.get(&env.src).copied());
                    if id != Some(env.tag) {
                        self.flag("guarantee4", t, format!("relayed message over channel {} accepted by {} on another channel", env.tag, env.dst));
                    }
                    if t > t0 + SimTime::from_units(2) {
                        self.flag("guarantee4", t, format!("relayed message sent at {t0} accepted at {t}"));
                    }
                }
            }
            _ => {}
        }
    }

    /// Screening is acceptable only once the carrying channel stopped being operational.
    fn screen_ok<A: Application>(&mut self, _w: &World<A>, t: SimTime, env: &Envelope) {
        if self.registered.get(&env.tag) == Some(&2) {
            self.flag("guarantee4", t, format!("{} screened a message on operational channel {}", env.dst, env.tag));
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn operational<A: Application>(&mut self, w: &World<A>, t: SimTime, inst: InstId, p: NodeId, u: NodeId, id: u64, on: bool, idle: bool) {
        let before = self.registered.get(&id).copied().unwrap_or(0);
        let after = if on { before + 1 } else { before.saturating_sub(1) };
        if after == 0 {
            self.registered.remove(&id);
        } else {
            self.registered.insert(id, after);
        }
        let s = self.inst(inst);
        if before < 2 && after == 2 {
            s.op_count += 1;
            s.g2_flagged = false;
        }
        if before == 2 && after < 2 {
            s.op_count -= 1;
            if s.op_count == 0 {
                s.zero_since = t;
                s.g2_flagged = false;
            }
            let mut keep = Vec::new();
            for x in core::mem::take(&mut self.l3) {
                if x.id == id {
                    self.metrics.retire_success += 1;
                    self.metrics.retire_total += 1;
                } else {
                    keep.push(x);
                }
            }
            self.l3 = keep;
        }
        if on || !self.checks.guarantees {
            return;
        }
        let Some(&(_, _, p1, p2)) = self.chan_info.get(&id) else { return };
        let peer = if p1 == p { p2 } else { p1 };
        let retiring = idle || !w.nodes[p as usize][inst as usize].primary.is_busy();
        let peer_has = w.nodes[peer as usize][inst as usize].primary.meds.get(&u) == Some(&id);
        if retiring {
            if peer_has {
                self.g3_deadlines.push((t + SimTime::from_units(2), inst, peer, u, id));
            }
        } else if peer_has {
            self.flag("guarantee3", t, format!("channel {id} left C({p}) while both endpoints stayed busy"));
        }
        if !retiring {
            self.g3_deadlines.retain(|d| !(d.2 == p && d.4 == id));
        }
    }

    fn potentials<A: Application>(&self, w: &World<A>) -> (i64, i64) {
        let mut r: BTreeMap<NodeId, i64> = BTreeMap::new();
        for &(inst, target, _, k) in self.transports.values() {
            if inst == 0 {
                *r.entry(target).or_insert(0) += k as i64;
            }
        }
        let mut psi = 0i64;
        let (mut m1, mut m2) = (0i64, 0i64);
        for (v, insts) in w.nodes.iter().enumerate() {
            let p = &insts[0].primary;
            let rv = r.get(&(v as NodeId)).copied().unwrap_or(0);
            let x = p.tok.total() as i64 + rv;
            if p.is_busy() {
                psi += x - 1;
            }
            if x > m1 {
                m2 = m1;
                m1 = x;
            } else if x > m2 {
                m2 = x;
            }
        }
        (psi, m1 + m2)
    }

    fn trace_formation(&mut self, t: SimTime, formation: u64, gids: &[u64]) {
        let mut succ: BTreeMap<u64, u64> = BTreeMap::new();
        for g in gids {
            if self.consumed.insert(*g, formation).is_some() {
                self.flag("trace", t, format!("token {g} consumed twice"));
            }
            let path = self.paths.remove(g).unwrap_or_default();
            let mut seen = BTreeSet::new();
            for (i, hop) in path.iter().enumerate() {
                if !seen.insert(*hop) {
                    self.flag("trace", t, format!("token {g} path revisits envelope {hop}"));
                }
                let next = path.get(i + 1).copied().unwrap_or(u64::MAX);
                if let Some(prev) = succ.insert(*hop, next) {
                    if prev != next {
                        self.flag("trace", t, format!("formation {formation}: envelope {hop} has two successors"));
                    }
                }
            }
        }
    }

    fn trace_origin(&mut self, t: SimTime, node: NodeId, formation: u64, count: u32, gids: &[u64]) {
        if gids.len() != count as usize {
            self.flag("trace", t, format!("origin callback count {count} for {} tokens", gids.len()));
        }
        for g in gids {
            if self.gid_origin.get(*g as usize) != Some(&node) {
                self.flag("trace", t, format!("token {g} reported to {node}, not its injection node"));
            }
            if self.consumed.get(g) != Some(&formation) {
                self.flag("trace", t, format!("token {g} reported for formation {formation} it was not in"));
            }
            if !self.notified.insert(*g) {
                self.flag("trace", t, format!("token {g} notified twice"));
            }
        }
    }

    /// End-of-run checks. `settled` means the event queue drained.
    pub fn finish<A: Application>(&mut self, w: &World<A>) {
        let settled = !w.censored && w.next_event_time().is_none() && w.error.is_none();
        let end = w.now();
        if settled {
            // Nothing moves any more; windows that are open stay open forever.
            self.advance(w, end + SimTime::from_units(1_000));
        } else {
            self.advance(w, end);
        }
        if let Some(s) = self.window_open.take() {
            self.metrics.reaction_censored += 1;
            self.windows.push((s, None));
        }
        if settled {
            for i in 0..w.cfg.rules.len() {
                if !matches!(w.rule(i as InstId), TeamRule::Plain { .. }) {
                    continue;
                }
                let holders: Vec<NodeId> = (0..w.n())
                    .filter(|&v| {
                        let p = &w.nodes[v as usize][i].primary;
                        !p.tok.is_empty() || !p.pending.is_empty()
                    })
                    .collect();
                if holders.len() > 1 {
                    self.flag("accumulation", end, format!("inst {i}: leftover tokens spread over {holders:?}"));
                }
            }
            if self.checks.trace && w.cfg.trace {
                let missing = self.consumed.keys().filter(|g| !self.notified.contains(g)).count();
                if missing > 0 {
                    self.flag("trace", end, format!("{missing} consumed tokens never reported to their origin"));
                }
            }
        }
        // Stagnant-window samples: 53-unit stretches inside reaction windows.
        let span = SimTime::from_units(53);
        let series = core::mem::take(&mut self.psi_hat_series);
        if !series.is_empty() {
            let at = |x: SimTime| -> i64 {
                let i = series.partition_point(|e| e.0 <= x);
                if i == 0 { 0 } else { series[i - 1].1 }
            };
            for &(s, e) in &self.windows {
                let stop = e.unwrap_or(end);
                let mut a = s;
                while a + span < stop {
                    self.metrics.psi_hat_windows += 1;
                    if at(a + span) > at(a) {
                        self.metrics.psi_hat_increase += 1;
                    }
                    a = a + span;
                }
            }
        }
    }
}

impl Probe {
    /// Reaction windows as (start, end) pairs; `None` end means censored.
    pub fn windows(&self) -> &[(SimTime, Option<SimTime>)] {
        &self.windows
    }
}
