//! Per-node protocol state: the primary's principal and channel layers, and the
//! utility's channel layer. Handlers are synchronous and write their effects
//! into an [`Effects`] buffer owned by the kernel.

use crate::bag::{Bag, Color, TeamRule};
use crate::msg::{InstId, NodeId, Payload, PrincipalMsg, TraceStamp};
use crate::rng::StreamRng;
use crate::trace::TraceStore;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use rand::Rng;

/// Deliberate protocol faults, used only to test that the checkers catch them.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mutation {
    #[default]
    None,
    /// The primary never answers Channel with ChannelAck.
    SkipChannelAck,
    /// Phase ends never form teams, so a node may later transport σ or more tokens.
    NoFormAtPhaseEnd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseType {
    Center,
    Arm,
}

/// Local events of the channel-layer conformance tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableEvent {
    TokInc,
    TokToggle,
    MedToggle,
    Recv(u8),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Note {
    /// Token count of primary `p` rose within the positives.
    TokInc { p: NodeId },
    /// Primary `p` switched between busy and idle.
    TokToggle { p: NodeId, busy: bool },
    /// Utility `u` started or stopped mediating `p`.
    MedToggle { u: NodeId, p: NodeId },
    ChannelUp { u: NodeId, p1: NodeId, p2: NodeId, id: u64 },
    ChannelDown { u: NodeId, id: u64 },
    /// Channel `id` entered or left C(p).
    Operational { p: NodeId, u: NodeId, id: u64, on: bool },
    PhaseBegin { p: NodeId, kind: PhaseType },
    PhaseEnd { p: NodeId },
    Team { p: NodeId, teams: Vec<Bag>, remainder: Bag, formation: u64, gids: Vec<u64> },
    TransportSent { p: NodeId, u: NodeId, bag: Bag, id: u64 },
    Screened { at: NodeId, from: NodeId, msg: &'static str, tokens: Bag, id: u64 },
    /// A response whose type did not match the phase type.
    Ignored { p: NodeId, u: NodeId, msg: &'static str },
    /// A trace-tree origin callback.
    Origin { node: NodeId, formation: u64, count: u32, gids: Vec<u64> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutMsg {
    pub dst: NodeId,
    pub inst: InstId,
    pub payload: Payload,
    pub tag: u64,
    pub trace: Option<TraceStamp>,
}

/// Effects of one activation, in program order.
#[derive(Debug, Default)]
pub struct Effects {
    pub sends: Vec<OutMsg>,
    pub notes: Vec<(InstId, Note)>,
    /// Remainder tokens to re-inject right after this activation.
    pub fake: Vec<(InstId, Bag)>,
}

impl Effects {
    pub fn clear(&mut self) {
        self.sends.clear();
        self.notes.clear();
        self.fake.clear();
    }
}

/// Everything a handler may touch besides its own state.
pub struct Ctx<'a> {
    pub me: NodeId,
    pub inst: InstId,
    pub rule: TeamRule,
    pub utilities: &'a [NodeId],
    pub rng: &'a mut StreamRng,
    pub out: &'a mut Effects,
    pub ids: &'a mut u64,
    pub mutation: Mutation,
}

impl Ctx<'_> {
    fn send(&mut self, dst: NodeId, payload: Payload, tag: u64) {
        self.out.sends.push(OutMsg { dst, inst: self.inst, payload, tag, trace: None });
    }

    fn note(&mut self, n: Note) {
        self.out.notes.push((self.inst, n));
    }

    fn fresh_id(&mut self) -> u64 {
        *self.ids += 1;
        *self.ids
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Primary {
    pub tok: Bag,
    pub busy_acked: BTreeSet<NodeId>,
    /// Mediators of channels in C(p), with their instrumentation ids.
    pub meds: BTreeMap<NodeId, u64>,
    pub phase: Option<PhaseType>,
    pub awaiting: BTreeMap<NodeId, bool>,
    pub delaying: BTreeMap<NodeId, bool>,
    pub pending: Bag,
    pub color: Option<Color>,
}

impl Primary {
    pub fn is_busy(&self) -> bool {
        !self.tok.is_empty()
    }

    fn relay(&self, cx: &mut Ctx, u: NodeId, m: PrincipalMsg) {
        let tag = self.meds.get(&u).copied().unwrap_or(0);
        cx.send(u, Payload::RelayUp(m), tag);
    }

    // ---- channel layer ----

    fn tokens_changed(&mut self, old: Bag, cx: &mut Ctx) {
        let new = self.tok;
        if old.is_empty() && !new.is_empty() {
            self.color = Some(cx.rule.color_of(new));
            cx.note(Note::TokToggle { p: cx.me, busy: true });
            for &u in cx.utilities {
                cx.send(u, Payload::Busy, 0);
            }
        } else if !old.is_empty() && new.total() > old.total() {
            cx.note(Note::TokInc { p: cx.me });
            let color = self.color.unwrap_or(Color::A);
            for &u in &self.busy_acked {
                cx.send(u, Payload::TokensUpdate { k: new.total(), color }, 0);
            }
        }
    }

    /// Busy to idle transition. Channel removals are reported to the principal
    /// layer, which runs its end-of-phase check once afterwards.
    fn became_idle(&mut self, cx: &mut Ctx) {
        cx.note(Note::TokToggle { p: cx.me, busy: false });
        self.color = None;
        for &u in &self.busy_acked {
            if !self.meds.contains_key(&u) {
                cx.send(u, Payload::NotBusy, 0);
            }
        }
        self.busy_acked = self.meds.keys().copied().collect();
        let meds = core::mem::take(&mut self.meds);
        for (u, id) in meds {
            cx.send(u, Payload::NotBusy, 0);
            self.busy_acked.remove(&u);
            cx.note(Note::Operational { p: cx.me, u, id, on: false });
            self.awaiting.remove(&u);
            self.delaying.remove(&u);
        }
    }

    pub fn on_busy_ack(&mut self, u: NodeId, cx: &mut Ctx) {
        if self.is_busy() {
            self.busy_acked.insert(u);
            let color = self.color.unwrap_or(Color::A);
            cx.send(u, Payload::TokensUpdate { k: self.tok.total(), color }, 0);
        } else {
            cx.send(u, Payload::NotBusy, 0);
        }
    }

    pub fn on_channel(&mut self, u: NodeId, id: u64, cx: &mut Ctx, tr: &mut Option<TraceStore>) {
        if cx.mutation != Mutation::SkipChannelAck {
            cx.send(u, Payload::ChannelAck, 0);
        }
        if self.is_busy() && self.busy_acked.contains(&u) {
            self.meds.insert(u, id);
            cx.note(Note::Operational { p: cx.me, u, id, on: true });
            self.channel_added(u, cx, tr);
        }
    }

    pub fn on_no_channel(&mut self, u: NodeId, cx: &mut Ctx, tr: &mut Option<TraceStore>) {
        if let Some(id) = self.meds.remove(&u) {
            cx.note(Note::Operational { p: cx.me, u, id, on: false });
            self.awaiting.remove(&u);
            self.delaying.remove(&u);
            self.check_end_phase(cx, tr);
        }
    }

    pub fn on_relayed(
        &mut self,
        u: NodeId,
        m: PrincipalMsg,
        tag: u64,
        stamp: Option<TraceStamp>,
        cx: &mut Ctx,
        tr: &mut Option<TraceStore>,
    ) {
        if !self.meds.contains_key(&u) {
            cx.note(Note::Screened { at: cx.me, from: u, msg: m.name(), tokens: m.tokens(), id: tag });
            return;
        }
        self.principal_receive(u, m, stamp, cx, tr);
    }

    // ---- principal layer ----

    pub fn inject(&mut self, k: Bag, cx: &mut Ctx, tr: &mut Option<TraceStore>, origin: TraceOrigin) {
        if self.meds.is_empty() {
            debug_assert!(self.phase.is_none());
            if let Some(t) = tr {
                t.add(k.total(), false, origin);
            }
            let old = self.tok;
            self.tok = self.tok.add(k);
            self.tokens_changed(old, cx);
            if cx.rule.teams(self.tok) > 0 {
                self.form_teams(cx, tr);
            }
        } else {
            if let Some(t) = tr {
                t.add(k.total(), true, origin);
            }
            self.pending = self.pending.add(k);
        }
    }

    fn channel_added(&mut self, u: NodeId, cx: &mut Ctx, tr: &mut Option<TraceStore>) {
        self.awaiting.insert(u, false);
        self.delaying.insert(u, false);
        if self.meds.len() == 1 {
            self.begin_new_phase(cx);
        }
        let _ = tr;
    }

    fn principal_receive(
        &mut self,
        u: NodeId,
        m: PrincipalMsg,
        stamp: Option<TraceStamp>,
        cx: &mut Ctx,
        tr: &mut Option<TraceStore>,
    ) {
        let phase = self.phase.expect("operational primary has a phase");
        match m {
            PrincipalMsg::TokensPlease => match phase {
                PhaseType::Center => self.relay(cx, u, PrincipalMsg::NoTransport),
                PhaseType::Arm => self.transport(u, cx, tr),
            },
            PrincipalMsg::Waiting => match phase {
                PhaseType::Center => {
                    self.delaying.insert(u, true);
                }
                PhaseType::Arm => self.relay(cx, u, PrincipalMsg::GoOn),
            },
            resp => {
                if let PrincipalMsg::Transport(k) = resp {
                    if let (Some(t), Some(s)) = (tr.as_mut(), stamp.as_ref()) {
                        t.receive_held(u, k.total(), s);
                    }
                    let old = self.tok;
                    self.tok = self.tok.add(k);
                    self.tokens_changed(old, cx);
                }
                let matches = match phase {
                    PhaseType::Arm => resp == PrincipalMsg::GoOn,
                    PhaseType::Center => resp != PrincipalMsg::GoOn,
                };
                if matches {
                    self.awaiting.insert(u, false);
                    self.check_end_phase(cx, tr);
                } else {
                    cx.note(Note::Ignored { p: cx.me, u, msg: resp.name() });
                }
            }
        }
    }

    fn transport(&mut self, u: NodeId, cx: &mut Ctx, tr: &mut Option<TraceStore>) {
        let bag = self.tok;
        let id = self.meds[&u];
        cx.note(Note::TransportSent { p: cx.me, u, bag, id });
        let stamp = tr.as_mut().map(|t| t.send_held(u, bag.total()));
        cx.out.sends.push(OutMsg {
            dst: u,
            inst: cx.inst,
            payload: Payload::RelayUp(PrincipalMsg::Transport(bag)),
            tag: id,
            trace: stamp,
        });
        self.tok = Bag::EMPTY;
        self.became_idle(cx);
        // The phase ends abruptly; any tokens injected during it are folded now.
        self.check_end_phase(cx, tr);
    }

    fn check_end_phase(&mut self, cx: &mut Ctx, tr: &mut Option<TraceStore>) {
        if self.phase.is_none() || self.awaiting.values().any(|&a| a) {
            return;
        }
        cx.note(Note::PhaseEnd { p: cx.me });
        if !self.pending.is_empty() {
            if let Some(t) = tr {
                t.fold_pending();
            }
            let old = self.tok;
            self.tok = self.tok.add(self.pending);
            self.pending = Bag::EMPTY;
            self.tokens_changed(old, cx);
        }
        if cx.rule.teams(self.tok) > 0 && cx.mutation != Mutation::NoFormAtPhaseEnd {
            self.form_teams(cx, tr);
        } else if self.meds.is_empty() {
            self.phase = None;
        } else {
            self.begin_new_phase(cx);
        }
    }

    fn begin_new_phase(&mut self, cx: &mut Ctx) {
        let kind = if cx.rng.gen::<bool>() { PhaseType::Center } else { PhaseType::Arm };
        self.phase = Some(kind);
        cx.note(Note::PhaseBegin { p: cx.me, kind });
        let meds: Vec<NodeId> = self.meds.keys().copied().collect();
        for u in meds {
            let m = match kind {
                PhaseType::Center => PrincipalMsg::TokensPlease,
                PhaseType::Arm => {
                    if self.delaying[&u] {
                        self.relay(cx, u, PrincipalMsg::GoOn);
                    }
                    PrincipalMsg::Waiting
                }
            };
            self.delaying.insert(u, false);
            self.awaiting.insert(u, true);
            self.relay(cx, u, m);
        }
    }

    fn form_teams(&mut self, cx: &mut Ctx, tr: &mut Option<TraceStore>) {
        let (teams, remainder) = cx.rule.split(self.tok);
        let formation = cx.fresh_id();
        let mut gids = Vec::new();
        if let Some(t) = tr {
            let consumed = self.tok.total() - remainder.total();
            let (g, reports, origin) = t.form(consumed, remainder.total(), formation);
            gids = g;
            if let Some((count, og)) = origin {
                cx.note(Note::Origin { node: cx.me, formation, count, gids: og });
            }
            for (port, counters) in reports {
                cx.send(port, Payload::TraceReport { formation, counters }, 0);
            }
        }
        cx.note(Note::Team { p: cx.me, teams, remainder, formation, gids });
        self.phase = None;
        self.tok = Bag::EMPTY;
        self.became_idle(cx);
        if !remainder.is_empty() {
            cx.out.fake.push((cx.inst, remainder));
        }
    }
}

/// Where trace records for newly added tokens come from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TraceOrigin {
    /// Fresh tokens injected here, with ground-truth ids.
    Injected(Vec<u64>),
    /// A remainder re-injection; records already exist.
    Fake,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Utility {
    /// busy_toks entries that are not ⊥, in order of last update.
    pub busy_toks: Vec<(NodeId, u32, Color)>,
    /// Current channel: endpoints and instrumentation id.
    pub chan: Option<(NodeId, NodeId, u64)>,
    /// Non-zero diff counters.
    pub diff: BTreeMap<NodeId, u32>,
}

impl Utility {
    pub fn busy_tok(&self, p: NodeId) -> Option<u32> {
        self.busy_toks.iter().find(|e| e.0 == p).map(|e| e.1)
    }

    pub fn mediates(&self, p: NodeId) -> bool {
        matches!(self.chan, Some((a, b, _)) if a == p || b == p)
    }

    fn set(&mut self, p: NodeId, k: u32, c: Color) {
        self.busy_toks.retain(|e| e.0 != p);
        self.busy_toks.push((p, k, c));
    }

    pub fn on_busy(&mut self, p: NodeId, cx: &mut Ctx) {
        if self.busy_tok(p).is_none() {
            self.set(p, 0, Color::A);
            cx.send(p, Payload::BusyAck, 0);
        }
    }

    pub fn on_tokens_update(&mut self, p: NodeId, k: u32, color: Color, cx: &mut Ctx) {
        self.set(p, k, color);
        self.create_channel(cx);
    }

    pub fn on_not_busy(&mut self, p: NodeId, cx: &mut Ctx) {
        self.busy_toks.retain(|e| e.0 != p);
        if let Some((a, b, id)) = self.chan {
            if a == p || b == p {
                let other = if a == p { b } else { a };
                cx.send(other, Payload::NoChannel, id);
                self.chan = None;
                cx.note(Note::MedToggle { u: cx.me, p: a });
                cx.note(Note::MedToggle { u: cx.me, p: b });
                cx.note(Note::ChannelDown { u: cx.me, id });
                self.create_channel(cx);
            }
        }
    }

    pub fn on_channel_ack(&mut self, p: NodeId) {
        if let Some(d) = self.diff.get_mut(&p) {
            *d -= 1;
            if *d == 0 {
                self.diff.remove(&p);
            }
        }
    }

    pub fn on_relayed(
        &mut self,
        p: NodeId,
        m: PrincipalMsg,
        tag: u64,
        stamp: Option<TraceStamp>,
        cx: &mut Ctx,
        tr: &mut Option<TraceStore>,
    ) {
        match self.chan {
            Some((a, b, id)) if (a == p || b == p) && !self.diff.contains_key(&p) => {
                let other = if a == p { b } else { a };
                let fwd = match (tr.as_mut(), stamp) {
                    (Some(t), Some(s)) => Some(t.relay(p, other, m.tokens().total(), &s)),
                    _ => None,
                };
                cx.out.sends.push(OutMsg {
                    dst: other,
                    inst: cx.inst,
                    payload: Payload::RelayDown(m),
                    tag: id,
                    trace: fwd,
                });
            }
            _ => cx.note(Note::Screened { at: cx.me, from: p, msg: m.name(), tokens: m.tokens(), id: tag }),
        }
    }

    fn create_channel(&mut self, cx: &mut Ctx) {
        if self.chan.is_some() {
            return;
        }
        let best = |skip: Option<(NodeId, Color)>, diff: bool| {
            let mut pick: Option<(NodeId, u32, Color)> = None;
            for &(p, k, c) in &self.busy_toks {
                if k == 0 {
                    continue;
                }
                if let Some((q, qc)) = skip {
                    if p == q || (diff && c == qc) {
                        continue;
                    }
                }
                if pick.map_or(true, |(_, bk, _)| k > bk) {
                    pick = Some((p, k, c));
                }
            }
            pick
        };
        let diff_rule = cx.rule == TeamRule::Diff;
        let Some((p1, _, c1)) = best(None, diff_rule) else { return };
        let Some((p2, _, _)) = best(Some((p1, c1)), diff_rule) else { return };
        let id = cx.fresh_id();
        self.chan = Some((p1, p2, id));
        cx.note(Note::ChannelUp { u: cx.me, p1, p2, id });
        for p in [p1, p2] {
            cx.note(Note::MedToggle { u: cx.me, p });
            cx.send(p, Payload::Channel, id);
            *self.diff.entry(p).or_insert(0) += 1;
        }
    }
}

/// One TF instance at one physical node.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TfNode {
    pub primary: Primary,
    pub utility: Utility,
    pub trace: Option<TraceStore>,
}

impl TfNode {
    pub fn new(trace: bool) -> Self {
        TfNode { trace: trace.then(TraceStore::default), ..Default::default() }
    }

    /// Handles a channel-layer or relayed payload from physical node `src`.
    pub fn deliver(&mut self, src: NodeId, payload: Payload, tag: u64, stamp: Option<TraceStamp>, cx: &mut Ctx) {
        let tr = &mut self.trace;
        match payload {
            Payload::Busy => self.utility.on_busy(src, cx),
            Payload::TokensUpdate { k, color } => self.utility.on_tokens_update(src, k, color, cx),
            Payload::NotBusy => self.utility.on_not_busy(src, cx),
            Payload::ChannelAck => self.utility.on_channel_ack(src),
            Payload::RelayUp(m) => self.utility.on_relayed(src, m, tag, stamp, cx, tr),
            Payload::BusyAck => self.primary.on_busy_ack(src, cx),
            Payload::Channel => self.primary.on_channel(src, tag, cx, tr),
            Payload::NoChannel => self.primary.on_no_channel(src, cx, tr),
            Payload::RelayDown(m) => self.primary.on_relayed(src, m, tag, stamp, cx, tr),
            Payload::TraceReport { formation, counters } => {
                if let Some(t) = tr {
                    let (origin, reports) = t.report(src, formation, &counters);
                    if let Some((count, gids)) = origin {
                        cx.note(Note::Origin { node: cx.me, formation, count, gids });
                    }
                    for (port, counters) in reports {
                        cx.send(port, Payload::TraceReport { formation, counters }, 0);
                    }
                }
            }
            Payload::Start | Payload::LeaderAnnounce => {}
        }
    }

    pub fn inject(&mut self, k: Bag, origin: TraceOrigin, cx: &mut Ctx) {
        self.primary.inject(k, cx, &mut self.trace, origin);
    }

    /// True when the node is back in its initial state. Trace counters are
    /// monotone by design and excluded.
    pub fn is_initial(&self) -> bool {
        self.primary == Primary::default()
            && self.utility == Utility::default()
            && self.trace.as_ref().map_or(true, |t| t.holds_nothing())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, TAG_RUNTIME};
    use alloc::vec;

    struct H {
        out: Effects,
        ids: u64,
        rng: StreamRng,
        us: Vec<NodeId>,
        rule: TeamRule,
    }

    impl H {
        fn new(sigma: u32) -> Self {
            H { out: Effects::default(), ids: 100, rng: stream(1, TAG_RUNTIME, 0), us: vec![10, 11, 12, 13, 14], rule: TeamRule::Plain { sigma } }
        }

        fn cx(&mut self) -> Ctx<'_> {
            Ctx { me: 0, inst: 0, rule: self.rule, utilities: &self.us, rng: &mut self.rng, out: &mut self.out, ids: &mut self.ids, mutation: Mutation::None }
        }

        fn sent(&self) -> Vec<(NodeId, &'static str)> {
            self.out.sends.iter().map(|m| (m.dst, m.payload.name())).collect()
        }

        fn relayed(&self) -> Vec<(NodeId, PrincipalMsg)> {
            self.out
                .sends
                .iter()
                .filter_map(|m| match &m.payload {
                    Payload::RelayUp(x) => Some((m.dst, x.clone())),
                    _ => None,
                })
                .collect()
        }

        fn screened(&self) -> bool {
            self.out.notes.iter().any(|(_, n)| matches!(n, Note::Screened { .. }))
        }
    }

    /// A busy primary with one operational channel through `u`.
    fn in_phase(tok: u32, u: NodeId, kind: PhaseType) -> Primary {
        let mut p = Primary { tok: Bag::plain(tok), phase: Some(kind), color: Some(Color::A), ..Default::default() };
        p.busy_acked.insert(u);
        p.meds.insert(u, 7);
        p.awaiting.insert(u, true);
        p.delaying.insert(u, false);
        p
    }

    fn inject(p: &mut Primary, h: &mut H, k: u32) {
        let mut tr = None;
        p.inject(Bag::plain(k), &mut h.cx(), &mut tr, TraceOrigin::Fake);
    }

    #[test]
    fn becoming_busy_broadcasts_busy() {
        let mut h = H::new(5);
        let mut p = Primary::default();
        inject(&mut p, &mut h, 3);
        assert_eq!(p.tok.total(), 3);
        assert_eq!(h.sent(), vec![(10, "Busy"), (11, "Busy"), (12, "Busy"), (13, "Busy"), (14, "Busy")]);
    }

    #[test]
    fn channel_accepted_only_when_busy_and_acked() {
        let mut h = H::new(5);
        let mut tr = None;
        let mut idle = Primary::default();
        idle.on_channel(10, 3, &mut h.cx(), &mut tr);
        assert_eq!(h.sent(), vec![(10, "ChannelAck")]);
        assert!(idle.meds.is_empty());

        let mut h = H::new(5);
        let mut p = Primary { tok: Bag::plain(2), color: Some(Color::A), ..Default::default() };
        p.busy_acked.insert(10);
        p.on_channel(10, 3, &mut h.cx(), &mut tr);
        assert_eq!(h.sent()[0], (10, "ChannelAck"));
        assert_eq!(p.meds.get(&10), Some(&3));
        assert!(p.phase.is_some());
        assert!(h.out.notes.iter().any(|(_, n)| matches!(n, Note::PhaseBegin { .. })));
    }

    #[test]
    fn relay_from_non_mediator_is_screened() {
        let mut h = H::new(5);
        let mut p = in_phase(2, 10, PhaseType::Center);
        p.on_relayed(11, PrincipalMsg::GoOn, 9, None, &mut h.cx(), &mut None);
        assert!(h.screened());
        assert_eq!(p.awaiting[&10], true);
    }

    #[test]
    fn utility_busy_is_idempotent() {
        let mut h = H::new(5);
        let mut u = Utility::default();
        u.on_busy(1, &mut h.cx());
        u.on_busy(1, &mut h.cx());
        assert_eq!(h.sent(), vec![(1, "BusyAck")]);
        assert_eq!(u.busy_tok(1), Some(0));
    }

    #[test]
    fn utility_screens_while_ack_outstanding() {
        let mut h = H::new(5);
        let mut u = Utility::default();
        u.on_tokens_update(1, 3, Color::A, &mut h.cx());
        u.on_tokens_update(2, 2, Color::A, &mut h.cx());
        assert!(u.chan.is_some());
        assert_eq!(u.diff.get(&1), Some(&1));
        u.on_relayed(1, PrincipalMsg::TokensPlease, 0, None, &mut h.cx(), &mut None);
        assert!(h.screened());
        u.on_channel_ack(1);
        h.out.clear();
        u.on_relayed(1, PrincipalMsg::TokensPlease, 0, None, &mut h.cx(), &mut None);
        assert!(!h.screened());
        assert_eq!(h.sent(), vec![(2, "TokensPlease")]);
        assert!(matches!(h.out.sends[0].payload, Payload::RelayDown(PrincipalMsg::TokensPlease)));
    }

    #[test]
    fn not_busy_tears_down_channel() {
        let mut h = H::new(5);
        let mut u = Utility::default();
        u.on_tokens_update(1, 3, Color::A, &mut h.cx());
        u.on_tokens_update(2, 2, Color::A, &mut h.cx());
        h.out.clear();
        u.on_not_busy(1, &mut h.cx());
        assert_eq!(h.sent(), vec![(2, "NoChannel")]);
        assert!(u.chan.is_none());
        assert_eq!(u.busy_tok(1), None);
    }

    #[test]
    fn create_channel_picks_two_largest_first_come() {
        let mut h = H::new(9);
        let mut u = Utility::default();
        u.busy_toks = vec![(1, 3, Color::A), (2, 5, Color::A), (3, 5, Color::A)];
        u.create_channel(&mut h.cx());
        let (a, b, _) = u.chan.unwrap();
        assert_eq!((a, b), (2, 3));
        assert_eq!(h.sent(), vec![(2, "Channel"), (3, "Channel")]);

        let mut h = H::new(9);
        let mut single = Utility { busy_toks: vec![(1, 3, Color::A)], ..Default::default() };
        single.create_channel(&mut h.cx());
        assert!(single.chan.is_none() && h.sent().is_empty());

        let mut h = H::new(9);
        u.busy_toks.push((4, 8, Color::A));
        let before = u.chan;
        u.create_channel(&mut h.cx());
        assert_eq!(u.chan, before);
    }

    #[test]
    fn diff_rule_only_pairs_opposite_colors() {
        let mut h = H::new(2);
        h.rule = TeamRule::Diff;
        let mut u = Utility { busy_toks: vec![(1, 1, Color::A), (2, 1, Color::A)], ..Default::default() };
        u.create_channel(&mut h.cx());
        assert!(u.chan.is_none());
        u.busy_toks.push((3, 1, Color::B));
        u.create_channel(&mut h.cx());
        assert!(u.chan.is_some());
    }

    #[test]
    fn injection_forms_teams_and_reinjects_remainder() {
        let mut h = H::new(3);
        let mut p = Primary::default();
        inject(&mut p, &mut h, 2);
        assert!(h.out.notes.iter().all(|(_, n)| !matches!(n, Note::Team { .. })));

        let mut h = H::new(3);
        let mut p = Primary::default();
        inject(&mut p, &mut h, 7);
        let teams = h.out.notes.iter().find_map(|(_, n)| match n {
            Note::Team { teams, remainder, .. } => Some((teams.len(), remainder.total())),
            _ => None,
        });
        assert_eq!(teams, Some((2, 1)));
        assert_eq!(h.out.fake, vec![(0, Bag::plain(1))]);
        assert!(!p.is_busy());

        for (k, t) in [(3, 1), (6, 2)] {
            let mut h = H::new(3);
            let mut p = Primary::default();
            inject(&mut p, &mut h, k);
            assert!(h.out.fake.is_empty());
            assert!(h.out.notes.iter().any(|(_, n)| matches!(n, Note::Team { teams, .. } if teams.len() == t)));
        }
    }

    #[test]
    fn mid_phase_injection_waits() {
        let mut h = H::new(5);
        let mut p = in_phase(2, 10, PhaseType::Center);
        inject(&mut p, &mut h, 1);
        assert_eq!(p.tok.total(), 2);
        assert_eq!(p.pending.total(), 1);
    }

    #[test]
    fn requests() {
        let mut h = H::new(5);
        let mut p = in_phase(3, 10, PhaseType::Arm);
        p.on_relayed(10, PrincipalMsg::TokensPlease, 7, None, &mut h.cx(), &mut None);
        assert_eq!(h.relayed(), vec![(10, PrincipalMsg::Transport(Bag::plain(3)))]);
        assert!(!p.is_busy());

        let mut h = H::new(5);
        let mut p = in_phase(3, 10, PhaseType::Center);
        p.on_relayed(10, PrincipalMsg::Waiting, 7, None, &mut h.cx(), &mut None);
        assert!(h.out.sends.is_empty());
        assert!(p.delaying[&10]);

        let mut h = H::new(5);
        let mut p = in_phase(3, 10, PhaseType::Arm);
        p.on_relayed(10, PrincipalMsg::Waiting, 7, None, &mut h.cx(), &mut None);
        assert_eq!(h.relayed(), vec![(10, PrincipalMsg::GoOn)]);
    }

    #[test]
    fn responses() {
        let mut h = H::new(9);
        let mut p = in_phase(3, 10, PhaseType::Center);
        p.busy_acked.insert(11);
        p.meds.insert(11, 8);
        p.awaiting.insert(11, true);
        p.delaying.insert(11, false);
        p.on_relayed(10, PrincipalMsg::Transport(Bag::plain(2)), 7, None, &mut h.cx(), &mut None);
        assert_eq!(p.tok.total(), 5);
        assert!(!p.awaiting[&10]);
        // Still awaiting 11: no phase end.
        assert!(h.out.notes.iter().all(|(_, n)| !matches!(n, Note::PhaseEnd { .. })));

        let mut h = H::new(9);
        let mut p = in_phase(3, 10, PhaseType::Center);
        p.on_relayed(10, PrincipalMsg::GoOn, 7, None, &mut h.cx(), &mut None);
        assert_eq!(p.tok.total(), 3);
        assert!(p.awaiting[&10]);

        let mut h = H::new(9);
        let mut p = in_phase(3, 10, PhaseType::Arm);
        p.on_relayed(10, PrincipalMsg::GoOn, 7, None, &mut h.cx(), &mut None);
        assert!(h.out.notes.iter().any(|(_, n)| matches!(n, Note::PhaseEnd { .. })));
    }

    #[test]
    fn phase_end_outcomes() {
        // Reaching sigma at phase end forms a team.
        let mut h = H::new(5);
        let mut p = in_phase(3, 10, PhaseType::Center);
        p.on_relayed(10, PrincipalMsg::Transport(Bag::plain(2)), 7, None, &mut h.cx(), &mut None);
        assert!(h.out.notes.iter().any(|(_, n)| matches!(n, Note::Team { .. })));

        // Below sigma with no channel left: phase cleared, still busy.
        let mut h = H::new(5);
        let mut p = in_phase(3, 10, PhaseType::Center);
        p.on_no_channel(10, &mut h.cx(), &mut None);
        assert_eq!(p.phase, None);
        assert!(p.is_busy());
    }

    fn arm_phase(p: &mut Primary) -> Effects {
        for seed in 0.. {
            let mut h = H::new(9);
            h.rng = stream(seed, TAG_RUNTIME, 0);
            let mut q = p.clone();
            q.begin_new_phase(&mut h.cx());
            if q.phase == Some(PhaseType::Arm) {
                *p = q;
                return h.out;
            }
        }
        unreachable!()
    }

    #[test]
    fn new_phase_answers_delayed_waiting() {
        let mut p = in_phase(3, 10, PhaseType::Center);
        p.delaying.insert(10, true);
        let out = arm_phase(&mut p);
        let msgs: Vec<_> = out.sends.iter().map(|m| m.payload.clone()).collect();
        assert_eq!(msgs, vec![Payload::RelayUp(PrincipalMsg::GoOn), Payload::RelayUp(PrincipalMsg::Waiting)]);
        assert!(!p.delaying[&10]);
    }

    #[test]
    fn center_phase_forgets_delayed_waiting_and_asks_everyone() {
        let mut p = in_phase(3, 10, PhaseType::Center);
        p.delaying.insert(10, true);
        p.busy_acked.insert(11);
        p.meds.insert(11, 8);
        p.delaying.insert(11, false);
        for seed in 0.. {
            let mut h = H::new(9);
            h.rng = stream(seed, TAG_RUNTIME, 0);
            let mut q = p.clone();
            q.begin_new_phase(&mut h.cx());
            if q.phase == Some(PhaseType::Center) {
                assert_eq!(h.relayed(), vec![(10, PrincipalMsg::TokensPlease), (11, PrincipalMsg::TokensPlease)]);
                assert!(q.awaiting.values().all(|&a| a));
                assert!(!q.delaying[&10]);
                break;
            }
        }
    }
}
