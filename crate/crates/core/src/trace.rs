//! Per-port token counters and local records for backward origin notification.

use crate::msg::{NodeId, TraceStamp};
use crate::protocol::TraceOrigin;
use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec::Vec;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRecord {
    /// Ground-truth token id, for checkers only.
    pub gid: u64,
    pub origin: bool,
    pub held: bool,
    pub input: Option<(NodeId, u64)>,
    pub output: Option<(NodeId, u64)>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TraceStore {
    pub incoming: BTreeMap<NodeId, u64>,
    pub outgoing: BTreeMap<NodeId, u64>,
    records: BTreeMap<u64, TraceRecord>,
    by_output: BTreeMap<(NodeId, u64), u64>,
    active: VecDeque<u64>,
    pending: VecDeque<u64>,
    fake: VecDeque<u64>,
    next: u64,
}

/// Counters to send to each predecessor port.
pub type Reports = Vec<(NodeId, Vec<u64>)>;

impl TraceStore {
    pub fn live_records(&self) -> usize {
        self.records.len()
    }

    pub fn holds_nothing(&self) -> bool {
        self.records.is_empty()
    }

    fn new_record(&mut self, r: TraceRecord) -> u64 {
        let id = self.next;
        self.next += 1;
        self.records.insert(id, r);
        id
    }

    /// Adds tokens to the held pool (`pending` if a phase is running).
    pub fn add(&mut self, k: u32, pending: bool, origin: TraceOrigin) {
        let ids: Vec<u64> = match origin {
            TraceOrigin::Fake => (0..k).map(|_| self.fake.pop_front().expect("fake record")).collect(),
            TraceOrigin::Injected(gids) => {
                assert_eq!(gids.len(), k as usize, "one ground-truth id per token");
                gids.into_iter()
                    .map(|gid| {
                        self.new_record(TraceRecord { gid, origin: true, held: true, input: None, output: None })
                    })
                    .collect()
            }
        };
        if pending {
            self.pending.extend(ids);
        } else {
            self.active.extend(ids);
        }
    }

    pub fn fold_pending(&mut self) {
        let p = core::mem::take(&mut self.pending);
        self.active.extend(p);
    }

    /// Stamps an outgoing batch and advances the port counter.
    pub fn record_send(&mut self, port: NodeId, ids: &[u64]) -> TraceStamp {
        let ctr = self.outgoing.entry(port).or_insert(0);
        let first = *ctr;
        let mut gids = Vec::with_capacity(ids.len());
        for (i, &id) in ids.iter().enumerate() {
            let c = first + i as u64;
            let r = self.records.get_mut(&id).expect("live record");
            r.held = false;
            r.output = Some((port, c));
            gids.push(r.gid);
            self.by_output.insert((port, c), id);
        }
        *ctr += ids.len() as u64;
        TraceStamp { first, gids }
    }

    /// Creates records for an incoming batch.
    pub fn record_receive(&mut self, port: NodeId, k: u32, stamp: &TraceStamp) -> Vec<u64> {
        let ctr = self.incoming.entry(port).or_insert(0);
        assert_eq!(*ctr, stamp.first, "trace stamp does not match incoming counter on port {port}");
        assert_eq!(stamp.gids.len(), k as usize);
        *ctr += k as u64;
        let first = stamp.first;
        stamp
            .gids
            .iter()
            .enumerate()
            .map(|(i, &gid)| {
                self.new_record(TraceRecord {
                    gid,
                    origin: false,
                    held: true,
                    input: Some((port, first + i as u64)),
                    output: None,
                })
            })
            .collect()
    }

    /// Sends every held token over `port`.
    pub fn send_held(&mut self, port: NodeId, k: u32) -> TraceStamp {
        assert_eq!(self.active.len(), k as usize, "records track held tokens");
        let ids: Vec<u64> = self.active.drain(..).collect();
        self.record_send(port, &ids)
    }

    pub fn receive_held(&mut self, port: NodeId, k: u32, stamp: &TraceStamp) {
        let ids = self.record_receive(port, k, stamp);
        self.active.extend(ids);
    }

    /// A utility's pass-through hop.
    pub fn relay(&mut self, from: NodeId, to: NodeId, k: u32, stamp: &TraceStamp) -> TraceStamp {
        let ids = self.record_receive(from, k, stamp);
        self.record_send(to, &ids)
    }

    /// Consumes the `consumed` oldest held tokens in a formation and parks the
    /// remainder for re-injection. Returns member ids, reports for predecessors,
    /// and the local origin callback if any member was injected here.
    pub fn form(&mut self, consumed: u32, remainder: u32, formation: u64) -> (Vec<u64>, Reports, Option<(u32, Vec<u64>)>) {
        assert_eq!(self.active.len(), (consumed + remainder) as usize);
        let members: Vec<u64> = self.active.drain(..consumed as usize).collect();
        let rest = core::mem::take(&mut self.active);
        self.fake.extend(rest);
        let gids = members.iter().map(|id| self.records[id].gid).collect();
        let (origin, reports) = self.retire(&members);
        let _ = formation;
        (gids, reports, origin)
    }

    fn retire(&mut self, ids: &[u64]) -> (Option<(u32, Vec<u64>)>, Reports) {
        let mut here = Vec::new();
        let mut back: BTreeMap<NodeId, Vec<u64>> = BTreeMap::new();
        for id in ids {
            let r = self.records.remove(id).expect("live record");
            if let Some(out) = r.output {
                self.by_output.remove(&out);
            }
            match r.input {
                None => here.push(r.gid),
                Some((port, c)) => back.entry(port).or_default().push(c),
            }
        }
        let origin = (!here.is_empty()).then(|| (here.len() as u32, here));
        (origin, back.into_iter().collect())
    }

    /// Handles a backward report arriving from `port`.
    pub fn report(&mut self, port: NodeId, formation: u64, counters: &[u64]) -> (Option<(u32, Vec<u64>)>, Reports) {
        let _ = formation;
        let ids: Vec<u64> = counters
            .iter()
            .map(|c| {
                *self
                    .by_output
                    .get(&(port, *c))
                    .unwrap_or_else(|| panic!("report matches no record: port {port} counter {c}"))
            })
            .collect();
        self.retire(&ids)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn stamps_advance_per_port() {
        let mut t = TraceStore::default();
        t.add(4, false, TraceOrigin::Injected(vec![1, 2, 3, 4]));
        let ids: Vec<u64> = t.active.drain(..1).collect();
        assert_eq!(t.record_send(9, &ids).first, 0);
        assert_eq!(t.outgoing[&9], 1);
        let ids: Vec<u64> = t.active.drain(..3).collect();
        let s = t.record_send(9, &ids);
        assert_eq!(s.first, 1);
        assert_eq!(t.outgoing[&9], 4);
        assert!(t.outgoing.get(&8).is_none());
    }

    #[test]
    #[should_panic(expected = "does not match")]
    fn stamp_mismatch_panics() {
        let mut t = TraceStore::default();
        t.receive_held(3, 1, &TraceStamp { first: 2, gids: vec![7] });
    }

    #[test]
    fn two_hop_path_reports_back() {
        // v injects, relays through u, forms at w.
        let (v, u, w) = (0, 1, 2);
        let mut sv = TraceStore::default();
        let mut su = TraceStore::default();
        let mut sw = TraceStore::default();
        sv.add(2, false, TraceOrigin::Injected(vec![10, 11]));
        let s1 = sv.send_held(u, 2);
        let s2 = su.relay(v, w, 2, &s1);
        sw.receive_held(u, 2, &s2);
        let (gids, reps, origin) = sw.form(2, 0, 5);
        assert_eq!(gids, vec![10, 11]);
        assert!(origin.is_none());
        assert_eq!(reps, vec![(u, vec![0, 1])]);
        let (o, reps) = su.report(w, 5, &reps[0].1);
        assert!(o.is_none());
        assert_eq!(reps.len(), 1, "two tokens on one path share one report");
        let (o, reps) = sv.report(u, 5, &reps[0].1);
        assert_eq!(o, Some((2, vec![10, 11])));
        assert!(reps.is_empty());
        assert!(sv.holds_nothing() && su.holds_nothing() && sw.holds_nothing());
    }

    #[test]
    fn local_formation_needs_no_messages() {
        let mut t = TraceStore::default();
        t.add(3, false, TraceOrigin::Injected(vec![1, 2, 3]));
        let (_, reps, origin) = t.form(2, 1, 1);
        assert!(reps.is_empty());
        assert_eq!(origin.unwrap().0, 2);
        t.add(1, false, TraceOrigin::Fake);
        assert_eq!(t.live_records(), 1);
    }
}
