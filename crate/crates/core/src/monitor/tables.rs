//! Conformance of every (primary, utility) pair to the reachable
//! configurations of the channel layer and to their transition matrix.

use crate::msg::{InstId, NodeId};
use crate::protocol::{TableEvent, TfNode};
use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use regex::Regex;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bt {
    Bot,
    Zero,
    Pos,
}

/// One reachable configuration: variable values and link contents, the latter
/// as regular expressions over message codes, newest first.
#[derive(Clone, Copy, Debug)]
pub struct Row {
    pub tok: bool,
    pub busy_acked: bool,
    pub meds: bool,
    pub busy_toks: Bt,
    pub chan: bool,
    pub pu: &'static str,
    pub up: &'static str,
}

const fn row(tok: bool, busy_acked: bool, meds: bool, busy_toks: Bt, chan: bool, pu: &'static str, up: &'static str) -> Row {
    Row { tok, busy_acked, meds, busy_toks, chan, pu, up }
}

// Codes: B Busy, T TokensUpdate, N NotBusy, A BusyAck, C Channel, X NoChannel.
pub const ROWS: [Row; 15] = [
    row(false, false, false, Bt::Bot, false, "B*", "X?(CX)*C?"),
    row(false, false, false, Bt::Zero, false, "B*", "AX?(CX)*C?"),
    row(false, false, false, Bt::Zero, false, "B*NT*B*", ""),
    row(false, false, false, Bt::Pos, false, "B*NT*", "(XC)*X?"),
    row(false, false, false, Bt::Pos, true, "B*NT*", "(CX)*C?"),
    row(true, false, false, Bt::Bot, false, "B+", "X?(CX)*C?"),
    row(true, false, false, Bt::Zero, false, "B*", "AX?(CX)*C?"),
    row(true, false, false, Bt::Zero, false, "B+NT*B*", ""),
    row(true, false, false, Bt::Pos, false, "B+NT*", "(XC)*X?"),
    row(true, false, false, Bt::Pos, true, "B+NT*", "(CX)*C?"),
    row(true, true, false, Bt::Zero, false, "T+B*", ""),
    row(true, true, false, Bt::Pos, false, "T*", "(XC)*"),
    row(true, true, false, Bt::Pos, true, "T*", "C(XC)*"),
    row(true, true, true, Bt::Pos, false, "T*", "X(CX)*"),
    row(true, true, true, Bt::Pos, true, "T*", "(CX)*"),
];

/// Successor row (1-based) per event; 0 marks an inapplicable event.
/// Columns: TokInc, TokToggle, MedToggle, recv B, T, N at u, recv A, C, X at p.
pub const NEXT: [[u8; 9]; 15] = [
    [0, 6, 0, 2, 0, 0, 0, 1, 1],
    [0, 7, 0, 2, 0, 0, 3, 2, 2],
    [0, 8, 0, 3, 4, 1, 0, 0, 0],
    [0, 9, 5, 0, 4, 1, 0, 4, 4],
    [0, 10, 4, 0, 5, 1, 0, 5, 5],
    [6, 1, 0, 7, 0, 0, 0, 6, 6],
    [7, 2, 0, 7, 0, 0, 11, 7, 7],
    [8, 3, 0, 8, 9, 6, 0, 8, 8],
    [9, 4, 10, 0, 9, 6, 0, 9, 9],
    [10, 5, 9, 0, 10, 6, 0, 10, 10],
    [11, 3, 0, 11, 12, 0, 0, 0, 0],
    [12, 4, 13, 0, 12, 0, 0, 14, 0],
    [13, 5, 12, 0, 13, 0, 0, 15, 0],
    [14, 4, 15, 0, 14, 0, 0, 0, 12],
    [15, 5, 14, 0, 15, 0, 0, 0, 13],
];

pub fn column(ev: TableEvent) -> Option<usize> {
    Some(match ev {
        TableEvent::TokInc => 0,
        TableEvent::TokToggle => 1,
        TableEvent::MedToggle => 2,
        TableEvent::Recv(b'B') => 3,
        TableEvent::Recv(b'T') => 4,
        TableEvent::Recv(b'N') => 5,
        TableEvent::Recv(b'A') => 6,
        TableEvent::Recv(b'C') => 7,
        TableEvent::Recv(b'X') => 8,
        TableEvent::Recv(_) => return None,
    })
}

pub type PairKey = (InstId, NodeId, NodeId);

/// Observed state of one pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairState {
    pub tok: bool,
    pub busy_acked: bool,
    pub meds: bool,
    pub busy_toks: Bt,
    pub chan: bool,
    /// Newest first.
    pub pu: String,
    pub up: String,
}

pub fn pair_state(p: &TfNode, u: &TfNode, pid: NodeId, uid: NodeId, pu: &VecDeque<u8>, up: &VecDeque<u8>) -> PairState {
    let newest_first = |d: &VecDeque<u8>| d.iter().rev().map(|&c| c as char).collect::<String>();
    PairState {
        tok: p.primary.is_busy(),
        busy_acked: p.primary.busy_acked.contains(&uid),
        meds: p.primary.meds.contains_key(&uid),
        busy_toks: match u.utility.busy_tok(pid) {
            None => Bt::Bot,
            Some(0) => Bt::Zero,
            Some(_) => Bt::Pos,
        },
        chan: u.utility.mediates(pid),
        pu: newest_first(pu),
        up: newest_first(up),
    }
}

pub struct TableChecker {
    res: Vec<(Regex, Regex)>,
    /// Current row (1-based) of every pair not in its initial configuration.
    pub rows: BTreeMap<PairKey, u8>,
    /// In-flight tabulated messages per pair, oldest first: (p->u, u->p).
    pub links: BTreeMap<PairKey, (VecDeque<u8>, VecDeque<u8>)>,
    pub transitions: u64,
    pub checked: u64,
    /// Per-pair event history, kept only when enabled.
    pub trail: Option<BTreeMap<PairKey, Vec<String>>>,
}

impl Default for TableChecker {
    fn default() -> Self {
        let anchored = |s: &str| Regex::new(&format!("^(?:{s})$")).expect("table regex");
        TableChecker {
            res: ROWS.iter().map(|r| (anchored(r.pu), anchored(r.up))).collect(),
            rows: BTreeMap::new(),
            links: BTreeMap::new(),
            transitions: 0,
            checked: 0,
            trail: None,
        }
    }
}

impl TableChecker {
    pub fn row_of(&self, k: &PairKey) -> u8 {
        self.rows.get(k).copied().unwrap_or(1)
    }

    /// Applies one local event. Returns an error message if inapplicable.
    pub fn apply(&mut self, k: PairKey, ev: TableEvent) -> Result<(), String> {
        let Some(col) = column(ev) else { return Ok(()) };
        let r = self.row_of(&k);
        let next = NEXT[r as usize - 1][col];
        if let Some(t) = &mut self.trail {
            t.entry(k).or_default().push(format!("{ev:?} {r}->{next}"));
        }
        self.transitions += 1;
        if next == 0 {
            return Err(format!("event {ev:?} inapplicable in configuration ({r}) for pair {k:?}"));
        }
        self.rows.insert(k, next);
        Ok(())
    }

    pub fn push(&mut self, k: PairKey, to_utility: bool, code: u8) {
        if let Some(t) = &mut self.trail {
            t.entry(k).or_default().push(format!("send {} {}", if to_utility { "p->u" } else { "u->p" }, code as char));
        }
        let l = self.links.entry(k).or_default();
        if to_utility { l.0.push_back(code) } else { l.1.push_back(code) }
    }

    /// Removes the oldest message of a link. Errors if it is not `code`.
    pub fn pop(&mut self, k: PairKey, to_utility: bool, code: u8) -> Result<(), String> {
        let l = self.links.entry(k).or_default();
        let got = if to_utility { l.0.pop_front() } else { l.1.pop_front() };
        if got != Some(code) {
            return Err(format!("link of pair {k:?} delivered {} but oldest in flight was {:?}", code as char, got.map(|c| c as char)));
        }
        Ok(())
    }

    /// Compares the tracked row of `k` with the observed state.
    pub fn verify(&mut self, k: PairKey, s: &PairState) -> Result<(), String> {
        self.checked += 1;
        let r = self.row_of(&k);
        let row = &ROWS[r as usize - 1];
        let (pu_re, up_re) = &self.res[r as usize - 1];
        let ok = row.tok == s.tok
            && row.busy_acked == s.busy_acked
            && row.meds == s.meds
            && row.busy_toks == s.busy_toks
            && row.chan == s.chan
            && pu_re.is_match(&s.pu)
            && up_re.is_match(&s.up);
        if !ok {
            return Err(format!("pair {k:?} expected configuration ({r}) but observed {s:?}"));
        }
        if r == 1 && s.pu.is_empty() && s.up.is_empty() {
            self.rows.remove(&k);
            self.links.remove(&k);
        }
        Ok(())
    }

    /// Which rows does an observed state satisfy? Used offline.
    pub fn classify(&self, s: &PairState) -> Vec<u8> {
        (0..15)
            .filter(|&i| {
                let row = &ROWS[i];
                row.tok == s.tok
                    && row.busy_acked == s.busy_acked
                    && row.meds == s.meds
                    && row.busy_toks == s.busy_toks
                    && row.chan == s.chan
                    && self.res[i].0.is_match(&s.pu)
                    && self.res[i].1.is_match(&s.up)
            })
            .map(|i| i as u8 + 1)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_distinguishable_where_variables_agree() {
        let t = TableChecker::default();
        // (2) and (3) share variables and differ only in links.
        let s = PairState { tok: false, busy_acked: false, meds: false, busy_toks: Bt::Zero, chan: false, pu: "".into(), up: "A".into() };
        assert_eq!(t.classify(&s), [2]);
        let s = PairState { up: "".into(), pu: "N".into(), ..s };
        assert_eq!(t.classify(&s), [3]);
    }

    #[test]
    fn initial_configuration_is_row_one() {
        let t = TableChecker::default();
        let s = PairState { tok: false, busy_acked: false, meds: false, busy_toks: Bt::Bot, chan: false, pu: "".into(), up: "".into() };
        assert_eq!(t.classify(&s), [1]);
    }

    #[test]
    fn documented_transitions() {
        let mut t = TableChecker::default();
        let k = (0, 1, 2);
        t.apply(k, TableEvent::TokToggle).unwrap();
        assert_eq!(t.row_of(&k), 6);
        t.rows.insert(k, 10);
        t.apply(k, TableEvent::Recv(b'N')).unwrap();
        assert_eq!(t.row_of(&k), 6);
        assert!(t.apply(k, TableEvent::MedToggle).is_err());
    }

    #[test]
    fn every_successor_is_a_row() {
        for r in NEXT.iter() {
            for &c in r {
                assert!(c <= 15);
            }
        }
    }
}
