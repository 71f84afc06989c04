//! Checks over a recorded execution log.

use crate::log::{kind, LogRecord};
use crate::time::SimTime;
use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[derive(Clone, Debug, Default)]
pub struct LogReport {
    pub records: usize,
    pub sends: usize,
    pub deliveries: usize,
    pub teams: u64,
    pub issues: Vec<String>,
}

impl LogReport {
    pub fn ok(&self) -> bool {
        self.issues.is_empty()
    }
}

/// FIFO per link, delays in (0, 1], delivery at the scheduled time, and
/// `sigma * teams` tokens per team record.
pub fn check_log(records: &[LogRecord], sigma_of: impl Fn(u16) -> u32) -> LogReport {
    let mut r = LogReport { records: records.len(), ..LogReport::default() };
    let mut links: BTreeMap<(u32, u32), VecDeque<u64>> = BTreeMap::new();
    let mut due: BTreeMap<u64, SimTime> = BTreeMap::new();
    let mut last_t = SimTime::ZERO;
    for rec in records {
        if rec.t < last_t {
            r.issues.push(format!("record {} goes back in time", rec.seq));
        }
        last_t = rec.t;
        match rec.kind.as_ref() {
            kind::SEND => {
                r.sends += 1;
                let (Some(src), Some(dst), Some(id)) = (rec.node, rec.peer, rec.field_u64("id")) else {
                    r.issues.push(format!("send record {} lacks fields", rec.seq));
                    continue;
                };
                match rec.field("deliver").and_then(|d| d.parse::<SimTime>().ok()) {
                    Some(d) if d > rec.t && d <= rec.t + SimTime::UNIT => {
                        due.insert(id, d);
                    }
                    Some(d) => r.issues.push(format!("envelope {id} sent at {} scheduled for {d}", rec.t)),
                    None => r.issues.push(format!("send record {} lacks a delivery time", rec.seq)),
                }
                links.entry((src, dst)).or_default().push_back(id);
            }
            kind::DELIVER | kind::LOST => {
                r.deliveries += (rec.kind == kind::DELIVER) as usize;
                let (Some(dst), Some(src), Some(id)) = (rec.node, rec.peer, rec.field_u64("id")) else {
                    r.issues.push(format!("delivery record {} lacks fields", rec.seq));
                    continue;
                };
                match links.get_mut(&(src, dst)).and_then(|q| q.pop_front()) {
                    Some(head) if head == id => {}
                    Some(head) => r.issues.push(format!("link {src}->{dst} delivered {id} before {head}")),
                    None => r.issues.push(format!("envelope {id} delivered on {src}->{dst} but never sent")),
                }
                if let Some(d) = due.remove(&id) {
                    if d != rec.t {
                        r.issues.push(format!("envelope {id} due at {d} arrived at {}", rec.t));
                    }
                }
            }
            kind::TEAM => {
                let teams = rec.field_u64("teams").unwrap_or(0);
                let inst = rec.field_u64("inst").unwrap_or(0) as u16;
                r.teams += teams;
                let want = teams * sigma_of(inst) as u64;
                if rec.tokens as u64 != want {
                    r.issues.push(format!("team record {} deleted {} tokens, expected {want}", rec.seq, rec.tokens));
                }
            }
            _ => {}
        }
    }
    r
}
