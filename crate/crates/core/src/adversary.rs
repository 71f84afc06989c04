//! Adversarial policies: fragile sets, message delays, injection targets and
//! status toggles. Policies draw only from their own stream and see only the
//! observable past (busy status of nodes), never node coins.

use crate::msg::{NodeId, Payload};
use crate::rng::{stream, StreamRng, TAG_ADVERSARY, TAG_FRAGILE};
use crate::time::{Delay, SimTime, TICKS_PER_UNIT};
use alloc::collections::VecDeque;
use alloc::vec::Vec;
use core::fmt;
use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolicyKind {
    UniformRandom,
    ConstantMaxDelay,
    Scripted,
    AntiGather,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::UniformRandom => "uniform_random",
            PolicyKind::ConstantMaxDelay => "constant_max_delay",
            PolicyKind::Scripted => "scripted",
            PolicyKind::AntiGather => "anti_gather_heuristic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "uniform_random" => PolicyKind::UniformRandom,
            "constant_max_delay" => PolicyKind::ConstantMaxDelay,
            "scripted" => PolicyKind::Scripted,
            "anti_gather_heuristic" | "anti_gather" => PolicyKind::AntiGather,
            _ => return None,
        })
    }

    /// Built-in policies that eventually deliver everything promptly.
    pub fn is_fair(self) -> bool {
        !matches!(self, PolicyKind::Scripted)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    Node(NodeId),
    AnyNonFaulty,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InjectionSpec {
    pub time: SimTime,
    pub target: Target,
    pub count: u32,
    /// Instance (color) receiving the tokens.
    pub inst: u16,
}

/// One adversary choice, as recorded for scripted replay.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Decision {
    Delay { src: NodeId, dst: NodeId, ticks: u64 },
    Inject { time: SimTime, node: NodeId, count: u32 },
    Toggle { time: SimTime, node: NodeId },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AdversaryError {
    EpsilonOutOfRange,
    ScriptExhausted,
    ScriptMismatch,
}

impl fmt::Display for AdversaryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdversaryError::EpsilonOutOfRange => "epsilon must lie in (0, 1]",
            AdversaryError::ScriptExhausted => "scripted decision list exhausted",
            AdversaryError::ScriptMismatch => "scripted decision does not match the requested action",
        })
    }
}

/// Number of nodes that must stay non-fragile.
pub fn required_reliable(n: u32, epsilon: f64) -> u32 {
    libm::ceil(epsilon * n as f64 - 1e-9) as u32
}

/// Picks `n - ceil(eps n)` fragile nodes uniformly. Returns a membership mask.
pub fn choose_fragile_set(n: u32, epsilon: f64, rng: &mut StreamRng) -> Result<Vec<bool>, AdversaryError> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(AdversaryError::EpsilonOutOfRange);
    }
    let k = (n - required_reliable(n, epsilon).min(n)) as usize;
    let mut ids: Vec<NodeId> = (0..n).collect();
    let (chosen, _) = ids.partial_shuffle(rng, k);
    let mut mask = alloc::vec![false; n as usize];
    for &v in chosen.iter() {
        mask[v as usize] = true;
    }
    Ok(mask)
}

pub fn fragile_stream(seed: u64) -> StreamRng {
    stream(seed, TAG_FRAGILE, 0)
}

pub struct Adversary {
    pub kind: PolicyKind,
    rng: StreamRng,
    script: VecDeque<Decision>,
    recording: Option<Vec<Decision>>,
}

impl Adversary {
    pub fn new(kind: PolicyKind, seed: u64) -> Self {
        Adversary { kind, rng: stream(seed, TAG_ADVERSARY, 0), script: VecDeque::new(), recording: None }
    }

    pub fn scripted(decisions: Vec<Decision>) -> Self {
        let mut a = Adversary::new(PolicyKind::Scripted, 0);
        a.script = decisions.into();
        a
    }

    pub fn start_recording(&mut self) {
        self.recording = Some(Vec::new());
    }

    pub fn take_recording(&mut self) -> Vec<Decision> {
        self.recording.take().unwrap_or_default()
    }

    fn record(&mut self, d: Decision) {
        if let Some(r) = &mut self.recording {
            r.push(d);
        }
    }

    fn uniform(&mut self) -> Delay {
        // (0.1, 1.0]
        let lo = TICKS_PER_UNIT / 10;
        Delay(self.rng.gen_range(lo + 1..=TICKS_PER_UNIT))
    }

    pub fn delay(
        &mut self,
        src: NodeId,
        dst: NodeId,
        payload: &Payload,
        busy: &dyn Fn(NodeId) -> bool,
    ) -> Result<Delay, AdversaryError> {
        let d = match self.kind {
            PolicyKind::UniformRandom => self.uniform(),
            PolicyKind::ConstantMaxDelay => Delay::MAX,
            PolicyKind::AntiGather => {
                // Slow down everything that helps two busy primaries meet.
                let hostile = match payload {
                    Payload::RelayUp(_) | Payload::RelayDown(_) => true,
                    Payload::Channel | Payload::ChannelAck | Payload::TokensUpdate { .. } => {
                        busy(src) || busy(dst)
                    }
                    _ => false,
                };
                if hostile {
                    Delay::MAX
                } else {
                    self.uniform()
                }
            }
            PolicyKind::Scripted => match self.script.pop_front() {
                Some(Decision::Delay { src: s, dst: t, ticks }) if s == src && t == dst => Delay(ticks),
                Some(_) => return Err(AdversaryError::ScriptMismatch),
                None => return Err(AdversaryError::ScriptExhausted),
            },
        };
        self.record(Decision::Delay { src, dst, ticks: d.0 });
        Ok(d)
    }

    /// Resolves an injection target. `None` when no eligible node exists.
    pub fn target(
        &mut self,
        now: SimTime,
        spec: &InjectionSpec,
        faulty: &[bool],
        busy: &dyn Fn(NodeId) -> bool,
    ) -> Result<Option<NodeId>, AdversaryError> {
        let node = match (self.kind, spec.target) {
            (PolicyKind::Scripted, _) => match self.script.pop_front() {
                Some(Decision::Inject { node, count, .. }) if count == spec.count => Some(node),
                Some(_) => return Err(AdversaryError::ScriptMismatch),
                None => return Err(AdversaryError::ScriptExhausted),
            },
            (_, Target::Node(v)) => Some(v).filter(|&v| !faulty[v as usize]),
            (kind, Target::AnyNonFaulty) => {
                let up: Vec<NodeId> = (0..faulty.len() as NodeId).filter(|&v| !faulty[v as usize]).collect();
                let pool: Vec<NodeId> = if kind == PolicyKind::AntiGather {
                    let idle: Vec<NodeId> = up.iter().copied().filter(|&v| !busy(v)).collect();
                    if idle.is_empty() {
                        up
                    } else {
                        idle
                    }
                } else {
                    up
                };
                pool.choose(&mut self.rng).copied()
            }
        };
        if let Some(v) = node {
            self.record(Decision::Inject { time: now, node: v, count: spec.count });
        }
        Ok(node)
    }

    /// Coin for toggling fragile `node` at quiescent time `now`.
    pub fn toggle(&mut self, now: SimTime, node: NodeId) -> bool {
        let flip = match self.kind {
            PolicyKind::Scripted => match self.script.front() {
                Some(Decision::Toggle { time, node: v }) if *time == now && *v == node => {
                    self.script.pop_front();
                    true
                }
                _ => false,
            },
            _ => self.rng.gen::<bool>(),
        };
        if flip {
            self.record(Decision::Toggle { time: now, node });
        }
        flip
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fragile_sizes() {
        let mut r = fragile_stream(1);
        assert!(choose_fragile_set(10, 1.0, &mut r).unwrap().iter().all(|f| !f));
        let m = choose_fragile_set(10, 0.3, &mut r).unwrap();
        assert_eq!(m.iter().filter(|f| **f).count(), 7);
        let a = choose_fragile_set(100, 0.1, &mut fragile_stream(5)).unwrap();
        let b = choose_fragile_set(100, 0.1, &mut fragile_stream(5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.iter().filter(|f| **f).count(), 90);
        assert_eq!(choose_fragile_set(10, 0.0, &mut r), Err(AdversaryError::EpsilonOutOfRange));
    }

    #[test]
    fn uniform_delays_in_range() {
        let mut a = Adversary::new(PolicyKind::UniformRandom, 3);
        for _ in 0..1000 {
            let d = a.delay(0, 1, &Payload::Busy, &|_| false).unwrap();
            assert!(d.0 > TICKS_PER_UNIT / 10 && d.0 <= TICKS_PER_UNIT);
        }
        let mut c = Adversary::new(PolicyKind::ConstantMaxDelay, 3);
        assert_eq!(c.delay(0, 1, &Payload::Busy, &|_| false).unwrap(), Delay::MAX);
    }

    #[test]
    fn scripted_replays_recording() {
        let mut a = Adversary::new(PolicyKind::UniformRandom, 11);
        a.start_recording();
        let d1 = a.delay(0, 1, &Payload::Busy, &|_| false).unwrap();
        let d2 = a.delay(1, 0, &Payload::BusyAck, &|_| false).unwrap();
        let mut s = Adversary::scripted(a.take_recording());
        assert_eq!(s.delay(0, 1, &Payload::Busy, &|_| false).unwrap(), d1);
        assert_eq!(s.delay(1, 0, &Payload::BusyAck, &|_| false).unwrap(), d2);
        assert_eq!(s.delay(1, 0, &Payload::Busy, &|_| false), Err(AdversaryError::ScriptExhausted));
    }
}
