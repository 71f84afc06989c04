//! Distributed trigger counting: an alarm per `threshold` triggers.

use crate::adversary::{Adversary, InjectionSpec, PolicyKind};
use crate::app::{AppApi, AppNote, Application};
use crate::bag::Bag;
use crate::kernel::{KernelError, World, WorldConfig};
use crate::monitor::{CheckSet, Probe};
use crate::msg::{InstId, NodeId};
use crate::time::SimTime;
use alloc::vec::Vec;

#[derive(Default)]
pub struct DtcApp {
    pub alarms: Vec<(SimTime, NodeId)>,
}

impl Application for DtcApp {
    fn on_team(&mut self, _inst: InstId, teams: &[Bag], api: &mut AppApi) {
        for _ in teams {
            self.alarms.push((api.now, api.node));
            api.note(AppNote::Alarm { node: api.node });
        }
    }
}

#[derive(Clone, Debug)]
pub struct DtcOutcome {
    pub alarms: Vec<(SimTime, NodeId)>,
    /// Nodes holding leftover triggers at the end.
    pub holders: Vec<NodeId>,
    pub leftover: u32,
}

pub fn run(n: u32, threshold: u32, triggers: Vec<InjectionSpec>, seed: u64, policy: PolicyKind) -> Result<(DtcOutcome, Probe), KernelError> {
    if threshold < 2 {
        return Err(KernelError::BadConfig("threshold must be at least 2"));
    }
    let cfg = WorldConfig::tf(n, threshold, seed);
    let (w, p) = super::run_probed(cfg, Adversary::new(policy, seed), triggers, DtcApp::default(), CheckSet::all())?;
    Ok((outcome(&w), p))
}

pub fn outcome(w: &World<DtcApp>) -> DtcOutcome {
    let holders: Vec<NodeId> = (0..w.n()).filter(|&v| w.nodes[v as usize][0].primary.is_busy()).collect();
    let leftover = holders.iter().map(|&v| w.nodes[v as usize][0].primary.tok.total()).sum();
    DtcOutcome { alarms: w.app.alarms.clone(), holders, leftover }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::Target;

    fn triggers(k: u64) -> Vec<InjectionSpec> {
        (0..k).map(|i| InjectionSpec { time: SimTime::from_units(i), target: Target::AnyNonFaulty, count: 1, inst: 0 }).collect()
    }

    #[test]
    fn below_threshold_never_alarms() {
        let (o, _) = run(16, 5, triggers(4), 1, PolicyKind::UniformRandom).unwrap();
        assert!(o.alarms.is_empty());
    }

    #[test]
    fn exactly_one_alarm_at_threshold() {
        let (o, p) = run(16, 5, triggers(5), 2, PolicyKind::UniformRandom).unwrap();
        assert_eq!(o.alarms.len(), 1);
        assert!(p.is_clean());
    }

    #[test]
    fn three_alarms_and_one_leftover() {
        for seed in 0..5 {
            let (o, p) = run(16, 2, triggers(7), seed, PolicyKind::UniformRandom).unwrap();
            assert_eq!(o.alarms.len(), 3);
            assert_eq!(o.leftover, 1);
            assert_eq!(o.holders.len(), 1);
            assert!(p.is_clean(), "{:?}", p.violations);
        }
    }

    #[test]
    fn threshold_one_rejected() {
        assert!(run(16, 1, triggers(1), 0, PolicyKind::UniformRandom).is_err());
    }
}
