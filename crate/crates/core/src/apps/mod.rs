//! Applications built on team formation: leader election, vector team
//! formation and distributed trigger counting.

pub mod dtc;
pub mod le;
pub mod vtf;

use crate::adversary::{Adversary, InjectionSpec};
use crate::app::Application;
use crate::kernel::{KernelError, World, WorldConfig};
use crate::monitor::{CheckSet, Probe};
use alloc::vec::Vec;

/// Runs a world to completion under a probe.
pub fn run_probed<A: Application>(
    cfg: WorldConfig,
    adversary: Adversary,
    schedule: Vec<InjectionSpec>,
    app: A,
    checks: CheckSet,
) -> Result<(World<A>, Probe), KernelError> {
    let mut w = World::new(cfg, adversary, schedule, app)?;
    let mut p = Probe::new(checks);
    w.run(|w, s| p.observe(w, s));
    p.finish(&w);
    if let Some(e) = w.error.clone() {
        return Err(e);
    }
    Ok((w, p))
}
