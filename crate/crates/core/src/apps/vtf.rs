//! Vector team formation: one instance per color, then a binary tree of
//! two-color pairing instances combining one super-token per color.
//!
//! Instance layout for `m` colors padded to `w = 2^k >= m` leaves:
//! colors use instances `0..m`; tree position `j` in `1..w` (heap order,
//! root 1, leaves `w..2w`) uses instance `m + j - 1`.

use crate::adversary::{Adversary, InjectionSpec, PolicyKind};
use crate::app::{AppApi, AppNote, Application};
use crate::bag::{Bag, TeamRule};
use crate::kernel::{KernelError, World, WorldConfig};
use crate::monitor::{CheckSet, Probe};
use crate::msg::{InstId, NodeId};
use crate::time::SimTime;
use alloc::vec::Vec;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Palette {
    pub sigma: Vec<u32>,
    pub width: usize,
}

impl Palette {
    pub fn new(sigma: Vec<u32>) -> Result<Self, KernelError> {
        if sigma.is_empty() {
            return Err(KernelError::BadConfig("palette needs at least one color"));
        }
        if sigma.iter().any(|&s| s == 0) {
            return Err(KernelError::BadConfig("color team sizes must be positive"));
        }
        let width = sigma.len().next_power_of_two();
        Ok(Palette { sigma, width })
    }

    pub fn m(&self) -> usize {
        self.sigma.len()
    }

    pub fn rules(&self) -> Vec<TeamRule> {
        let mut r: Vec<TeamRule> = self.sigma.iter().map(|&s| TeamRule::Plain { sigma: s }).collect();
        for _ in 1..self.width {
            r.push(TeamRule::Diff);
        }
        r
    }

    pub fn tree_inst(&self, j: usize) -> InstId {
        (self.m() + j - 1) as InstId
    }

    fn is_padding(&self, pos: usize) -> bool {
        // Leftmost leaf under `pos`.
        let mut lo = pos;
        while lo < self.width {
            lo *= 2;
        }
        lo - self.width >= self.m()
    }

    /// Where a super-token produced at tree position `pos` goes: the
    /// pairing instance and its side, or `None` for a finished vTF team.
    pub fn route(&self, mut pos: usize) -> Option<(InstId, Bag)> {
        while pos > 1 {
            let sib = pos ^ 1;
            let parent = pos / 2;
            if !self.is_padding(sib) {
                let side = if pos % 2 == 0 { Bag { a: 1, b: 0 } } else { Bag { a: 0, b: 1 } };
                return Some((self.tree_inst(parent), side));
            }
            pos = parent;
        }
        None
    }

    /// Tree position of an instance.
    pub fn position(&self, inst: InstId) -> usize {
        let i = inst as usize;
        if i < self.m() {
            self.width + i
        } else {
            i - self.m() + 1
        }
    }
}

pub struct VtfApp {
    pub palette: Palette,
    pub teams: Vec<(SimTime, NodeId)>,
    pub super_tokens: u64,
}

impl VtfApp {
    pub fn new(palette: Palette) -> Self {
        VtfApp { palette, teams: Vec::new(), super_tokens: 0 }
    }
}

impl Application for VtfApp {
    fn on_team(&mut self, inst: InstId, teams: &[Bag], api: &mut AppApi) {
        let pos = self.palette.position(inst);
        for _ in teams {
            match self.palette.route(pos) {
                Some((to, side)) => {
                    self.super_tokens += 1;
                    api.note(AppNote::SuperToken { node: api.node, from: inst, to, color: if side.a > 0 { 0 } else { 1 } });
                    api.inject(to, side);
                }
                None => {
                    self.teams.push((api.now, api.node));
                    api.note(AppNote::VtfTeam { node: api.node });
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct VtfOutcome {
    pub teams: Vec<(SimTime, NodeId)>,
    pub color_teams: Vec<u64>,
    pub pairings: u64,
    pub super_tokens: u64,
}

/// Color injections are `InjectionSpec`s with `inst` set to the color.
pub fn run(n: u32, palette: Palette, schedule: Vec<InjectionSpec>, seed: u64, policy: PolicyKind) -> Result<(VtfOutcome, Probe), KernelError> {
    let m = palette.m();
    if schedule.iter().any(|s| s.inst as usize >= m) {
        return Err(KernelError::BadConfig("injection color outside the palette"));
    }
    let mut cfg = WorldConfig::tf(n, 2, seed);
    cfg.rules = palette.rules();
    let app = VtfApp::new(palette);
    let (w, p) = super::run_probed(cfg, Adversary::new(policy, seed), schedule, app, CheckSet::all())?;
    Ok((outcome(&w), p))
}

pub fn outcome(w: &World<VtfApp>) -> VtfOutcome {
    let m = w.app.palette.m();
    let color_teams = (0..m).map(|i| w.ledgers[i].teams).collect();
    let pairings = w.ledgers[m..].iter().map(|l| l.teams).sum();
    VtfOutcome { teams: w.app.teams.clone(), color_teams, pairings, super_tokens: w.app.super_tokens }
}

pub fn color_schedule(counts: &[(u16, u32)], spacing: SimTime) -> Vec<InjectionSpec> {
    let mut out = Vec::new();
    let mut t = SimTime::ZERO;
    for &(color, k) in counts {
        for _ in 0..k {
            out.push(InjectionSpec { time: t, target: crate::adversary::Target::AnyNonFaulty, count: 1, inst: color });
            t = t + spacing;
        }
    }
    out
}
