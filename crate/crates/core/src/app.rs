//! Hooks for applications layered on team formation.

use crate::bag::Bag;
use crate::msg::{InstId, NodeId, Payload};
use crate::rng::StreamRng;
use crate::time::SimTime;
use alloc::vec::Vec;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AppNote {
    Status { node: NodeId, status: &'static str },
    Alarm { node: NodeId },
    SuperToken { node: NodeId, from: InstId, to: InstId, color: u8 },
    VtfTeam { node: NodeId },
}

/// What an application may do inside one activation of `node`.
pub struct AppApi<'a> {
    pub now: SimTime,
    pub node: NodeId,
    pub n: u32,
    pub rng: &'a mut StreamRng,
    pub injects: Vec<(InstId, Bag)>,
    pub sends: Vec<(NodeId, Payload)>,
    pub notes: Vec<AppNote>,
}

impl AppApi<'_> {
    /// Injects tokens at this node right after the current activation.
    pub fn inject(&mut self, inst: InstId, bag: Bag) {
        if !bag.is_empty() {
            self.injects.push((inst, bag));
        }
    }

    pub fn send(&mut self, dst: NodeId, p: Payload) {
        self.sends.push((dst, p));
    }

    pub fn note(&mut self, n: AppNote) {
        self.notes.push(n);
    }
}

#[allow(unused_variables)]
pub trait Application {
    fn on_start(&mut self, api: &mut AppApi) {}
    fn on_team(&mut self, inst: InstId, teams: &[Bag], api: &mut AppApi) {}
    fn on_transport_sent(&mut self, inst: InstId, bag: Bag, api: &mut AppApi) {}
    fn on_tokens_received(&mut self, inst: InstId, bag: Bag, api: &mut AppApi) {}
    fn on_message(&mut self, src: NodeId, payload: &Payload, api: &mut AppApi) {}
}

/// Plain team formation with no application on top.
impl Application for () {}
