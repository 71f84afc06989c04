//! Wire messages.

use crate::bag::{Bag, Color};
use crate::time::SimTime;
use alloc::vec::Vec;

pub type NodeId = u32;
pub type InstId = u16;

/// Principal-layer messages, carried over channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PrincipalMsg {
    TokensPlease,
    Waiting,
    NoTransport,
    Transport(Bag),
    GoOn,
}

impl PrincipalMsg {
    pub fn name(&self) -> &'static str {
        match self {
            PrincipalMsg::TokensPlease => "TokensPlease",
            PrincipalMsg::Waiting => "Waiting",
            PrincipalMsg::NoTransport => "NoTransport",
            PrincipalMsg::Transport(_) => "Transport",
            PrincipalMsg::GoOn => "GoOn",
        }
    }

    pub fn tokens(&self) -> Bag {
        match self {
            PrincipalMsg::Transport(b) => *b,
            _ => Bag::EMPTY,
        }
    }
}

/// Instrumentation riding along a trace-enabled Transport. `stamp` is the
/// per-port counter the protocol reads; `gids` are ground-truth token ids that
/// only the checkers look at.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStamp {
    pub first: u64,
    pub gids: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Payload {
    // primary -> utility
    Busy,
    TokensUpdate { k: u32, color: Color },
    NotBusy,
    ChannelAck,
    RelayUp(PrincipalMsg),
    // utility -> primary
    BusyAck,
    Channel,
    NoChannel,
    RelayDown(PrincipalMsg),
    // application and trace traffic, node to node
    Start,
    LeaderAnnounce,
    TraceReport { formation: u64, counters: Vec<u64> },
}

/// Which virtual role handles a payload at the destination.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Primary,
    Utility,
    Node,
}

impl Payload {
    pub fn dst_role(&self) -> Role {
        match self {
            Payload::Busy
            | Payload::TokensUpdate { .. }
            | Payload::NotBusy
            | Payload::ChannelAck
            | Payload::RelayUp(_) => Role::Utility,
            Payload::BusyAck | Payload::Channel | Payload::NoChannel | Payload::RelayDown(_) => {
                Role::Primary
            }
            _ => Role::Node,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Payload::Busy => "Busy",
            Payload::TokensUpdate { .. } => "TokensUpdate",
            Payload::NotBusy => "NotBusy",
            Payload::ChannelAck => "ChannelAck",
            Payload::RelayUp(m) | Payload::RelayDown(m) => m.name(),
            Payload::BusyAck => "BusyAck",
            Payload::Channel => "Channel",
            Payload::NoChannel => "NoChannel",
            Payload::Start => "Start",
            Payload::LeaderAnnounce => "LeaderAnnounce",
            Payload::TraceReport { .. } => "TraceReport",
        }
    }

    /// Tokens physically carried.
    pub fn tokens(&self) -> Bag {
        match self {
            Payload::RelayUp(m) | Payload::RelayDown(m) => m.tokens(),
            _ => Bag::EMPTY,
        }
    }

    /// One-letter code used by the channel-layer tables, if the message is one
    /// of the six tabulated kinds.
    pub fn table_code(&self) -> Option<u8> {
        Some(match self {
            Payload::Busy => b'B',
            Payload::TokensUpdate { .. } => b'T',
            Payload::NotBusy => b'N',
            Payload::BusyAck => b'A',
            Payload::Channel => b'C',
            Payload::NoChannel => b'X',
            _ => return None,
        })
    }

    pub fn is_relayed(&self) -> bool {
        matches!(self, Payload::RelayUp(_) | Payload::RelayDown(_))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Envelope {
    /// Send sequence number, unique per run.
    pub id: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub inst: InstId,
    pub payload: Payload,
    pub sent_at: SimTime,
    pub deliver_at: SimTime,
    /// Instrumentation channel id for channel and relayed messages.
    pub tag: u64,
    pub trace: Option<TraceStamp>,
    /// Position on the directed link, starting at 1.
    pub link_seq: u64,
}
