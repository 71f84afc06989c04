//! Execution log records.

use crate::msg::NodeId;
use crate::time::SimTime;
use alloc::borrow::Cow;
use alloc::string::String;

/// One log line. Detail holds space-separated `key=value` fields.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogRecord {
    pub t: SimTime,
    pub seq: u64,
    pub kind: Cow<'static, str>,
    pub node: Option<NodeId>,
    pub peer: Option<NodeId>,
    pub msg_type: Option<Cow<'static, str>>,
    pub tokens: u32,
    pub detail: String,
}

pub mod kind {
    pub const DELIVER: &str = "deliver";
    pub const LOST: &str = "lost";
    pub const SEND: &str = "send";
    pub const INJECT: &str = "inject";
    pub const FAKE_INJECT: &str = "fake_inject";
    pub const APP_INJECT: &str = "app_inject";
    pub const INJECT_SKIPPED: &str = "inject_skipped";
    pub const START: &str = "start";
    pub const TOGGLE: &str = "toggle";
    pub const TEAM: &str = "team";
    pub const PHASE_BEGIN: &str = "phase_begin";
    pub const PHASE_END: &str = "phase_end";
    pub const CHANNEL_CREATE: &str = "channel_create";
    pub const CHANNEL_RELEASE: &str = "channel_release";
    pub const SCREEN: &str = "screen";
    pub const ORIGIN: &str = "origin";
    pub const APP: &str = "app";
}

impl LogRecord {
    pub fn field(&self, key: &str) -> Option<&str> {
        self.detail.split(' ').find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
    }

    pub fn field_u64(&self, key: &str) -> Option<u64> {
        self.field(key)?.parse().ok()
    }
}
