use crate::netsim::{Adversary, Route};
use crate::types::{Message, MsgKind, ProcessId, Time};

/// Delays one correct process's proposals and commits; every other copy takes one tick.
pub struct SlowValidator {
    victim: ProcessId,
    delay: u64,
}

impl SlowValidator {
    pub fn new(victim: ProcessId, delay: u64) -> Self {
        SlowValidator { victim, delay }
    }
}

impl Adversary for SlowValidator {
    fn route(&mut self, now: Time, from: ProcessId, msg: &Message, relay: bool, _to: ProcessId) -> Route {
        let slow = from == self.victim && !relay && matches!(msg.kind, MsgKind::Propose | MsgKind::Commit);
        Route::At(now + if slow { self.delay } else { 1 })
    }
}
