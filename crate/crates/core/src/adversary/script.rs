//! Declarative schedules for height 1: Byzantine sends and held deliveries,
//! each keyed to an observable protocol event.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::netsim::{AdvCtx, Adversary, Route};
use crate::oneshot::{Step, TimerKind};
use crate::trace::{Event, TraceRecord};
use crate::types::{Block, Message, MsgKind, ProcessId, Round, Time, Value};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "on", rename_all = "snake_case", deny_unknown_fields)]
pub enum Trigger {
    Start,
    /// `process` enters `step` of `round`.
    Step { process: u32, round: Round, step: Step },
    /// `process` arms `timer` in `round`; the trigger time is the expiry.
    Expiry { process: u32, round: Round, timer: TimerKind },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct When {
    pub trigger: Trigger,
    #[serde(default)]
    pub offset: i64,
}

impl When {
    pub fn step(process: u32, round: Round, step: Step, offset: i64) -> When {
        When { trigger: Trigger::Step { process, round, step }, offset }
    }

    pub fn expiry(process: u32, round: Round, timer: TimerKind, offset: i64) -> When {
        When { trigger: Trigger::Expiry { process, round, timer }, offset }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "value", rename_all = "snake_case", deny_unknown_fields)]
pub enum ValueRef {
    Nil,
    /// The first block proposed for `round`.
    Proposal { round: Round },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum Action {
    /// A Byzantine `signer` sends one message to `to`.
    Send {
        signer: u32,
        kind: MsgKind,
        round: Round,
        value: ValueRef,
        #[serde(default)]
        polc: Option<Round>,
        to: Vec<u32>,
        when: When,
    },
    /// Copies matching (kind, round, signer) bound for `to` wait for `until`;
    /// without it they arrive as late as the model allows.
    Hold {
        kind: MsgKind,
        round: Round,
        #[serde(default)]
        signer: Option<u32>,
        to: u32,
        #[serde(default)]
        until: Option<When>,
    },
}

impl Action {
    fn hold_matches(&self, msg: &Message, dest: ProcessId) -> bool {
        match self {
            Action::Hold { kind, round, signer, to, .. } => {
                msg.height == 1
                    && msg.kind == *kind
                    && msg.round == *round
                    && signer.map_or(true, |s| msg.signer == ProcessId(s))
                    && dest == ProcessId(*to)
            }
            Action::Send { .. } => false,
        }
    }
}

pub struct Script {
    actions: Vec<Action>,
    fired: Vec<(Trigger, Time)>,
    proposals: Vec<(Round, Block)>,
    done: Vec<bool>,
    held: Vec<Vec<(ProcessId, Message)>>,
    dirty: bool,
    jitter: Option<(ChaCha8Rng, u64)>,
}

impl Script {
    pub fn new(actions: Vec<Action>) -> Self {
        let n = actions.len();
        Script { actions, fired: Vec::new(), proposals: Vec::new(), done: vec![false; n], held: vec![Vec::new(); n], dirty: true, jitter: None }
    }

    /// Unscripted copies take a seeded delay in `1..=max` instead of one tick.
    pub fn with_jitter(mut self, rng: ChaCha8Rng, max: u64) -> Self {
        self.jitter = Some((rng, max.max(1)));
        self
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    fn time_of(&self, when: &When) -> Option<Time> {
        let (_, t) = self.fired.iter().find(|(tr, _)| *tr == when.trigger)?;
        Some((*t as i64 + when.offset).max(0) as Time)
    }

    fn resolve(&self, v: &ValueRef) -> Option<Value> {
        match v {
            ValueRef::Nil => Some(Value::Nil),
            ValueRef::Proposal { round } => {
                self.proposals.iter().find(|(r, _)| r == round).map(|(_, b)| Value::Block(b.clone()))
            }
        }
    }

    fn fire(&mut self, trigger: Trigger, at: Time) {
        if !self.fired.iter().any(|(t, _)| *t == trigger) {
            self.fired.push((trigger, at));
            self.dirty = true;
        }
    }

    fn flush(&mut self, ctx: &mut AdvCtx) {
        if !self.dirty {
            return;
        }
        self.dirty = false;
        for i in 0..self.actions.len() {
            if self.done[i] {
                continue;
            }
            match &self.actions[i] {
                Action::Send { signer, kind, round, value, polc, to, when } => {
                    let (Some(at), Some(value)) = (self.time_of(when), self.resolve(value)) else { continue };
                    let me = ProcessId(*signer);
                    let msg = match kind {
                        MsgKind::Propose => Message::propose(me, 1, *round, value, *polc),
                        MsgKind::Prevote => Message::prevote(me, 1, *round, value, -1),
                        MsgKind::Precommit => Message::precommit(me, 1, *round, value),
                        MsgKind::Commit => continue,
                    };
                    let to: Vec<ProcessId> = to.iter().map(|p| ProcessId(*p)).collect();
                    ctx.send(me, msg, &to, at.max(ctx.now));
                    self.done[i] = true;
                }
                Action::Hold { until: Some(until), .. } => {
                    let Some(at) = self.time_of(until) else { continue };
                    for (to, msg) in self.held[i].drain(..) {
                        ctx.release(to, &msg, at.max(ctx.now));
                    }
                    self.done[i] = true;
                }
                Action::Hold { until: None, .. } => {}
            }
        }
    }
}

impl Adversary for Script {
    fn route(&mut self, now: Time, _from: ProcessId, msg: &Message, _relay: bool, to: ProcessId) -> Route {
        let Some(i) = self.actions.iter().position(|a| a.hold_matches(msg, to)) else {
            let delay = self.jitter.as_mut().map_or(1, |(rng, max)| rng.gen_range(1..=*max));
            return Route::At(now + delay);
        };
        let release = match &self.actions[i] {
            Action::Hold { until: Some(u), .. } => self.time_of(u),
            _ => None,
        };
        match release {
            Some(t) => Route::At(t.max(now + 1)),
            None => {
                self.held[i].push((to, msg.clone()));
                Route::Hold
            }
        }
    }

    fn on_observe(&mut self, ctx: &mut AdvCtx, rec: &TraceRecord) {
        let process = rec.process.map_or(0, |p| p.0);
        match &rec.event {
            Event::Start(_) => self.fire(Trigger::Start, 0),
            Event::Step { height: 1, round, step } => self.fire(Trigger::Step { process, round: *round, step: *step }, rec.time),
            Event::TimerSet { timer, height: 1, round, fires_at, .. } => {
                self.fire(Trigger::Expiry { process, round: *round, timer: *timer }, *fires_at)
            }
            Event::Emit { msg, .. } if msg.kind == MsgKind::Propose && msg.height == 1 => {
                if let Value::Block(b) = &msg.value {
                    if !self.proposals.iter().any(|(r, _)| *r == msg.round) {
                        self.proposals.push((msg.round, b.clone()));
                        self.dirty = true;
                    }
                }
            }
            _ => return,
        }
        self.flush(ctx);
    }

    fn on_tick(&mut self, ctx: &mut AdvCtx) {
        self.flush(ctx);
    }
}
