//! Single-height consensus state machine (propose, prevote, precommit).
//!
//! The machine is a pure event handler: deliveries and timer firings go in,
//! an ordered list of [`Effect`]s comes out. Own messages are applied to the
//! local vote sets at emission time, which models self-delivery at delay zero.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::block::{is_valid, ChainContext};
use crate::quorum::{quorum, Insert, VoteSet};
use crate::types::{Block, Digest, Height, Message, MsgKind, ProcessId, Round, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UnlockRule {
    /// Unlock only on a quorum for a block other than the locked one.
    #[default]
    Corrected,
    /// Unlock on any block quorum at the proposal's lock round.
    Legacy,
}

/// When the prevote timer starts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PrevoteTimer {
    /// After more than 2n/3 prevotes of any value, if none of them forms a quorum.
    #[default]
    AfterQuorum,
    /// At prevote step entry; a block or nil quorum ends the step early.
    OnEntry,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OneShotConfig {
    pub unlock_rule: UnlockRule,
    pub prevote_timer: PrevoteTimer,
    /// Quarantine proposals whose signer is not the round's proposer.
    pub check_proposer: bool,
    pub delta_propose: u64,
    pub delta_prevote: u64,
    pub proposer_offset: usize,
}

impl Default for OneShotConfig {
    fn default() -> Self {
        OneShotConfig {
            unlock_rule: UnlockRule::Corrected,
            prevote_timer: PrevoteTimer::AfterQuorum,
            check_proposer: true,
            delta_propose: 10,
            delta_prevote: 10,
            proposer_offset: 0,
        }
    }
}

/// Round-robin proposer: `validators[(h-1 + r-1 + offset) mod n]`.
pub fn proposer(validators: &[ProcessId], height: Height, round: Round, offset: usize) -> ProcessId {
    assert!(!validators.is_empty() && round >= 1 && height >= 1);
    let n = validators.len() as u64;
    let idx = ((height - 1) + (round - 1) + offset as u64) % n;
    validators[idx as usize]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Propose,
    Prevote,
    Precommit,
    Decided,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimerKind {
    Propose,
    Prevote,
    /// Bounds the wait for the prevotes a proposal's lock round refers to.
    UnlockWait,
    Commit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LockCause {
    /// Block quorum observed at precommit step entry.
    Polc,
    /// Nil quorum observed at precommit step entry.
    NilPolc,
    /// Unlocked by a proposal carrying a later lock round.
    ProposalUnlock,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Effect {
    Broadcast(Message),
    /// Re-broadcast of a newly retained message from another signer.
    Relay(Message),
    SetTimer { kind: TimerKind, round: Round, gen: u64, duration: u64 },
    EnterStep { step: Step, round: Round },
    /// Snapshot taken at round entry, after the lock-round pointer reset.
    /// `left_polcr` is the pointer as the previous round was left.
    RoundEntry { round: Round, locked: Option<Digest>, llr: i64, left_polcr: Option<Round>, jump: bool },
    Lock { round: Round, locked: Option<Digest>, llr: i64, cause: LockCause },
    TimeoutBump { kind: TimerKind, value: u64 },
    Evidence(Message),
    Decide { round: Round, block: Block },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Wait {
    Proposal,
    Unlock { polc: Round },
    Prevotes,
    PrevoteTimer,
    Precommits,
    Done,
}

#[derive(Clone, Debug)]
pub struct OneShot {
    me: ProcessId,
    height: Height,
    validators: Vec<ProcessId>,
    cfg: OneShotConfig,
    ctx: ChainContext,
    candidate: Block,
    round: Round,
    step: Step,
    wait: Wait,
    locked: Option<Block>,
    llr: i64,
    polcr: Option<Round>,
    timeout_propose: u64,
    timeout_prevote: u64,
    proposals: BTreeMap<Round, Message>,
    prevotes: BTreeMap<Round, VoteSet>,
    precommits: BTreeMap<Round, VoteSet>,
    evidence: Vec<Message>,
    decided: Option<Block>,
    gen: u64,
    active: Option<(TimerKind, u64)>,
    out: Vec<Effect>,
}

impl OneShot {
    /// `candidate` is the block this validator proposes when it is not locked.
    pub fn new(
        me: ProcessId,
        height: Height,
        validators: Vec<ProcessId>,
        cfg: OneShotConfig,
        ctx: ChainContext,
        candidate: Block,
    ) -> Self {
        OneShot {
            me,
            height,
            validators,
            timeout_propose: cfg.delta_propose,
            timeout_prevote: cfg.delta_prevote,
            cfg,
            ctx,
            candidate,
            round: 0,
            step: Step::Propose,
            wait: Wait::Done,
            locked: None,
            llr: -1,
            polcr: None,
            proposals: BTreeMap::new(),
            prevotes: BTreeMap::new(),
            precommits: BTreeMap::new(),
            evidence: Vec::new(),
            decided: None,
            gen: 0,
            active: None,
            out: Vec::new(),
        }
    }

    pub fn me(&self) -> ProcessId {
        self.me
    }
    pub fn height(&self) -> Height {
        self.height
    }
    pub fn round(&self) -> Round {
        self.round
    }
    pub fn step(&self) -> Step {
        self.step
    }
    pub fn locked(&self) -> Option<&Block> {
        self.locked.as_ref()
    }
    pub fn llr(&self) -> i64 {
        self.llr
    }
    pub fn polcr(&self) -> Option<Round> {
        self.polcr
    }
    pub fn timeout_propose(&self) -> u64 {
        self.timeout_propose
    }
    pub fn timeout_prevote(&self) -> u64 {
        self.timeout_prevote
    }
    pub fn decided(&self) -> Option<&Block> {
        self.decided.as_ref()
    }
    pub fn validators(&self) -> &[ProcessId] {
        &self.validators
    }
    pub fn context(&self) -> &ChainContext {
        &self.ctx
    }
    pub fn proposal(&self, round: Round) -> Option<&Message> {
        self.proposals.get(&round)
    }
    pub fn prevotes(&self, round: Round) -> Option<&VoteSet> {
        self.prevotes.get(&round)
    }
    pub fn precommits(&self, round: Round) -> Option<&VoteSet> {
        self.precommits.get(&round)
    }
    pub fn evidence(&self) -> &[Message] {
        &self.evidence
    }

    /// True while a timer with this generation has been neither fired nor superseded.
    pub fn timer_live(&self, kind: TimerKind, gen: u64) -> bool {
        self.step != Step::Decided && self.active == Some((kind, gen))
    }

    /// Signers of any vote delivered at this height.
    pub fn participants(&self) -> std::collections::BTreeSet<ProcessId> {
        self.prevotes
            .values()
            .chain(self.precommits.values())
            .flat_map(|s| s.signers())
            .collect()
    }

    fn n(&self) -> usize {
        self.validators.len()
    }

    pub fn proposer_of(&self, round: Round) -> ProcessId {
        proposer(&self.validators, self.height, round, self.cfg.proposer_offset)
    }

    fn drain(&mut self) -> Vec<Effect> {
        std::mem::take(&mut self.out)
    }

    pub fn start(&mut self) -> Vec<Effect> {
        assert_eq!(self.round, 0, "start called twice");
        self.start_round(1);
        self.drain()
    }

    pub fn on_message(&mut self, msg: &Message) -> Vec<Effect> {
        if self.step == Step::Decided || msg.height != self.height || !self.validators.contains(&msg.signer) {
            return Vec::new();
        }
        match msg.kind {
            MsgKind::Propose => self.deliver_propose(msg),
            MsgKind::Prevote => self.deliver_prevote(msg),
            MsgKind::Precommit => self.deliver_precommit(msg),
            MsgKind::Commit => {}
        }
        self.drain()
    }

    pub fn on_timer(&mut self, kind: TimerKind, gen: u64) -> Vec<Effect> {
        if self.step == Step::Decided || self.active != Some((kind, gen)) {
            return Vec::new();
        }
        self.active = None;
        match (kind, self.wait) {
            (TimerKind::Propose, Wait::Proposal) => {
                if !self.proposals.contains_key(&self.round) {
                    self.timeout_propose += 1;
                    self.out.push(Effect::TimeoutBump { kind, value: self.timeout_propose });
                }
                self.enter_prevote(self.round);
            }
            (TimerKind::UnlockWait, Wait::Unlock { .. }) => self.cast_prevote(),
            (TimerKind::Prevote, Wait::PrevoteTimer) => {
                self.timeout_prevote += 1;
                self.out.push(Effect::TimeoutBump { kind, value: self.timeout_prevote });
                self.enter_precommit(self.round);
            }
            _ => {}
        }
        self.drain()
    }

    fn set_timer(&mut self, kind: TimerKind, duration: u64) {
        self.gen += 1;
        self.active = Some((kind, self.gen));
        self.out.push(Effect::SetTimer { kind, round: self.round, gen: self.gen, duration });
    }

    fn cancel_timer(&mut self) {
        self.active = None;
    }

    fn broadcast(&mut self, msg: Message) {
        match msg.kind {
            MsgKind::Propose => {
                self.proposals.insert(msg.round, msg.clone());
            }
            MsgKind::Prevote => {
                self.prevote_set(msg.round).insert(&msg);
            }
            MsgKind::Precommit => {
                self.precommit_set(msg.round).insert(&msg);
            }
            MsgKind::Commit => unreachable!("commits are emitted by the height driver"),
        }
        self.out.push(Effect::Broadcast(msg));
    }

    fn prevote_set(&mut self, r: Round) -> &mut VoteSet {
        let h = self.height;
        self.prevotes.entry(r).or_insert_with(|| VoteSet::new(h, r, MsgKind::Prevote))
    }

    fn precommit_set(&mut self, r: Round) -> &mut VoteSet {
        let h = self.height;
        self.precommits.entry(r).or_insert_with(|| VoteSet::new(h, r, MsgKind::Precommit))
    }

    fn prevote_count(&self, r: Round) -> usize {
        self.prevotes.get(&r).map_or(0, |s| s.len())
    }

    fn prevote_quorum_block(&self, r: Round) -> Option<Block> {
        self.prevotes.get(&r).and_then(|s| s.quorum_block(self.n()).cloned())
    }

    fn nil_prevote_quorum(&self, r: Round) -> bool {
        self.prevotes.get(&r).is_some_and(|s| s.has_quorum_for(&Value::Nil, self.n()))
    }

    fn record_lock(&mut self, cause: LockCause) {
        self.out.push(Effect::Lock {
            round: self.round,
            locked: self.locked.as_ref().map(Block::digest),
            llr: self.llr,
            cause,
        });
    }

    fn start_round(&mut self, r: Round) {
        self.round = r;
        let left_polcr = self.polcr.take();
        self.step = Step::Propose;
        self.wait = Wait::Proposal;
        self.cancel_timer();
        self.out.push(Effect::EnterStep { step: Step::Propose, round: r });
        self.out.push(Effect::RoundEntry {
            round: r,
            locked: self.locked.as_ref().map(Block::digest),
            llr: self.llr,
            left_polcr,
            jump: false,
        });
        if self.proposer_of(r) == self.me {
            let (value, polc) = match &self.locked {
                Some(b) => (Value::Block(b.clone()), Some(self.llr as Round)),
                None => (Value::Block(self.candidate.clone()), None),
            };
            self.polcr = polc;
            let msg = Message::propose(self.me, self.height, r, value, polc);
            self.broadcast(msg);
            self.enter_prevote(r);
        } else if let Some(p) = self.proposals.get(&r) {
            // Delivered before round entry: adopt its lock round as if it arrived now.
            self.polcr = p.polc_round;
            self.enter_prevote(r);
        } else {
            self.set_timer(TimerKind::Propose, self.timeout_propose);
        }
    }

    fn enter_prevote(&mut self, r: Round) {
        self.cancel_timer();
        self.step = Step::Prevote;
        self.out.push(Effect::EnterStep { step: Step::Prevote, round: r });
        if let Some(p) = self.polcr {
            if self.llr != -1 && self.llr < p as i64 && p < r {
                if self.prevote_count(p) >= quorum(self.n()) {
                    self.unlock_check(p);
                } else {
                    self.wait = Wait::Unlock { polc: p };
                    self.set_timer(TimerKind::UnlockWait, self.timeout_prevote);
                    return;
                }
            }
        }
        self.cast_prevote();
    }

    fn unlock_check(&mut self, polc: Round) {
        let Some(b) = self.prevote_quorum_block(polc) else { return };
        let unlock = match self.cfg.unlock_rule {
            UnlockRule::Legacy => true,
            UnlockRule::Corrected => self.locked.as_ref() != Some(&b),
        };
        if unlock && self.locked.is_some() {
            self.locked = None;
            self.record_lock(LockCause::ProposalUnlock);
        }
    }

    fn cast_prevote(&mut self) {
        let r = self.round;
        let value = match &self.locked {
            Some(b) => Value::Block(b.clone()),
            None => match self.proposals.get(&r) {
                Some(p) if is_valid(&p.value, &self.ctx) => p.value.clone(),
                _ => Value::Nil,
            },
        };
        let msg = Message::prevote(self.me, self.height, r, value, self.llr);
        self.broadcast(msg);
        match self.cfg.prevote_timer {
            PrevoteTimer::AfterQuorum => self.wait = Wait::Prevotes,
            PrevoteTimer::OnEntry => {
                self.wait = Wait::PrevoteTimer;
                self.set_timer(TimerKind::Prevote, self.timeout_prevote);
            }
        }
        self.eval_prevote_wait();
    }

    fn eval_prevote_wait(&mut self) {
        let r = self.round;
        let decisive = self.nil_prevote_quorum(r) || self.prevote_quorum_block(r).is_some();
        match (self.cfg.prevote_timer, self.wait) {
            (PrevoteTimer::AfterQuorum, Wait::Prevotes) => {
                if decisive {
                    self.enter_precommit(r);
                } else if self.prevote_count(r) >= quorum(self.n()) {
                    self.wait = Wait::PrevoteTimer;
                    self.set_timer(TimerKind::Prevote, self.timeout_prevote);
                }
            }
            (PrevoteTimer::OnEntry, Wait::PrevoteTimer) if decisive => self.enter_precommit(r),
            _ => {}
        }
    }

    fn enter_precommit(&mut self, r: Round) {
        self.cancel_timer();
        self.step = Step::Precommit;
        self.out.push(Effect::EnterStep { step: Step::Precommit, round: r });
        let value = if let Some(b) = self.prevote_quorum_block(r) {
            self.locked = Some(b.clone());
            self.llr = r as i64;
            self.record_lock(LockCause::Polc);
            Value::Block(b)
        } else {
            if self.nil_prevote_quorum(r) && (self.locked.is_some() || self.llr != -1) {
                self.locked = None;
                self.llr = -1;
                self.record_lock(LockCause::NilPolc);
            }
            Value::Nil
        };
        self.broadcast(Message::precommit(self.me, self.height, r, value));
        if self.try_decide(r) {
            return;
        }
        self.wait = Wait::Precommits;
        self.eval_precommit_wait();
    }

    fn eval_precommit_wait(&mut self) {
        let r = self.round;
        if self.wait != Wait::Precommits {
            return;
        }
        let count = self.precommits.get(&r).map_or(0, |s| s.len());
        if self.nil_prevote_quorum(r) || count >= quorum(self.n()) {
            self.start_round(r + 1);
        }
    }

    fn try_decide(&mut self, r: Round) -> bool {
        let Some(b) = self.precommits.get(&r).and_then(|s| s.quorum_block(self.n()).cloned()) else {
            return false;
        };
        self.cancel_timer();
        self.step = Step::Decided;
        self.wait = Wait::Done;
        self.decided = Some(b.clone());
        self.out.push(Effect::Decide { round: r, block: b });
        true
    }

    fn jump(&mut self, r: Round, to_precommit: bool) {
        self.cancel_timer();
        self.round = r;
        self.out.push(Effect::RoundEntry {
            round: r,
            locked: self.locked.as_ref().map(Block::digest),
            llr: self.llr,
            left_polcr: self.polcr,
            jump: true,
        });
        if to_precommit {
            self.enter_precommit(r);
        } else {
            self.enter_prevote(r);
        }
    }

    fn deliver_propose(&mut self, msg: &Message) {
        let r = msg.round;
        if r == 0 || (self.cfg.check_proposer && msg.signer != self.proposer_of(r)) {
            self.quarantine(msg);
            return;
        }
        match self.proposals.get(&r) {
            Some(kept) => {
                if kept != msg {
                    self.quarantine(msg);
                }
                return;
            }
            None => {
                self.proposals.insert(r, msg.clone());
            }
        }
        self.polcr = msg.polc_round;
        self.out.push(Effect::Relay(msg.clone()));
        if r == self.round && self.wait == Wait::Proposal {
            self.enter_prevote(r);
        }
    }

    fn quarantine(&mut self, msg: &Message) {
        if !self.evidence.contains(msg) {
            self.evidence.push(msg.clone());
            self.out.push(Effect::Evidence(msg.clone()));
        }
    }

    fn deliver_prevote(&mut self, msg: &Message) {
        let r = msg.round;
        if r == 0 {
            return self.quarantine(msg);
        }
        match self.prevote_set(r).insert(msg) {
            Insert::Retained => {}
            Insert::Duplicate => return,
            Insert::Equivocation => return self.quarantine(msg),
        }
        self.out.push(Effect::Relay(msg.clone()));
        let q = quorum(self.n());
        if r > self.round && self.prevote_count(r) >= q {
            self.jump(r, false);
            return;
        }
        if let Wait::Unlock { polc } = self.wait {
            if r == polc && self.prevote_count(polc) >= q {
                self.cancel_timer();
                self.unlock_check(polc);
                self.cast_prevote();
            }
            return;
        }
        if r == self.round {
            match self.wait {
                Wait::Prevotes | Wait::PrevoteTimer => self.eval_prevote_wait(),
                Wait::Precommits => self.eval_precommit_wait(),
                _ => {}
            }
        }
    }

    fn deliver_precommit(&mut self, msg: &Message) {
        let r = msg.round;
        if r == 0 {
            return self.quarantine(msg);
        }
        match self.precommit_set(r).insert(msg) {
            Insert::Retained => {}
            Insert::Duplicate => return,
            Insert::Equivocation => return self.quarantine(msg),
        }
        self.out.push(Effect::Relay(msg.clone()));
        if self.try_decide(r) {
            return;
        }
        let count = self.precommits.get(&r).map_or(0, |s| s.len());
        if r > self.round && count >= quorum(self.n()) {
            self.jump(r, true);
            return;
        }
        if r == self.round && self.wait == Wait::Precommits {
            self.eval_precommit_wait();
        }
    }
}
