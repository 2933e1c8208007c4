//! Height driver: validator selection, one-shot instances, commit collection,
//! the commit timer, chain output and reward bookkeeping.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::block::{create_new_block, is_valid, ChainContext, Mempool};
use crate::fairness::Mechanism;
use crate::oneshot::{Effect, OneShot, OneShotConfig, TimerKind};
use crate::quorum::at_least_one_third;
use crate::trace::Event;
use crate::types::{Block, Height, Message, MsgKind, ProcessId, Round, Value};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Selector {
    /// The first `n` processes of the roster at every height.
    Static { n: usize },
    /// Static until `start_height`, then a stake-weighted draw of `n` keyed by the tip hash.
    StakeRotation { n: usize, stakes: Vec<u64>, start_height: Height },
}

impl Selector {
    pub fn size(&self) -> usize {
        match self {
            Selector::Static { n } | Selector::StakeRotation { n, .. } => *n,
        }
    }

    /// `chain` must hold genesis through height-1.
    pub fn select(&self, roster: &[ProcessId], chain: &[Block], height: Height) -> Vec<ProcessId> {
        match self {
            Selector::Static { n } => roster[..*n].to_vec(),
            Selector::StakeRotation { n, start_height, .. } if height < *start_height => roster[..*n].to_vec(),
            Selector::StakeRotation { n, stakes, .. } => {
                let tip = chain[height as usize - 1].digest();
                let mut h = Sha256::new();
                h.update(b"validator-set/v1");
                h.update(tip.0);
                h.update(height.to_le_bytes());
                let mut rng = ChaCha8Rng::from_seed(h.finalize().into());
                let weighted: Vec<(ProcessId, u64)> = roster
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (*p, stakes.get(i).copied().unwrap_or(1).max(1)))
                    .collect();
                let mut picked: Vec<ProcessId> = weighted
                    .choose_multiple_weighted(&mut rng, *n, |(_, w)| *w as f64)
                    .expect("positive weights")
                    .map(|(p, _)| *p)
                    .collect();
                picked.sort();
                picked
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct NodeConfig {
    pub oneshot: OneShotConfig,
    pub delta_commit: u64,
    pub mechanism: Mechanism,
    pub selector: Selector,
    pub mempool: Mempool,
    /// Fault bound used by the attestation filter.
    pub f: usize,
    /// Stop after the first decision instead of running the height loop.
    pub one_shot: bool,
}

/// What a node asks its host to do.
#[derive(Clone, Debug, PartialEq)]
pub enum Out {
    Send { msg: Message, relay: bool },
    Timer { kind: TimerKind, height: Height, round: Round, gen: u64, duration: u64 },
    Log(Event),
}

#[derive(Clone, Debug)]
enum Phase {
    Consensus(Box<OneShot>),
    Observing,
    Committed { block: Block, gen: u64 },
    Halted,
}

#[derive(Clone, Debug)]
pub struct Node {
    me: ProcessId,
    roster: Vec<ProcessId>,
    cfg: NodeConfig,
    height: Height,
    chain: Vec<Block>,
    validator_sets: BTreeMap<Height, Vec<ProcessId>>,
    phase: Phase,
    commits: BTreeMap<Height, BTreeMap<ProcessId, Message>>,
    to_reward: BTreeMap<Height, BTreeSet<ProcessId>>,
    timeout_commit: u64,
    commit_gen: u64,
    pending: Vec<Message>,
    out: Vec<Out>,
}

impl Node {
    pub fn new(me: ProcessId, roster: Vec<ProcessId>, cfg: NodeConfig) -> Self {
        Node {
            me,
            roster,
            timeout_commit: cfg.delta_commit,
            cfg,
            height: 0,
            chain: vec![Block::genesis()],
            validator_sets: BTreeMap::new(),
            phase: Phase::Observing,
            commits: BTreeMap::new(),
            to_reward: BTreeMap::new(),
            commit_gen: 0,
            pending: Vec::new(),
            out: Vec::new(),
        }
    }

    pub fn id(&self) -> ProcessId {
        self.me
    }
    pub fn height(&self) -> Height {
        self.height
    }
    /// Output blocks, genesis excluded.
    pub fn outputs(&self) -> &[Block] {
        &self.chain[1..]
    }
    pub fn timeout_commit(&self) -> u64 {
        self.timeout_commit
    }
    pub fn is_halted(&self) -> bool {
        matches!(self.phase, Phase::Halted)
    }
    pub fn consensus(&self) -> Option<&OneShot> {
        match &self.phase {
            Phase::Consensus(os) => Some(os),
            _ => None,
        }
    }
    pub fn to_reward(&self, height: Height) -> BTreeSet<ProcessId> {
        self.to_reward.get(&height).cloned().unwrap_or_default()
    }

    pub fn validators(&mut self, height: Height) -> Vec<ProcessId> {
        if let Some(v) = self.validator_sets.get(&height) {
            return v.clone();
        }
        let v = self.cfg.selector.select(&self.roster, &self.chain[..height as usize], height);
        self.validator_sets.insert(height, v.clone());
        v
    }

    fn drain(&mut self) -> Vec<Out> {
        std::mem::take(&mut self.out)
    }

    pub fn start(&mut self) -> Vec<Out> {
        assert_eq!(self.height, 0, "start called twice");
        self.begin_height(1);
        self.drain()
    }

    pub fn on_message(&mut self, msg: &Message) -> Vec<Out> {
        if !self.is_halted() {
            self.handle(msg);
        }
        self.drain()
    }

    pub fn timer_live(&self, kind: TimerKind, height: Height, gen: u64) -> bool {
        if height != self.height {
            return false;
        }
        match (&self.phase, kind) {
            (Phase::Committed { gen: g, .. }, TimerKind::Commit) => *g == gen,
            (Phase::Consensus(os), k) => os.timer_live(k, gen),
            _ => false,
        }
    }

    pub fn on_timer(&mut self, kind: TimerKind, height: Height, gen: u64) -> Vec<Out> {
        if height != self.height {
            return Vec::new();
        }
        match (&mut self.phase, kind) {
            (Phase::Committed { gen: g, .. }, TimerKind::Commit) if *g == gen => self.finish_height(),
            (Phase::Consensus(os), k) if k != TimerKind::Commit => {
                let effects = os.on_timer(k, gen);
                self.apply(effects)
            }
            _ => {}
        }
        self.drain()
    }

    fn begin_height(&mut self, h: Height) {
        self.height = h;
        let validators = self.validators(h);
        let ctx = ChainContext::after(&self.chain);
        self.out.push(Out::Log(Event::HeightStart { height: h, validators: validators.clone(), tip: ctx.tip }));
        if validators.contains(&self.me) {
            let sig = self.cfg.mechanism.signature(h, &self.to_reward, &self.commits, self.cfg.f);
            let candidate = create_new_block(&sig, &self.cfg.mempool, &self.chain, self.me);
            let mut os = OneShot::new(self.me, h, validators, self.cfg.oneshot.clone(), ctx, candidate);
            let effects = os.start();
            self.phase = Phase::Consensus(Box::new(os));
            self.apply(effects);
        } else {
            self.phase = Phase::Observing;
        }
        let (now, later): (Vec<_>, Vec<_>) = std::mem::take(&mut self.pending).into_iter().partition(|m| m.height == h);
        self.pending = later;
        for m in now {
            self.handle(&m);
        }
        self.try_adopt();
    }

    fn handle(&mut self, msg: &Message) {
        if msg.height > self.height {
            if !self.pending.contains(msg) {
                self.pending.push(msg.clone());
            }
            return;
        }
        if msg.kind == MsgKind::Commit {
            self.deliver_commit(msg);
            return;
        }
        if msg.height == self.height {
            let effects = match &mut self.phase {
                Phase::Consensus(os) => os.on_message(msg),
                _ => return,
            };
            self.apply(effects);
        }
    }

    fn deliver_commit(&mut self, msg: &Message) {
        let h = msg.height;
        if h == 0 || msg.value.as_block().is_none() || !self.validators(h).contains(&msg.signer) {
            return;
        }
        let slot = self.commits.entry(h).or_default();
        if slot.contains_key(&msg.signer) {
            return;
        }
        slot.insert(msg.signer, msg.clone());
        self.to_reward.entry(h).or_default().insert(msg.signer);
        self.out.push(Out::Send { msg: msg.clone(), relay: true });
        if h == self.height {
            self.try_adopt();
        }
    }

    /// Non-validators adopt on one-third of commits. A validator still undecided in
    /// its instance does the same, since one-third includes a correct committer.
    fn try_adopt(&mut self) {
        let waiting = match &self.phase {
            Phase::Observing => true,
            Phase::Consensus(os) => os.decided().is_none() && !self.cfg.one_shot,
            _ => false,
        };
        if !waiting {
            return;
        }
        let n = self.validators(self.height).len();
        let ctx = ChainContext::after(&self.chain);
        let Some(commits) = self.commits.get(&self.height) else { return };
        let all: Vec<&Message> = commits.values().collect();
        let found = all.iter().find_map(|c| {
            let b = c.value.as_block()?;
            let ok = at_least_one_third(b, &all, n).unwrap_or(false) && is_valid(&Value::Block(b.clone()), &ctx);
            ok.then(|| b.clone())
        });
        match found {
            Some(b) if matches!(self.phase, Phase::Consensus(_)) => self.on_decided(b),
            Some(b) => self.enter_commit_wait(b),
            None => {}
        }
    }

    fn enter_commit_wait(&mut self, block: Block) {
        self.commit_gen += 1;
        let gen = self.commit_gen;
        self.phase = Phase::Committed { block, gen };
        self.out.push(Out::Timer {
            kind: TimerKind::Commit,
            height: self.height,
            round: 0,
            gen,
            duration: self.timeout_commit,
        });
    }

    fn apply(&mut self, effects: Vec<Effect>) {
        let h = self.height;
        for e in effects {
            match e {
                Effect::Broadcast(msg) => self.out.push(Out::Send { msg, relay: false }),
                Effect::Relay(msg) => self.out.push(Out::Send { msg, relay: true }),
                Effect::SetTimer { kind, round, gen, duration } => {
                    self.out.push(Out::Timer { kind, height: h, round, gen, duration })
                }
                Effect::EnterStep { step, round } => self.out.push(Out::Log(Event::Step { height: h, round, step })),
                Effect::RoundEntry { round, locked, llr, left_polcr, jump } => {
                    self.out.push(Out::Log(Event::RoundEntry { height: h, round, locked, llr, left_polcr, jump }))
                }
                Effect::Lock { round, locked, llr, cause } => {
                    self.out.push(Out::Log(Event::Lock { height: h, round, locked, llr, cause }))
                }
                Effect::TimeoutBump { kind, value } => {
                    self.out.push(Out::Log(Event::Timeout { height: h, timer: kind, value }))
                }
                Effect::Evidence(msg) => self.out.push(Out::Log(Event::Evidence { msg })),
                Effect::Decide { round, block } => {
                    self.out.push(Out::Log(Event::Decide { height: h, round, block: block.clone() }));
                    self.on_decided(block);
                }
            }
        }
    }

    fn on_decided(&mut self, block: Block) {
        if self.cfg.one_shot {
            self.phase = Phase::Halted;
            self.out.push(Out::Log(Event::Halt));
            return;
        }
        let mut attests = match &self.phase {
            Phase::Consensus(os) => os.participants(),
            _ => BTreeSet::new(),
        };
        attests.insert(self.me);
        let commit = Message::commit(self.me, self.height, block.clone(), attests);
        self.commits.entry(self.height).or_default().insert(self.me, commit.clone());
        self.to_reward.entry(self.height).or_default().insert(self.me);
        self.out.push(Out::Send { msg: commit, relay: false });
        self.enter_commit_wait(block);
    }

    fn finish_height(&mut self) {
        let Phase::Committed { block, .. } = std::mem::replace(&mut self.phase, Phase::Observing) else {
            unreachable!("commit timer outside commit wait")
        };
        let h = self.height;
        let n = self.validators(h).len();
        let seen = self.commits.get(&h).map_or(0, |c| c.len());
        let next = self.cfg.mechanism.next_timeout(self.timeout_commit, seen, n);
        if next != self.timeout_commit {
            self.timeout_commit = next;
            self.out.push(Out::Log(Event::Timeout { height: h, timer: TimerKind::Commit, value: next }));
        }
        if let Some(rh) = self.cfg.mechanism.rewarded_height(h) {
            self.out.push(Out::Log(Event::Reward {
                height: h,
                rewarded_height: rh,
                rewarded: block.last_commit.clone(),
            }));
        }
        self.out.push(Out::Log(Event::Output { height: h, block: block.clone() }));
        self.chain.push(block);
        self.begin_height(h + 1);
    }
}
