use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{RunConfig, Strategy};
use crate::netsim::{AdvCtx, Adversary, NetworkModel, Route};
use crate::oneshot::proposer;
use crate::types::{Block, Digest, Height, Message, MsgKind, ProcessId, Round, Time, TxId, Value};

/// Seeded Byzantine behavior. Each faulty process draws one strategy from the
/// mix and acts the first time it sees traffic for a (height, round).
pub struct RandomByzantine {
    rng: ChaCha8Rng,
    model: NetworkModel,
    validators: Vec<ProcessId>,
    offset: usize,
    strategy: BTreeMap<ProcessId, Strategy>,
    seen: BTreeSet<(ProcessId, Height, Round)>,
    blocks: BTreeMap<Height, Vec<Block>>,
    proposals: BTreeMap<(Height, Round), Block>,
    inbox: BTreeMap<ProcessId, Vec<Message>>,
}

impl RandomByzantine {
    pub fn new(cfg: &RunConfig, mix: &[Strategy]) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_ad5e_7a11_0001);
        let mix = if mix.is_empty() { &[Strategy::Silent][..] } else { mix };
        let strategy = cfg
            .byzantine
            .iter()
            .map(|b| (ProcessId(*b), *mix.choose(&mut rng).expect("non-empty")))
            .collect();
        RandomByzantine {
            rng,
            model: cfg.network.clone(),
            validators: cfg.selector().select(&cfg.roster(), &[Block::genesis()], 1),
            offset: cfg.protocol.proposer_offset,
            strategy,
            seen: BTreeSet::new(),
            blocks: BTreeMap::new(),
            proposals: BTreeMap::new(),
            inbox: BTreeMap::new(),
        }
    }

    pub fn strategy_of(&self, p: ProcessId) -> Option<Strategy> {
        self.strategy.get(&p).copied()
    }

    fn jitter(&mut self, now: Time) -> Time {
        now + self.rng.gen_range(1..=self.model.delta.max(1) * 2)
    }

    /// A block for `height` that differs from every block seen so far.
    fn variant(&mut self, height: Height) -> Option<Block> {
        let mut b = self.blocks.get(&height)?.first()?.clone();
        b.payload = vec![TxId(self.rng.gen::<u64>() | 1)];
        Some(b)
    }

    fn split(&mut self, ctx: &AdvCtx, me: ProcessId) -> (Vec<ProcessId>, Vec<ProcessId>) {
        let mut others: Vec<ProcessId> = ctx.roster.iter().copied().filter(|p| *p != me).collect();
        others.shuffle(&mut self.rng);
        let cut = self.rng.gen_range(0..=others.len());
        let b = others.split_off(cut);
        (others, b)
    }

    fn act(&mut self, ctx: &mut AdvCtx, me: ProcessId, h: Height, r: Round) {
        let Some(strategy) = self.strategy_of(me) else { return };
        let known = self.proposals.get(&(h, r)).cloned().or_else(|| self.blocks.get(&h).and_then(|v| v.first().cloned()));
        let value = known.clone().map_or(Value::Nil, Value::Block);
        let now = ctx.now;
        let proposes = proposer(&self.validators, h, r, self.offset) == me;
        match strategy {
            Strategy::Silent => {}
            Strategy::Equivocate => {
                let (a, b) = self.split(ctx, me);
                let t = self.jitter(now);
                ctx.send(me, Message::prevote(me, h, r, value.clone(), -1), &a, t);
                ctx.send(me, Message::prevote(me, h, r, Value::Nil, -1), &b, t);
                let t = self.jitter(now);
                ctx.send(me, Message::precommit(me, h, r, value.clone()), &a, t);
                ctx.send(me, Message::precommit(me, h, r, Value::Nil), &b, t);
                if proposes {
                    if let (Some(x), Some(y)) = (known, self.variant(h)) {
                        ctx.send(me, Message::propose(me, h, r, Value::Block(x), None), &a, now + 1);
                        ctx.send(me, Message::propose(me, h, r, Value::Block(y), None), &b, now + 1);
                    }
                }
            }
            Strategy::SelectiveSend => {
                let (a, _) = self.split(ctx, me);
                let t = self.jitter(now);
                ctx.send(me, Message::prevote(me, h, r, value.clone(), -1), &a, t);
                let t = self.jitter(t);
                ctx.send(me, Message::precommit(me, h, r, value), &a, t);
                if proposes {
                    if let Some(y) = self.variant(h) {
                        ctx.send(me, Message::propose(me, h, r, Value::Block(y), None), &a, now + 1);
                    }
                }
            }
            Strategy::StaleReplay => {
                let mine = self.inbox.get(&me).cloned().unwrap_or_default();
                for _ in 0..3 {
                    if let Some(m) = mine.choose(&mut self.rng) {
                        let t = now + self.rng.gen_range(1..=self.model.delta.max(1) * 10);
                        ctx.send_all(me, m.clone(), t);
                    }
                }
                if r > 1 {
                    let old = self.rng.gen_range(1..r);
                    let t = self.jitter(now);
                    ctx.send_all(me, Message::prevote(me, h, old, value.clone(), -1), t);
                    ctx.send_all(me, Message::precommit(me, h, old, value), t);
                }
            }
            Strategy::InvalidProposal => {
                let mut bad = known.unwrap_or_else(Block::genesis);
                bad.height = h;
                bad.parent = Digest([0xee; 32]);
                let polc = (r > 1 && self.rng.gen_bool(0.5)).then(|| self.rng.gen_range(1..r));
                if proposes {
                    ctx.send_all(me, Message::propose(me, h, r, Value::Block(bad.clone()), polc), now + 1);
                }
                let t = self.jitter(now);
                ctx.send_all(me, Message::prevote(me, h, r, Value::Block(bad), -1), t);
                ctx.send_all(me, Message::precommit(me, h, r, Value::Nil), t);
            }
        }
    }
}

impl Adversary for RandomByzantine {
    fn route(&mut self, now: Time, _from: ProcessId, _msg: &Message, _relay: bool, _to: ProcessId) -> Route {
        if !self.model.is_stable(now) && self.rng.gen_bool(0.25) {
            Route::At(now + self.model.bound(now))
        } else {
            Route::Default
        }
    }

    fn on_deliver(&mut self, ctx: &mut AdvCtx, at: ProcessId, msg: &Message, _from: ProcessId) {
        if let Value::Block(b) = &msg.value {
            let list = self.blocks.entry(msg.height).or_default();
            if !list.contains(b) {
                list.push(b.clone());
            }
            if msg.kind == MsgKind::Propose {
                self.proposals.entry((msg.height, msg.round)).or_insert_with(|| b.clone());
            }
        }
        let inbox = self.inbox.entry(at).or_default();
        if inbox.len() < 64 {
            inbox.push(msg.clone());
        }
        if msg.kind == MsgKind::Commit || msg.round == 0 {
            return;
        }
        let (h, r) = (msg.height, msg.round);
        if self.seen.insert((at, h, r)) {
            self.act(ctx, at, h, r);
            if proposer(&self.validators, h, r + 1, self.offset) == at && self.seen.insert((at, h, r + 1)) {
                self.act(ctx, at, h, r + 1);
            }
        }
    }
}
