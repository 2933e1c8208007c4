//! Discrete-event simulator: clock, timers, best-effort broadcast with relay,
//! partially synchronous delays, and the adversary hook surface.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::oneshot::TimerKind;
use crate::repeated::{Node, NodeConfig, Out};
use crate::trace::{Event, Hop, RunHeader, Trace, TraceRecord};
use crate::types::{Height, Message, ProcessId, Round, Time};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkMode {
    Synchronous,
    EventuallySynchronous,
    /// Eventually synchronous with the stabilization time past any horizon.
    Asynchronous,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub mode: NetworkMode,
    pub gst: Time,
    pub delta: u64,
    /// Cap on correct-to-correct delays before stabilization.
    pub max_pre_gst: u64,
}

impl NetworkModel {
    pub fn synchronous(delta: u64) -> Self {
        NetworkModel { mode: NetworkMode::Synchronous, gst: 0, delta, max_pre_gst: delta }
    }

    pub fn gst(&self) -> Option<Time> {
        match self.mode {
            NetworkMode::Synchronous => Some(0),
            NetworkMode::EventuallySynchronous => Some(self.gst),
            NetworkMode::Asynchronous => None,
        }
    }

    pub fn is_stable(&self, t: Time) -> bool {
        self.gst().is_some_and(|g| t >= g)
    }

    /// Largest correct-to-correct delay for a message emitted at `t`.
    pub fn bound(&self, t: Time) -> u64 {
        if self.is_stable(t) {
            self.delta
        } else {
            self.max_pre_gst.max(self.delta)
        }
    }

    pub fn sample(&self, t: Time, rng: &mut ChaCha8Rng) -> u64 {
        rng.gen_range(1..=self.bound(t).max(1))
    }
}

/// Per-recipient routing decision for an emitted copy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    /// Delay drawn from the network model.
    Default,
    /// Absolute delivery time; clamped into the model's bound on correct links.
    At(Time),
    /// Drop the copy. Converted to the latest legal delivery on correct links.
    Omit,
    /// Schedule at the latest legal delivery, but let the adversary release it earlier.
    Hold,
}

/// A message a Byzantine process sends at an explicit time.
#[derive(Clone, Debug)]
pub struct Injection {
    pub from: ProcessId,
    pub msg: Message,
    pub to: Vec<ProcessId>,
    pub at: Time,
}

/// Read-only run facts plus a buffer for injections and wake-ups.
pub struct AdvCtx<'a> {
    pub now: Time,
    pub roster: &'a [ProcessId],
    pub byzantine: &'a BTreeSet<ProcessId>,
    pub model: &'a NetworkModel,
    injections: Vec<Injection>,
    wakes: Vec<Time>,
    releases: Vec<(ProcessId, Message, Time)>,
}

impl AdvCtx<'_> {
    /// Moves every held copy of `msg` bound for `to` to time `at` (not earlier than now).
    pub fn release(&mut self, to: ProcessId, msg: &Message, at: Time) {
        self.releases.push((to, msg.clone(), at));
    }

    pub fn send(&mut self, from: ProcessId, msg: Message, to: &[ProcessId], at: Time) {
        self.injections.push(Injection { from, msg, to: to.to_vec(), at });
    }

    pub fn send_all(&mut self, from: ProcessId, msg: Message, at: Time) {
        let to: Vec<ProcessId> = self.roster.iter().copied().filter(|p| *p != from).collect();
        self.send(from, msg, &to, at);
    }

    pub fn wake(&mut self, at: Time) {
        self.wakes.push(at);
    }

    pub fn correct(&self) -> Vec<ProcessId> {
        self.roster.iter().copied().filter(|p| !self.byzantine.contains(p)).collect()
    }
}

/// Controls Byzantine processes and the scheduling freedom the model allows.
pub trait Adversary {
    fn route(&mut self, _now: Time, _from: ProcessId, _msg: &Message, _relay: bool, _to: ProcessId) -> Route {
        Route::Default
    }
    /// A Byzantine process received `msg` from `from`.
    fn on_deliver(&mut self, _ctx: &mut AdvCtx, _at: ProcessId, _msg: &Message, _from: ProcessId) {}
    /// Every trace record, as it is appended.
    fn on_observe(&mut self, _ctx: &mut AdvCtx, _rec: &TraceRecord) {}
    fn on_tick(&mut self, _ctx: &mut AdvCtx) {}
}

/// No Byzantine behavior and model-drawn delays.
pub struct Benign;
impl Adversary for Benign {}

#[derive(Clone, Debug)]
enum Payload {
    Deliver { to: ProcessId, from: ProcessId, msg: Message, sent_at: Time },
    Timer { to: ProcessId, kind: TimerKind, height: Height, round: Round, gen: u64 },
    Wake,
}

impl Payload {
    fn class(&self) -> u8 {
        match self {
            Payload::Deliver { .. } => 0,
            Payload::Timer { .. } => 1,
            Payload::Wake => 2,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopRule {
    /// Stop once every correct process has output this many blocks.
    pub heights: Option<u64>,
    /// Stop once any correct process enters a round above this.
    pub rounds: Option<Round>,
    /// Stop at this simulated time.
    pub time: Time,
    pub max_events: u64,
}

#[derive(Debug)]
pub struct RunResult {
    pub trace: Trace,
    pub nodes: BTreeMap<ProcessId, Node>,
    pub end_reason: String,
    pub end_time: Time,
}

pub struct Sim {
    now: Time,
    seq: u64,
    queue: BTreeMap<(Time, u8, u64), Payload>,
    rng: ChaCha8Rng,
    model: NetworkModel,
    header: RunHeader,
    nodes: BTreeMap<ProcessId, Node>,
    adversary: Option<Box<dyn Adversary>>,
    trace: Trace,
    received: HashMap<ProcessId, HashSet<u64>>,
    held: HashMap<(ProcessId, u64), Vec<(Time, u8, u64)>>,
    round_cap_hit: bool,
    rounds_cap: Option<Round>,
}

impl Sim {
    pub fn new(header: RunHeader, model: NetworkModel, node_cfg: NodeConfig, adversary: Box<dyn Adversary>) -> Self {
        let nodes = header
            .roster
            .iter()
            .filter(|p| !header.byzantine.contains(p))
            .map(|p| (*p, Node::new(*p, header.roster.clone(), node_cfg.clone())))
            .collect();
        Sim {
            now: 0,
            seq: 0,
            queue: BTreeMap::new(),
            rng: ChaCha8Rng::seed_from_u64(header.seed),
            model,
            header,
            nodes,
            adversary: Some(adversary),
            trace: Trace::new(),
            received: HashMap::new(),
            held: HashMap::new(),
            round_cap_hit: false,
            rounds_cap: None,
        }
    }

    fn is_byz(&self, p: ProcessId) -> bool {
        self.header.byzantine.contains(&p)
    }

    fn schedule(&mut self, at: Time, payload: Payload) -> (Time, u8, u64) {
        self.seq += 1;
        let key = (at, payload.class(), self.seq);
        self.queue.insert(key, payload);
        key
    }

    fn log(&mut self, process: Option<ProcessId>, event: Event) -> u64 {
        if let (Some(cap), Event::RoundEntry { round, .. }) = (self.rounds_cap, &event) {
            if *round > cap && process.is_some_and(|p| !self.is_byz(p)) {
                self.round_cap_hit = true;
            }
        }
        let id = self.trace.push(self.now, process, event);
        if self.adversary.is_some() {
            let rec = self.trace.records()[id as usize].clone();
            self.with_adversary(|adv, ctx| adv.on_observe(ctx, &rec));
        }
        id
    }

    /// Runs a hook with the adversary temporarily detached, then applies what it queued.
    fn with_adversary(&mut self, hook: impl FnOnce(&mut dyn Adversary, &mut AdvCtx)) {
        let Some(mut adv) = self.adversary.take() else { return };
        let mut ctx = AdvCtx {
            now: self.now,
            roster: &self.header.roster,
            byzantine: &self.header.byzantine,
            model: &self.model,
            injections: Vec::new(),
            wakes: Vec::new(),
            releases: Vec::new(),
        };
        hook(adv.as_mut(), &mut ctx);
        let (inj, wakes, releases) = (ctx.injections, ctx.wakes, ctx.releases);
        self.adversary = Some(adv);
        self.apply_adversary(inj, wakes, releases);
    }

    fn apply_adversary(&mut self, injections: Vec<Injection>, wakes: Vec<Time>, releases: Vec<(ProcessId, Message, Time)>) {
        for t in wakes {
            self.schedule(t.max(self.now), Payload::Wake);
        }
        for (to, msg, at) in releases {
            for key in self.held.remove(&(to, msg.key())).unwrap_or_default() {
                if let Some(payload) = self.queue.remove(&key) {
                    self.schedule(at.max(self.now).min(key.0), payload);
                }
            }
        }
        for inj in injections {
            self.inject(inj);
        }
    }

    fn inject(&mut self, inj: Injection) {
        let Injection { from, msg, to, at } = inj;
        let own = msg.signer == from;
        let relayed = self.received.get(&from).is_some_and(|s| s.contains(&msg.key()));
        if !self.is_byz(from) || !(own || relayed) {
            let reason = if self.is_byz(from) { "signer is not the sender" } else { "sender is not adversarial" };
            self.log(Some(from), Event::Reject { msg, reason: reason.into() });
            return;
        }
        let at = at.max(self.now);
        let hops: Vec<Hop> = to.iter().filter(|q| **q != from).map(|q| Hop { to: *q, at: Some(at) }).collect();
        for h in &hops {
            self.schedule(at, Payload::Deliver { to: h.to, from, msg: msg.clone(), sent_at: self.now });
        }
        self.log(Some(from), Event::Emit { msg, relay: !own, hops });
    }

    fn handle_outs(&mut self, p: ProcessId, outs: Vec<Out>) {
        for o in outs {
            match o {
                Out::Send { msg, relay } => self.broadcast(p, msg, relay),
                Out::Timer { kind, height, round, gen, duration } => {
                    let fires_at = self.now + duration.max(1);
                    self.schedule(fires_at, Payload::Timer { to: p, kind, height, round, gen });
                    self.log(Some(p), Event::TimerSet { timer: kind, height, round, gen, fires_at });
                }
                Out::Log(ev) => {
                    self.log(Some(p), ev);
                }
            }
        }
    }

    fn broadcast(&mut self, p: ProcessId, msg: Message, relay: bool) {
        assert!(relay || msg.signer == p, "correct process emitted under a foreign signer");
        let mut hops = Vec::new();
        let mut holds = Vec::new();
        let roster = self.header.roster.clone();
        let mut adv = self.adversary.take().expect("adversary present");
        for q in roster.into_iter().filter(|q| *q != p) {
            let route = adv.route(self.now, p, &msg, relay, q);
            let drawn = self.now + self.model.sample(self.now, &mut self.rng);
            let mut at = match route {
                Route::Default => Some(drawn),
                Route::At(t) => Some(t),
                Route::Omit | Route::Hold => None,
            };
            if !self.is_byz(q) {
                let latest = self.now + self.model.bound(self.now);
                at = Some(at.unwrap_or(latest).clamp(self.now + 1, latest));
            }
            hops.push(Hop { to: q, at });
            holds.push(route == Route::Hold);
        }
        self.adversary = Some(adv);
        for (h, held) in hops.iter().zip(&holds) {
            if let Some(at) = h.at {
                let key = self.schedule(at, Payload::Deliver { to: h.to, from: p, msg: msg.clone(), sent_at: self.now });
                if *held {
                    self.held.entry((h.to, msg.key())).or_default().push(key);
                }
            }
        }
        self.log(Some(p), Event::Emit { msg: msg.clone(), relay, hops });
        if !relay {
            self.log(Some(p), Event::Deliver { msg, from: p, sent_at: self.now });
        }
    }

    fn stop_reason(&self, stop: &StopRule) -> Option<String> {
        if self.round_cap_hit {
            return Some(format!("round horizon {} reached", stop.rounds.unwrap_or_default()));
        }
        let correct = || self.nodes.values();
        if self.header.one_shot {
            if correct().all(|n| n.is_halted()) {
                return Some("all correct processes decided".into());
            }
        } else if let Some(hs) = stop.heights {
            if correct().all(|n| n.outputs().len() as u64 >= hs) {
                return Some(format!("height horizon {hs} reached"));
            }
        }
        None
    }

    pub fn run(mut self, stop: &StopRule) -> RunResult {
        self.rounds_cap = stop.rounds;
        self.log(None, Event::Start(self.header.clone()));
        let ids: Vec<ProcessId> = self.nodes.keys().copied().collect();
        for p in ids {
            let outs = self.nodes.get_mut(&p).expect("node").start();
            self.handle_outs(p, outs);
        }
        self.with_adversary(|adv, ctx| adv.on_tick(ctx));
        let mut events = 0u64;
        let reason = loop {
            if let Some(r) = self.stop_reason(stop) {
                break r;
            }
            if events >= stop.max_events {
                break format!("event budget {} exhausted", stop.max_events);
            }
            let Some(((t, _, _), payload)) = self.queue.pop_first() else {
                break "quiescent: no pending events".into();
            };
            if t > stop.time {
                break format!("time horizon {} reached", stop.time);
            }
            self.now = t;
            events += 1;
            self.step(payload);
        };
        let end_time = self.now;
        self.log(None, Event::End { reason: reason.clone() });
        RunResult { trace: self.trace, nodes: self.nodes, end_reason: reason, end_time }
    }

    fn step(&mut self, payload: Payload) {
        match payload {
            Payload::Deliver { to, from, msg, sent_at } => {
                if self.is_byz(to) {
                    self.received.entry(to).or_default().insert(msg.key());
                    self.log(Some(to), Event::Deliver { msg: msg.clone(), from, sent_at });
                    self.with_adversary(|adv, ctx| adv.on_deliver(ctx, to, &msg, from));
                    return;
                }
                if self.nodes[&to].is_halted() {
                    return;
                }
                self.log(Some(to), Event::Deliver { msg: msg.clone(), from, sent_at });
                let outs = self.nodes.get_mut(&to).expect("node").on_message(&msg);
                self.handle_outs(to, outs);
            }
            Payload::Timer { to, kind, height, round, gen } => {
                if !self.nodes[&to].timer_live(kind, height, gen) {
                    return;
                }
                self.log(Some(to), Event::TimerFired { timer: kind, height, round, gen });
                let outs = self.nodes.get_mut(&to).expect("node").on_timer(kind, height, gen);
                self.handle_outs(to, outs);
            }
            Payload::Wake => self.with_adversary(|adv, ctx| adv.on_tick(ctx)),
        }
    }
}
