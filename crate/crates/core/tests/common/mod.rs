#![allow(dead_code)]

use std::collections::BTreeMap;

use tendermint_sim::oneshot::Step;
use tendermint_sim::quorum::{at_least_one_third, is_23_maj};
use tendermint_sim::trace::{Event, Trace};
use tendermint_sim::types::{Block, Digest, Message, MsgKind, ProcessId, Round, Value};

/// Lock state of one process as a round is left.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EndOfRound {
    pub locked: Option<Digest>,
    pub llr: i64,
    pub polcr: Option<Round>,
}

/// End-of-round states per (process, round), read off the next round's entry snapshot.
pub fn end_of_round(trace: &Trace) -> BTreeMap<(u32, Round), EndOfRound> {
    let mut out = BTreeMap::new();
    for rec in trace.records() {
        if let (Some(p), Event::RoundEntry { height: 1, round, locked, llr, left_polcr, .. }) = (rec.process, &rec.event) {
            if *round >= 2 {
                out.entry((p.0, round - 1)).or_insert(EndOfRound { locked: *locked, llr: *llr, polcr: *left_polcr });
            }
        }
    }
    out
}

/// The last lock transition `p` recorded, if any.
pub fn last_lock(trace: &Trace, p: u32) -> Option<(Option<Digest>, i64)> {
    trace.records().iter().rev().find_map(|r| match (&r.event, r.process) {
        (Event::Lock { locked, llr, .. }, Some(q)) if q.0 == p => Some((*locked, *llr)),
        _ => None,
    })
}

pub fn decision(trace: &Trace, p: u32) -> Option<(Round, Block)> {
    trace.records().iter().find_map(|r| match (&r.event, r.process) {
        (Event::Decide { round, block, .. }, Some(q)) if q.0 == p => Some((*round, block.clone())),
        _ => None,
    })
}

/// The first block proposed for `round` at height 1.
pub fn proposal(trace: &Trace, round: Round) -> Option<Block> {
    trace.records().iter().find_map(|r| match &r.event {
        Event::Emit { msg, relay: false, .. } if msg.kind == MsgKind::Propose && msg.height == 1 && msg.round == round => {
            msg.value.as_block().cloned()
        }
        _ => None,
    })
}

/// Record id of `p` entering `step` of `round` at height 1.
pub fn step_entry(trace: &Trace, p: u32, round: Round, step: Step) -> Option<u64> {
    trace.records().iter().find_map(|r| match (&r.event, r.process) {
        (Event::Step { height: 1, round: rr, step: s }, Some(q)) if q.0 == p && *rr == round && *s == step => Some(r.id),
        _ => None,
    })
}

/// Record id where `p` leaves `round`: the next round's entry, its decision, or the end of the trace.
pub fn round_exit(trace: &Trace, p: u32, round: Round) -> u64 {
    trace
        .records()
        .iter()
        .find_map(|r| match (&r.event, r.process) {
            (Event::RoundEntry { height: 1, round: rr, .. }, Some(q)) if q.0 == p && *rr > round => Some(r.id),
            (Event::Decide { height: 1, .. }, Some(q)) if q.0 == p => Some(r.id + 1),
            _ => None,
        })
        .unwrap_or(u64::MAX)
}

/// Votes of `kind` for `round` that `p` delivered before record `before`.
pub fn delivered(trace: &Trace, p: u32, kind: MsgKind, round: Round, before: u64) -> Vec<Message> {
    trace
        .records()
        .iter()
        .take_while(|r| r.id < before)
        .filter_map(|r| match (&r.event, r.process) {
            (Event::Deliver { msg, .. }, Some(q))
                if q == ProcessId(p) && msg.kind == kind && msg.round == round && msg.height == 1 =>
            {
                Some(msg.clone())
            }
            _ => None,
        })
        .collect()
}

pub fn maj(value: &Value, votes: &[Message], n: usize) -> bool {
    let refs: Vec<&Message> = votes.iter().collect();
    is_23_maj(value, &refs, n).expect("one slot")
}

pub fn third(block: &Block, votes: &[Message], n: usize) -> bool {
    let refs: Vec<&Message> = votes.iter().collect();
    at_least_one_third(block, &refs, n).expect("one slot")
}

/// True iff `p` held a prevote quorum for `value` when it entered the precommit step of `round`.
pub fn prevote_quorum_at_precommit(trace: &Trace, p: u32, round: Round, value: &Value) -> bool {
    let Some(at) = step_entry(trace, p, round, Step::Precommit) else { return false };
    maj(value, &delivered(trace, p, MsgKind::Prevote, round, at + 1), 4)
}

/// Precommits for `round` that `p` delivered while still in it.
pub fn precommits_in_round(trace: &Trace, p: u32, round: Round) -> Vec<Message> {
    delivered(trace, p, MsgKind::Precommit, round, round_exit(trace, p, round))
}

pub fn timed<T>(f: impl FnOnce() -> T) -> (T, std::time::Duration) {
    let start = std::time::Instant::now();
    let out = f();
    (out, start.elapsed())
}

pub mod golden;

/// Commit-wait timing at the process whose block rewards each height.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommitWait {
    pub height: tendermint_sim::types::Height,
    /// The rewarding proposer's commit timeout at this height.
    pub timeout: u64,
    /// Ticks from its commit-wait start to its first delivery of the victim's COMMIT.
    pub delay: Option<u64>,
}

/// Timeout and actual commit delay per rewarded height, from the trace alone.
pub fn commit_waits(trace: &Trace, victim: u32) -> Vec<CommitWait> {
    use tendermint_sim::oneshot::{proposer, TimerKind};
    let header = trace.header().expect("header");
    let mut validators = BTreeMap::new();
    let mut decided = BTreeMap::new();
    for r in trace.records() {
        match &r.event {
            Event::HeightStart { height, validators: v, .. } => {
                validators.entry(*height).or_insert_with(|| v.clone());
            }
            Event::Decide { height, round, .. } => {
                decided.entry(*height).or_insert(*round);
            }
            _ => {}
        }
    }
    let mut out = Vec::new();
    for (&h, &round) in &decided {
        if h < 2 {
            continue;
        }
        let q = proposer(&validators[&h], h, round, header.proposer_offset);
        let wait = trace.records().iter().find_map(|r| match &r.event {
            Event::TimerSet { timer: TimerKind::Commit, height, fires_at, .. } if *height == h - 1 && r.process == Some(q) => {
                Some((r.time, *fires_at))
            }
            _ => None,
        });
        let Some((start, fires)) = wait else { continue };
        let arrival = trace.records().iter().find_map(|r| match &r.event {
            Event::Deliver { msg, .. }
                if r.process == Some(q)
                    && msg.kind == MsgKind::Commit
                    && msg.height == h - 1
                    && msg.signer == ProcessId(victim) =>
            {
                Some(r.time)
            }
            _ => None,
        });
        out.push(CommitWait { height: h - 1, timeout: fires - start, delay: arrival.map(|t| t.saturating_sub(start)) });
    }
    out
}

/// Exhaustive over subsets of `n` validators: two quorums always share a member outside
/// every admissible faulty set, and a one-third set is never entirely faulty.
pub fn quorum_intersection(n: usize) -> Result<usize, String> {
    use tendermint_sim::quorum::{max_faults, one_third, quorum};
    let size = |s: u32| s.count_ones() as usize;
    let f = max_faults(n);
    let all = || 0..(1u32 << n);
    let faulty: Vec<u32> = all().filter(|s| size(*s) <= f).collect();
    let quorums: Vec<u32> = all().filter(|s| size(*s) >= quorum(n)).collect();
    let mut checked = 0;
    for a in &quorums {
        for b in &quorums {
            for bad in &faulty {
                if a & b & !bad == 0 {
                    return Err(format!("n={n}: quorums {a:b} and {b:b} meet only in faulty {bad:b}"));
                }
                checked += 1;
            }
        }
    }
    for s in all().filter(|s| size(*s) >= one_third(n)) {
        for bad in &faulty {
            if s & !bad == 0 {
                return Err(format!("n={n}: one-third set {s:b} is all faulty"));
            }
            checked += 1;
        }
    }
    // One member fewer than a quorum admits two sets meeting in at most f processes.
    let low = (1u32 << (quorum(n) - 1)) - 1;
    let high = low << (n + 1 - quorum(n));
    if size(low & high) > f {
        return Err(format!("n={n}: quorum threshold is not tight"));
    }
    if one_third(n) - 1 > f {
        return Err(format!("n={n}: one-third threshold is not tight"));
    }
    Ok(checked)
}
