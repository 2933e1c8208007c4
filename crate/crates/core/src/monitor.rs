//! Per-round evaluation of the termination side-condition on proposer lock rounds.
//!
//! A round is satisfying when its proposer is correct, the round starts after
//! stabilization, and fewer than (n - 3f)/3 other correct validators are locked
//! at a round at least the proposer's last locked round.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::oneshot::proposer;
use crate::trace::{Event, Trace};
use crate::types::{Height, ProcessId, Round, Time};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundCheck {
    pub height: Height,
    pub round: Round,
    pub proposer: ProcessId,
    pub proposer_correct: bool,
    pub post_gst: bool,
    pub proposer_llr: i64,
    /// Correct validators other than the proposer, locked at or above its last locked round.
    pub count: usize,
    pub satisfied: bool,
    /// Trace id of the proposer's round-entry record.
    pub record: u64,
}

#[derive(Default)]
struct History {
    /// Round-entry snapshots keyed by round.
    entries: BTreeMap<Round, (Time, i64, u64)>,
    /// Every lock-round change in time order, including entries.
    timeline: Vec<(Time, i64)>,
}

impl History {
    fn llr_at(&self, round: Round, time: Time) -> i64 {
        if let Some((_, llr, _)) = self.entries.get(&round) {
            return *llr;
        }
        self.timeline.iter().take_while(|(t, _)| *t <= time).last().map_or(-1, |(_, l)| *l)
    }
}

/// The satisfaction predicate on its own: `3 * count < n - 3f`.
pub fn satisfies(count: usize, n: usize, f: usize) -> bool {
    (3 * count as i64) < n as i64 - 3 * f as i64
}

pub fn round_checks(trace: &Trace) -> Vec<RoundCheck> {
    let Some(header) = trace.header() else { return Vec::new() };
    let byz = &header.byzantine;
    let mut validators: BTreeMap<Height, Vec<ProcessId>> = BTreeMap::new();
    let mut hist: BTreeMap<(Height, ProcessId), History> = BTreeMap::new();
    for rec in trace.records() {
        let Some(p) = rec.process else { continue };
        if byz.contains(&p) {
            continue;
        }
        match &rec.event {
            Event::HeightStart { height, validators: v, .. } => {
                validators.entry(*height).or_insert_with(|| v.clone());
            }
            Event::RoundEntry { height, round, llr, .. } => {
                let h = hist.entry((*height, p)).or_default();
                h.entries.entry(*round).or_insert((rec.time, *llr, rec.id));
                h.timeline.push((rec.time, *llr));
            }
            Event::Lock { height, llr, .. } => {
                hist.entry((*height, p)).or_default().timeline.push((rec.time, *llr));
            }
            _ => {}
        }
    }

    let mut out = Vec::new();
    for (height, v) in &validators {
        let max_round = v
            .iter()
            .filter_map(|p| hist.get(&(*height, *p)))
            .filter_map(|h| h.entries.keys().next_back().copied())
            .max()
            .unwrap_or(0);
        for round in 1..=max_round {
            let prop = proposer(v, *height, round, header.proposer_offset);
            let correct = !byz.contains(&prop);
            let Some((t, llr_k, record)) = hist.get(&(*height, prop)).and_then(|h| h.entries.get(&round)).copied()
            else {
                continue;
            };
            let count = v
                .iter()
                .filter(|q| **q != prop && !byz.contains(q))
                .filter(|q| {
                    let llr_j = hist.get(&(*height, **q)).map_or(-1, |h| h.llr_at(round, t));
                    llr_j != -1 && llr_k <= llr_j
                })
                .count();
            let post_gst = header.gst.is_some_and(|g| t >= g);
            let satisfied = correct && post_gst && satisfies(count, v.len(), header.f);
            out.push(RoundCheck {
                height: *height,
                round,
                proposer: prop,
                proposer_correct: correct,
                post_gst,
                proposer_llr: llr_k,
                count,
                satisfied,
                record,
            });
        }
    }
    out
}

/// True iff some post-stabilization round at or after `from_round` is satisfying.
pub fn assumption_t_holds(trace: &Trace, from_round: Round) -> bool {
    round_checks(trace).iter().any(|c| c.round >= from_round && c.satisfied)
}
