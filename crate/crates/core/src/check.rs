//! Property checkers over a finished trace. Every verdict cites record ids.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::block::{chain_intact, is_valid, ChainContext};
use crate::fairness::{audit, AuditReport, FairnessVerdict};
use crate::monitor::round_checks;
use crate::oneshot::{LockCause, Step, TimerKind};
use crate::trace::{Event, Trace};
use crate::types::{Block, Digest, Height, ProcessId, Round, Time, Value};

const MAX_WITNESSES: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Holds,
    Violated,
    Pass,
    Fail,
    Present,
    Absent,
    Fair,
    EventuallyFair,
    NotEventuallyFair,
    NotApplicable,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Status::Holds => "HOLDS",
            Status::Violated => "VIOLATED",
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Present => "present",
            Status::Absent => "absent",
            Status::Fair => "FAIR",
            Status::EventuallyFair => "EVENTUALLY-FAIR",
            Status::NotEventuallyFair => "NOT-EVENTUALLY-FAIR",
            Status::NotApplicable => "n/a",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Status {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| format!("unknown verdict status `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub property: String,
    pub status: Status,
    pub detail: String,
    pub witnesses: Vec<u64>,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} ({})", self.property, self.status, self.detail)
    }
}

fn verdict(property: &str, status: Status, detail: impl Into<String>, mut witnesses: Vec<u64>) -> Verdict {
    witnesses.truncate(MAX_WITNESSES);
    Verdict { property: property.into(), status, detail: detail.into(), witnesses }
}

fn safety(property: &str, bad: Vec<u64>, good: Vec<u64>, detail_ok: String, detail_bad: String) -> Verdict {
    if bad.is_empty() {
        verdict(property, Status::Holds, detail_ok, good)
    } else {
        verdict(property, Status::Violated, detail_bad, bad)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub partial: bool,
    pub verdicts: Vec<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fairness: Option<AuditReport>,
}

impl CheckReport {
    pub fn get(&self, property: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.property == property)
    }

    pub fn status(&self, property: &str) -> Option<Status> {
        self.get(property).map(|v| v.status)
    }
}

struct View<'a> {
    trace: &'a Trace,
    byz: BTreeSet<ProcessId>,
    end: Time,
}

impl View<'_> {
    fn correct(&self, p: Option<ProcessId>) -> Option<ProcessId> {
        p.filter(|p| !self.byz.contains(p))
    }
}

/// Evaluates every property on `trace`. `truncated` marks verdicts as partial.
pub fn check_trace(trace: &Trace, truncated: bool) -> CheckReport {
    let Some(header) = trace.header() else {
        return CheckReport {
            partial: true,
            verdicts: vec![verdict("trace", Status::Fail, "missing run header", vec![])],
            fairness: None,
        };
    };
    let v = View {
        trace,
        byz: header.byzantine.clone(),
        end: trace.last().map_or(0, |r| r.time),
    };
    let mut verdicts = vec![
        integrity(&v),
        validity(&v),
        agreement(&v),
        chain_linkage(&v),
        no_forgery(&v),
        post_gst_bound(&v, header.gst, header.delta),
        eventual_delivery(&v),
        timeouts_monotone(&v),
        lock_edges(&v),
        timers(&v),
        step_order(&v),
        quarantine(&v),
        termination(&v, header.one_shot, header.target_heights),
        assumption_t(&v),
    ];
    let mut fairness = None;
    if !header.one_shot {
        let report = audit(trace);
        if report.audited.is_empty() {
            verdicts.push(verdict("condition_4", Status::NotApplicable, "no rewarded heights", vec![]));
            verdicts.push(verdict("fairness", Status::NotApplicable, "no rewarded heights", vec![]));
        } else {
            let bad: Vec<u64> = report.audited.iter().filter(|a| !a.holds).map(|a| a.record).collect();
            let all: Vec<u64> = report.audited.iter().map(|a| a.record).collect();
            verdicts.push(safety(
                "condition_4",
                bad,
                all.clone(),
                format!("{} audited heights", report.audited.len()),
                format!("violated at {} of {} audited heights", report.violations.len(), report.audited.len()),
            ));
            let (status, wit) = match &report.verdict {
                FairnessVerdict::Fair => (Status::Fair, all),
                FairnessVerdict::EventuallyFair { from } => (
                    Status::EventuallyFair,
                    report.audited.iter().filter(|a| a.height + 1 == *from).map(|a| a.record).collect(),
                ),
                FairnessVerdict::NotEventuallyFair { first, last } => (
                    Status::NotEventuallyFair,
                    report
                        .audited
                        .iter()
                        .filter(|a| a.height == *first || a.height == *last)
                        .map(|a| a.record)
                        .collect(),
                ),
            };
            verdicts.push(verdict("fairness", status, report.verdict.label(), wit));
        }
        fairness = Some(report);
    }
    CheckReport { partial: truncated, verdicts, fairness }
}

fn integrity(v: &View) -> Verdict {
    let mut seen: BTreeMap<(ProcessId, Height, bool), u64> = BTreeMap::new();
    let (mut bad, mut good) = (Vec::new(), Vec::new());
    for r in v.trace.records() {
        let Some(p) = v.correct(r.process) else { continue };
        let key = match &r.event {
            Event::Decide { height, .. } => (p, *height, true),
            Event::Output { height, .. } => (p, *height, false),
            _ => continue,
        };
        match seen.get(&key) {
            Some(first) => bad.extend([*first, r.id]),
            None => {
                seen.insert(key, r.id);
                good.push(r.id);
            }
        }
    }
    let n = good.len();
    safety("integrity", bad, good, format!("{n} decisions/outputs, none repeated"), "a process decided twice".into())
}

fn validity(v: &View) -> Verdict {
    let mut tips: BTreeMap<(ProcessId, Height), Digest> = BTreeMap::new();
    let (mut bad, mut good) = (Vec::new(), Vec::new());
    for r in v.trace.records() {
        let Some(p) = v.correct(r.process) else { continue };
        match &r.event {
            Event::HeightStart { height, tip, .. } => {
                tips.insert((p, *height), *tip);
            }
            Event::Decide { height, block, .. } | Event::Output { height, block } => {
                let ctx = ChainContext { height: *height, tip: tips.get(&(p, *height)).copied().unwrap_or_default() };
                if is_valid(&Value::Block(block.clone()), &ctx) {
                    good.push(r.id);
                } else {
                    bad.push(r.id);
                }
            }
            _ => {}
        }
    }
    let n = good.len();
    safety("validity", bad, good, format!("{n} blocks valid"), "invalid block decided".into())
}

fn agreement(v: &View) -> Verdict {
    let mut first: BTreeMap<(Height, bool), (Digest, u64)> = BTreeMap::new();
    let (mut bad, mut good) = (Vec::new(), Vec::new());
    for r in v.trace.records() {
        if v.correct(r.process).is_none() {
            continue;
        }
        let (key, block) = match &r.event {
            Event::Decide { height, block, .. } => ((*height, true), block),
            Event::Output { height, block } => ((*height, false), block),
            _ => continue,
        };
        let d = block.digest();
        match first.get(&key) {
            Some((d0, id0)) if *d0 != d => bad.extend([*id0, r.id]),
            Some(_) => good.push(r.id),
            None => {
                first.insert(key, (d, r.id));
                good.push(r.id);
            }
        }
    }
    safety(
        "agreement",
        bad,
        good,
        "correct processes agree at every height".into(),
        "two correct processes decided different blocks".into(),
    )
}

fn chain_linkage(v: &View) -> Verdict {
    let mut chains: BTreeMap<ProcessId, (Vec<Block>, Vec<u64>)> = BTreeMap::new();
    for r in v.trace.records() {
        let Some(p) = v.correct(r.process) else { continue };
        if let Event::Output { block, .. } = &r.event {
            let e = chains.entry(p).or_insert_with(|| (vec![Block::genesis()], Vec::new()));
            e.0.push(block.clone());
            e.1.push(r.id);
        }
    }
    let (mut bad, mut good) = (Vec::new(), Vec::new());
    let mut detail = String::new();
    for (p, (chain, ids)) in &chains {
        match chain_intact(chain) {
            Ok(()) => good.extend(ids.last().copied()),
            Err(e) => {
                detail = format!("{p}: {e}");
                bad.extend(ids.iter().copied());
            }
        }
    }
    if chains.is_empty() {
        return verdict("chain_linkage", Status::NotApplicable, "no outputs", vec![]);
    }
    safety("chain_linkage", bad, good, format!("{} chains intact", chains.len()), detail)
}

fn no_forgery(v: &View) -> Verdict {
    let mut emitted: HashSet<(ProcessId, u64)> = HashSet::new();
    let (mut bad, mut good) = (Vec::new(), Vec::new());
    let mut delivered = 0usize;
    for r in v.trace.records() {
        match &r.event {
            Event::Emit { msg, relay: false, .. } if r.process == Some(msg.signer) => {
                emitted.insert((msg.signer, msg.key()));
            }
            Event::Emit { relay: false, .. } => bad.push(r.id),
            Event::Deliver { msg, .. } => {
                delivered += 1;
                if !emitted.contains(&(msg.signer, msg.key())) {
                    bad.push(r.id);
                }
            }
            Event::Reject { .. } => good.push(r.id),
            _ => {}
        }
    }
    let rejected = good.len();
    safety(
        "no_forgery",
        bad,
        good,
        format!("{delivered} deliveries authenticated, {rejected} forgeries rejected at emission"),
        "delivery without a prior emission by its signer".into(),
    )
}

fn post_gst_bound(v: &View, gst: Option<Time>, delta: u64) -> Verdict {
    let Some(gst) = gst else {
        return verdict("post_gst_bound", Status::NotApplicable, "network never stabilizes", vec![]);
    };
    let (mut bad, mut n) = (Vec::new(), 0usize);
    for r in v.trace.records() {
        let Event::Deliver { from, sent_at, .. } = &r.event else { continue };
        if v.correct(r.process).is_none() || v.byz.contains(from) || *sent_at < gst {
            continue;
        }
        n += 1;
        if r.time - sent_at > delta {
            bad.push(r.id);
        }
    }
    safety(
        "post_gst_bound",
        bad,
        vec![],
        format!("{n} post-stabilization deliveries within {delta}"),
        format!("delivery slower than {delta} after stabilization"),
    )
}

fn eventual_delivery(v: &View) -> Verdict {
    let mut halted: BTreeMap<ProcessId, Time> = BTreeMap::new();
    let mut got: HashSet<(ProcessId, ProcessId, u64, Time)> = HashSet::new();
    for r in v.trace.records() {
        match &r.event {
            Event::Halt => {
                if let Some(p) = r.process {
                    halted.entry(p).or_insert(r.time);
                }
            }
            Event::Deliver { msg, from, sent_at } => {
                if let Some(p) = r.process {
                    got.insert((p, *from, msg.key(), *sent_at));
                }
            }
            _ => {}
        }
    }
    let (mut bad, mut n) = (Vec::new(), 0usize);
    for r in v.trace.records() {
        let Event::Emit { msg, hops, .. } = &r.event else { continue };
        let Some(from) = v.correct(r.process) else { continue };
        for hop in hops {
            if v.byz.contains(&hop.to) {
                continue;
            }
            let Some(at) = hop.at else {
                bad.push(r.id);
                continue;
            };
            if at >= v.end || halted.get(&hop.to).is_some_and(|t| *t <= at) {
                continue;
            }
            n += 1;
            if !got.contains(&(hop.to, from, msg.key(), r.time)) {
                bad.push(r.id);
            }
        }
    }
    safety(
        "eventual_delivery",
        bad,
        vec![],
        format!("{n} correct-to-correct copies due before the end all delivered"),
        "a correct-to-correct copy was lost".into(),
    )
}

fn timeouts_monotone(v: &View) -> Verdict {
    let mut last: BTreeMap<(ProcessId, TimerKind), (u64, u64)> = BTreeMap::new();
    let (mut bad, mut good) = (Vec::new(), Vec::new());
    for r in v.trace.records() {
        let Some(p) = v.correct(r.process) else { continue };
        if let Event::Timeout { timer, value, .. } = &r.event {
            if let Some((prev, id)) = last.get(&(p, *timer)) {
                if value < prev {
                    bad.extend([*id, r.id]);
                }
            }
            last.insert((p, *timer), (*value, r.id));
            good.push(r.id);
        }
    }
    let n = good.len();
    safety("timeouts_monotone", bad, good, format!("{n} timeout changes, all increases"), "a timeout decreased".into())
}

fn lock_edges(v: &View) -> Verdict {
    let (mut bad, mut good) = (Vec::new(), Vec::new());
    for r in v.trace.records() {
        if v.correct(r.process).is_none() {
            continue;
        }
        let Event::Lock { round, locked, llr, cause, .. } = &r.event else { continue };
        let ok = match cause {
            LockCause::Polc => locked.is_some() && *llr == *round as i64,
            LockCause::NilPolc => locked.is_none() && *llr == -1,
            LockCause::ProposalUnlock => locked.is_none(),
        };
        if ok {
            good.push(r.id);
        } else {
            bad.push(r.id);
        }
    }
    let n = good.len();
    safety("lock_edges", bad, good, format!("{n} lock transitions on legal edges"), "illegal lock transition".into())
}

fn timers(v: &View) -> Verdict {
    let mut set: BTreeMap<(ProcessId, TimerKind, Height, u64), Time> = BTreeMap::new();
    let (mut bad, mut n) = (Vec::new(), 0usize);
    for r in v.trace.records() {
        let Some(p) = v.correct(r.process) else { continue };
        match &r.event {
            Event::TimerSet { timer, height, gen, fires_at, .. } => {
                set.insert((p, *timer, *height, *gen), *fires_at);
            }
            Event::TimerFired { timer, height, gen, .. } => {
                n += 1;
                if set.get(&(p, *timer, *height, *gen)) != Some(&r.time) {
                    bad.push(r.id);
                }
            }
            _ => {}
        }
    }
    safety("timers", bad, vec![], format!("{n} expiries at their set time"), "timer fired off schedule".into())
}

fn step_order(v: &View) -> Verdict {
    let rank = |s: &Step| match s {
        Step::Propose => 0,
        Step::Prevote => 1,
        Step::Precommit => 2,
        Step::Decided => 3,
    };
    let mut cur: BTreeMap<ProcessId, (Height, Round, u8)> = BTreeMap::new();
    let mut bad = Vec::new();
    for r in v.trace.records() {
        let Some(p) = v.correct(r.process) else { continue };
        let Event::Step { height, round, step } = &r.event else { continue };
        let now = (*height, *round, rank(step));
        if let Some(prev) = cur.get(&p) {
            if now <= *prev {
                bad.push(r.id);
            }
        }
        cur.insert(p, now);
    }
    safety(
        "step_order",
        bad,
        vec![],
        "steps advance monotonically in (height, round, step)".into(),
        "step regressed".into(),
    )
}

fn quarantine(v: &View) -> Verdict {
    let (mut bad, mut good) = (Vec::new(), Vec::new());
    for r in v.trace.records() {
        if let Event::Evidence { msg } = &r.event {
            if v.byz.contains(&msg.signer) {
                good.push(r.id);
            } else {
                bad.push(r.id);
            }
        }
    }
    let n = good.len();
    safety(
        "quarantine",
        bad,
        good,
        format!("{n} quarantined messages, all from faulty signers"),
        "a correct signer's message was quarantined".into(),
    )
}

fn termination(v: &View, one_shot: bool, target: Option<u64>) -> Verdict {
    let mut validators: BTreeMap<ProcessId, Vec<ProcessId>> = BTreeMap::new();
    let mut decided: BTreeMap<ProcessId, u64> = BTreeMap::new();
    let mut outputs: BTreeMap<ProcessId, (u64, u64)> = BTreeMap::new();
    let mut correct: BTreeSet<ProcessId> = BTreeSet::new();
    for r in v.trace.records() {
        let Some(p) = v.correct(r.process) else { continue };
        correct.insert(p);
        match &r.event {
            Event::HeightStart { height: 1, validators: vs, .. } => {
                validators.insert(p, vs.clone());
            }
            Event::Decide { height: 1, .. } => {
                decided.entry(p).or_insert(r.id);
            }
            Event::Output { .. } => {
                let e = outputs.entry(p).or_insert((0, r.id));
                e.0 += 1;
                e.1 = r.id;
            }
            _ => {}
        }
    }
    if one_shot {
        let deciders: Vec<ProcessId> = correct
            .iter()
            .copied()
            .filter(|p| validators.get(p).is_some_and(|vs| vs.contains(p)))
            .collect();
        let missing: Vec<String> = deciders.iter().filter(|p| !decided.contains_key(p)).map(|p| p.to_string()).collect();
        let wit: Vec<u64> = decided.values().copied().collect();
        return if missing.is_empty() {
            verdict("termination", Status::Pass, format!("{} correct validators decided", deciders.len()), wit)
        } else {
            verdict("termination", Status::Fail, format!("undecided: {}", missing.join(",")), wit)
        };
    }
    let Some(target) = target else {
        return verdict("termination", Status::NotApplicable, "no height horizon", vec![]);
    };
    let short: Vec<String> = correct
        .iter()
        .filter(|p| outputs.get(p).map_or(0, |o| o.0) < target)
        .map(|p| p.to_string())
        .collect();
    let wit: Vec<u64> = outputs.values().map(|o| o.1).collect();
    if short.is_empty() {
        verdict("termination", Status::Pass, format!("every correct process output {target} blocks"), wit)
    } else {
        verdict("termination", Status::Fail, format!("below {target} outputs: {}", short.join(",")), wit)
    }
}

fn assumption_t(v: &View) -> Verdict {
    let checks = round_checks(v.trace);
    match checks.iter().find(|c| c.satisfied) {
        Some(c) => verdict(
            "assumption_t",
            Status::Present,
            format!("height {} round {} proposer {}", c.height, c.round, c.proposer),
            vec![c.record],
        ),
        None => verdict(
            "assumption_t",
            Status::Absent,
            format!("{} rounds examined, none satisfying", checks.len()),
            checks.iter().map(|c| c.record).collect(),
        ),
    }
}
