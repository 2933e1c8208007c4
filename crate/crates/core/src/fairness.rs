//! Reward mechanisms applied by the height driver, and the post-hoc fairness audit.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::trace::{Event, Trace};
use crate::types::{Height, Message, ProcessId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    /// Reward the commit signers seen before the commit timer expired; fixed timer.
    #[default]
    Original,
    /// As `Original`, but the commit timer grows while commits go missing.
    Modulable,
    /// As `Modulable`, and a signer counts only if f+1 commits attest it.
    ModulableF1Filter,
    /// Fixed timer; the block at H rewards height H-x.
    Delayed { x: u64 },
}

impl Mechanism {
    pub fn label(&self) -> String {
        match self {
            Mechanism::Original => "original".into(),
            Mechanism::Modulable => "modulable".into(),
            Mechanism::ModulableF1Filter => "modulable_f1_filter".into(),
            Mechanism::Delayed { x } => format!("delayed_{x}"),
        }
    }

    /// How many heights back a block's reward set refers to.
    pub fn lag(&self) -> u64 {
        match self {
            Mechanism::Delayed { x } => *x,
            _ => 1,
        }
    }

    pub fn rewarded_height(&self, height: Height) -> Option<Height> {
        height.checked_sub(self.lag()).filter(|h| *h >= 1)
    }

    pub fn next_timeout(&self, current: u64, commits_seen: usize, n: usize) -> u64 {
        match self {
            Mechanism::Modulable | Mechanism::ModulableF1Filter => {
                modulable_timeout_update(current, commits_seen, n)
            }
            Mechanism::Original | Mechanism::Delayed { .. } => current,
        }
    }

    /// The reward set a validator puts into its candidate block for `height`.
    pub fn signature(
        &self,
        height: Height,
        to_reward: &BTreeMap<Height, BTreeSet<ProcessId>>,
        commits: &BTreeMap<Height, BTreeMap<ProcessId, Message>>,
        f: usize,
    ) -> BTreeSet<ProcessId> {
        let Some(h) = self.rewarded_height(height) else { return BTreeSet::new() };
        let seen = to_reward.get(&h).cloned().unwrap_or_default();
        match self {
            Mechanism::ModulableF1Filter => {
                let attested = commits
                    .get(&h)
                    .map(|c| f1_commit_filter(c.values(), f))
                    .unwrap_or_default();
                seen.intersection(&attested).copied().collect()
            }
            _ => seen,
        }
    }
}

/// One unit longer whenever fewer than `n` commits arrived before expiry.
pub fn modulable_timeout_update(timeout: u64, commits_seen: usize, n: usize) -> u64 {
    if commits_seen < n {
        timeout + 1
    } else {
        timeout
    }
}

/// Processes named by at least f+1 distinct committers.
pub fn f1_commit_filter<'a>(commits: impl IntoIterator<Item = &'a Message>, f: usize) -> BTreeSet<ProcessId> {
    let mut by: BTreeMap<ProcessId, BTreeSet<ProcessId>> = BTreeMap::new();
    for c in commits {
        for p in c.attests.iter().flatten() {
            by.entry(*p).or_default().insert(c.signer);
        }
    }
    by.into_iter().filter(|(_, s)| s.len() > f).map(|(p, _)| p).collect()
}

/// Reward parameter per process: 1 exactly for correct validators of the height.
pub fn ground_truth(
    roster: &[ProcessId],
    validators: &[ProcessId],
    byzantine: &BTreeSet<ProcessId>,
) -> BTreeMap<ProcessId, u8> {
    roster
        .iter()
        .map(|p| (*p, u8::from(validators.contains(p) && !byzantine.contains(p))))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING-KEBAB-CASE")]
pub enum FairnessVerdict {
    Fair,
    EventuallyFair { from: Height },
    NotEventuallyFair { first: Height, last: Height },
}

impl FairnessVerdict {
    pub fn label(&self) -> String {
        match self {
            FairnessVerdict::Fair => "FAIR".into(),
            FairnessVerdict::EventuallyFair { from } => format!("EVENTUALLY-FAIR({from})"),
            FairnessVerdict::NotEventuallyFair { first, last } => {
                format!("NOT-EVENTUALLY-FAIR(first {first}, last {last})")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeightAudit {
    pub height: Height,
    pub expected: BTreeSet<ProcessId>,
    pub rewarded: BTreeSet<ProcessId>,
    pub holds: bool,
    /// Trace id of the reward record.
    pub record: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub audited: Vec<HeightAudit>,
    pub violations: Vec<Height>,
    pub horizon: Height,
    pub tail_window: u64,
    pub verdict: FairnessVerdict,
}

impl AuditReport {
    pub fn at(&self, height: Height) -> Option<&HeightAudit> {
        self.audited.iter().find(|a| a.height == height)
    }
}

/// Classifies a violation list against a horizon with a bounded tail check.
pub fn classify(violations: &[Height], horizon: Height, tail_window: u64) -> FairnessVerdict {
    match (violations.first(), violations.last()) {
        (Some(&first), Some(&last)) => {
            if last + 1 < horizon.saturating_sub(tail_window) {
                FairnessVerdict::EventuallyFair { from: last + 1 }
            } else {
                FairnessVerdict::NotEventuallyFair { first, last }
            }
        }
        _ => FairnessVerdict::Fair,
    }
}

/// Checks that rewards match parameters at every height a block distributed rewards for.
pub fn audit(trace: &Trace) -> AuditReport {
    let header = trace.header().cloned();
    let (roster, byz, tail) = match &header {
        Some(h) => (h.roster.clone(), h.byzantine.clone(), h.tail_window),
        None => (Vec::new(), BTreeSet::new(), 10),
    };
    let correct = |p: &Option<ProcessId>| p.is_some_and(|p| !byz.contains(&p));

    let mut validators: BTreeMap<Height, Vec<ProcessId>> = BTreeMap::new();
    let mut rewards: BTreeMap<Height, (BTreeSet<ProcessId>, u64)> = BTreeMap::new();
    for rec in trace.records() {
        if !correct(&rec.process) {
            continue;
        }
        match &rec.event {
            Event::HeightStart { height, validators: v, .. } => {
                validators.entry(*height).or_insert_with(|| v.clone());
            }
            Event::Reward { rewarded_height, rewarded, .. } => {
                rewards.entry(*rewarded_height).or_insert_with(|| (rewarded.clone(), rec.id));
            }
            _ => {}
        }
    }

    let mut audited = Vec::new();
    for (h, (rewarded, record)) in rewards {
        let v = validators.get(&h).cloned().unwrap_or_default();
        let expected: BTreeSet<ProcessId> = ground_truth(&roster, &v, &byz)
            .into_iter()
            .filter(|(_, bit)| *bit == 1)
            .map(|(p, _)| p)
            .collect();
        let holds = expected == rewarded;
        audited.push(HeightAudit { height: h, expected, rewarded, holds, record });
    }
    let violations: Vec<Height> = audited.iter().filter(|a| !a.holds).map(|a| a.height).collect();
    let horizon = audited.last().map_or(0, |a| a.height);
    let verdict = classify(&violations, horizon, tail);
    AuditReport { audited, violations, horizon, tail_window: tail, verdict }
}
