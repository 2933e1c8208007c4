//! Vote thresholds and per-(height, round, kind) vote sets.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::types::{Block, Height, Message, MsgKind, ProcessId, Round, Value};

/// Strictly more than two thirds of `n`.
pub fn quorum(n: usize) -> usize {
    2 * n / 3 + 1
}

/// Strictly more than one third of `n`.
pub fn one_third(n: usize) -> usize {
    n / 3 + 1
}

/// Largest fault count the thresholds tolerate.
pub fn max_faults(n: usize) -> usize {
    n.saturating_sub(1) / 3
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VoteError {
    #[error("vote set mixes (height, round, kind) tuples")]
    Mixed,
}

fn same_slot(votes: &[&Message]) -> Result<(), VoteError> {
    if let Some(first) = votes.first() {
        let slot = (first.height, first.round, first.kind);
        if votes.iter().any(|m| (m.height, m.round, m.kind) != slot) {
            return Err(VoteError::Mixed);
        }
    }
    Ok(())
}

/// Counts distinct signers voting `value`; the first message per signer wins.
fn distinct_for(value: &Value, votes: &[&Message]) -> usize {
    let mut first: BTreeMap<ProcessId, &Value> = BTreeMap::new();
    for m in votes {
        first.entry(m.signer).or_insert(&m.value);
    }
    first.values().filter(|v| **v == value).count()
}

/// True iff at least `quorum(n)` distinct signers carry `value`.
pub fn is_23_maj(value: &Value, votes: &[&Message], n: usize) -> Result<bool, VoteError> {
    same_slot(votes)?;
    Ok(distinct_for(value, votes) >= quorum(n))
}

/// True iff at least `one_third(n)` distinct signers committed `block`.
pub fn at_least_one_third(block: &Block, commits: &[&Message], n: usize) -> Result<bool, VoteError> {
    same_slot(commits)?;
    Ok(distinct_for(&Value::Block(block.clone()), commits) >= one_third(n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Insert {
    /// First message from this signer; now retained.
    Retained,
    /// Byte-identical copy of the retained message.
    Duplicate,
    /// Conflicts with the retained message; logged as evidence, never counted.
    Equivocation,
}

/// Messages for a single (height, round, kind), first message per signer retained.
#[derive(Debug, Clone)]
pub struct VoteSet {
    pub height: Height,
    pub round: Round,
    pub kind: MsgKind,
    retained: BTreeMap<ProcessId, Message>,
    evidence: Vec<Message>,
}

impl VoteSet {
    pub fn new(height: Height, round: Round, kind: MsgKind) -> Self {
        VoteSet { height, round, kind, retained: BTreeMap::new(), evidence: Vec::new() }
    }

    /// # Panics
    /// If `msg` belongs to another slot; callers route by slot first.
    pub fn insert(&mut self, msg: &Message) -> Insert {
        assert_eq!(
            (msg.height, msg.round, msg.kind),
            (self.height, self.round, self.kind),
            "message routed to the wrong vote set"
        );
        match self.retained.get(&msg.signer) {
            None => {
                self.retained.insert(msg.signer, msg.clone());
                Insert::Retained
            }
            Some(kept) if kept == msg => Insert::Duplicate,
            Some(_) => {
                if !self.evidence.contains(msg) {
                    self.evidence.push(msg.clone());
                }
                Insert::Equivocation
            }
        }
    }

    pub fn len(&self) -> usize {
        self.retained.len()
    }

    pub fn is_empty(&self) -> bool {
        self.retained.is_empty()
    }

    pub fn count(&self, value: &Value) -> usize {
        self.retained.values().filter(|m| &m.value == value).count()
    }

    pub fn has_quorum_for(&self, value: &Value, n: usize) -> bool {
        self.count(value) >= quorum(n)
    }

    /// The block, if any, holding a quorum. At most one can when fewer than n/3 signers equivocate.
    pub fn quorum_block(&self, n: usize) -> Option<&Block> {
        let mut tally: BTreeMap<crate::types::Digest, (usize, &Block)> = BTreeMap::new();
        for m in self.retained.values() {
            if let Value::Block(b) = &m.value {
                tally.entry(b.digest()).or_insert((0, b)).0 += 1;
            }
        }
        tally.into_values().find(|(c, _)| *c >= quorum(n)).map(|(_, b)| b)
    }

    pub fn signers(&self) -> impl Iterator<Item = ProcessId> + '_ {
        self.retained.keys().copied()
    }

    pub fn messages(&self) -> impl Iterator<Item = &Message> {
        self.retained.values()
    }

    pub fn get(&self, signer: ProcessId) -> Option<&Message> {
        self.retained.get(&signer)
    }

    pub fn evidence(&self) -> &[Message] {
        &self.evidence
    }
}
