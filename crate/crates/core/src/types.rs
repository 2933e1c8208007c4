//! Identifiers, blocks, values and wire messages shared by every layer.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

pub type Height = u64;
pub type Round = u64;
/// Simulator time in integer ticks.
pub type Time = u64;

/// A process in the run roster. Indices start at 1 so that `p1` prints as `p1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProcessId(pub u32);

impl ProcessId {
    pub fn roster(count: usize) -> Vec<ProcessId> {
        (1..=count as u32).map(ProcessId).collect()
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// SHA-256 content digest.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_hex(s: &str) -> Option<Digest> {
        if s.len() != 64 {
            return None;
        }
        let mut out = [0u8; 32];
        for (i, chunk) in s.as_bytes().chunks(2).enumerate() {
            let hi = (chunk[0] as char).to_digit(16)?;
            let lo = (chunk[1] as char).to_digit(16)?;
            out[i] = (hi * 16 + lo) as u8;
        }
        Some(Digest(out))
    }

    pub fn short(&self) -> String {
        self.to_hex()[..8].to_string()
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.short())
    }
}

impl Serialize for Digest {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Digest::from_hex(&s).ok_or_else(|| serde::de::Error::custom("expected 64 hex chars"))
    }
}

/// Opaque transaction id drawn from the per-run mempool stub.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TxId(pub u64);

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Block {
    pub height: Height,
    pub parent: Digest,
    pub payload: Vec<TxId>,
    /// Signers of the previous block as seen by the proposer; doubles as its reward set.
    pub last_commit: BTreeSet<ProcessId>,
}

impl Block {
    pub fn genesis() -> Block {
        Block {
            height: 0,
            parent: Digest::default(),
            payload: Vec::new(),
            last_commit: BTreeSet::new(),
        }
    }

    pub fn digest(&self) -> Digest {
        crate::block::hash_block(self)
    }
}

/// What a vote or proposal carries.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    Block(Block),
    Nil,
    Bottom,
}

impl Value {
    pub fn as_block(&self) -> Option<&Block> {
        match self {
            Value::Block(b) => Some(b),
            _ => None,
        }
    }

    pub fn is_nil(&self) -> bool {
        matches!(self, Value::Nil)
    }

    pub fn label(&self) -> String {
        match self {
            Value::Block(b) => format!("block@{}#{}", b.height, b.digest().short()),
            Value::Nil => "nil".into(),
            Value::Bottom => "bottom".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MsgKind {
    Propose,
    Prevote,
    Precommit,
    Commit,
}

/// A signed consensus message. The signer is a provenance tag enforced by the simulator.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    pub kind: MsgKind,
    pub signer: ProcessId,
    pub height: Height,
    /// Zero for COMMIT.
    pub round: Round,
    pub value: Value,
    /// PROPOSE only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polc_round: Option<Round>,
    /// PREVOTE only: sender's last locked round, -1 when unlocked. Carried, never read.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub llr: Option<i64>,
    /// COMMIT only: validators whose votes at this height the committer delivered.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attests: Option<BTreeSet<ProcessId>>,
}

impl Message {
    pub fn propose(signer: ProcessId, height: Height, round: Round, block: Value, polc: Option<Round>) -> Self {
        Message {
            kind: MsgKind::Propose,
            signer,
            height,
            round,
            value: block,
            polc_round: polc,
            llr: None,
            attests: None,
        }
    }

    pub fn prevote(signer: ProcessId, height: Height, round: Round, value: Value, llr: i64) -> Self {
        Message {
            kind: MsgKind::Prevote,
            signer,
            height,
            round,
            value,
            polc_round: None,
            llr: Some(llr),
            attests: None,
        }
    }

    pub fn precommit(signer: ProcessId, height: Height, round: Round, value: Value) -> Self {
        Message {
            kind: MsgKind::Precommit,
            signer,
            height,
            round,
            value,
            polc_round: None,
            llr: None,
            attests: None,
        }
    }

    pub fn commit(signer: ProcessId, height: Height, block: Block, attests: BTreeSet<ProcessId>) -> Self {
        Message {
            kind: MsgKind::Commit,
            signer,
            height,
            round: 0,
            value: Value::Block(block),
            polc_round: None,
            llr: None,
            attests: Some(attests),
        }
    }

    /// Stable 64-bit key used for provenance and duplicate tracking.
    pub fn key(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.hash(&mut h);
        h.finish()
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}({}, H{}", self.kind, self.signer, self.height)?;
        if self.kind != MsgKind::Commit {
            write!(f, " r{}", self.round)?;
        }
        write!(f, ", {}", self.value.label())?;
        if let Some(p) = self.polc_round {
            write!(f, ", polc {p}")?;
        }
        write!(f, ")")
    }
}
