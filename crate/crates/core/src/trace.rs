//! Append-only run trace, serialized as JSON Lines.

use std::collections::BTreeSet;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::oneshot::{LockCause, Step, TimerKind};
use crate::types::{Block, Digest, Height, Message, ProcessId, Round, Time};

pub const TRACE_VERSION: u32 = 1;

/// Run parameters every checker needs, written as the first record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub version: u32,
    pub name: String,
    pub seed: u64,
    pub roster: Vec<ProcessId>,
    pub byzantine: BTreeSet<ProcessId>,
    pub f: usize,
    /// `None` when the network never stabilizes.
    pub gst: Option<Time>,
    pub delta: u64,
    pub max_pre_gst: u64,
    pub one_shot: bool,
    /// Output length every correct process must reach for bounded termination.
    pub target_heights: Option<u64>,
    pub proposer_offset: usize,
    pub tail_window: u64,
}

/// One planned delivery of an emitted message.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hop {
    pub to: ProcessId,
    /// `None` when the adversary dropped the copy.
    pub at: Option<Time>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    Start(RunHeader),
    /// A message leaves `process`. `relay` is false only for the signer's own emission.
    Emit { msg: Message, relay: bool, hops: Vec<Hop> },
    Deliver { msg: Message, from: ProcessId, sent_at: Time },
    Reject { msg: Message, reason: String },
    TimerSet { timer: TimerKind, height: Height, round: Round, gen: u64, fires_at: Time },
    TimerFired { timer: TimerKind, height: Height, round: Round, gen: u64 },
    HeightStart { height: Height, validators: Vec<ProcessId>, tip: Digest },
    Step { height: Height, round: Round, step: Step },
    RoundEntry { height: Height, round: Round, locked: Option<Digest>, llr: i64, left_polcr: Option<Round>, jump: bool },
    Lock { height: Height, round: Round, locked: Option<Digest>, llr: i64, cause: LockCause },
    Timeout { height: Height, timer: TimerKind, value: u64 },
    Evidence { msg: Message },
    Decide { height: Height, round: Round, block: Block },
    Output { height: Height, block: Block },
    /// Rewards carried by the block output at `height`, for `rewarded_height`.
    Reward { height: Height, rewarded_height: Height, rewarded: BTreeSet<ProcessId> },
    Halt,
    End { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub id: u64,
    pub time: Time,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub process: Option<ProcessId>,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Clone, Debug, Default)]
pub struct Trace {
    records: Vec<TraceRecord>,
}

impl Trace {
    pub fn new() -> Self {
        Trace::default()
    }

    pub fn push(&mut self, time: Time, process: Option<ProcessId>, event: Event) -> u64 {
        let id = self.records.len() as u64;
        self.records.push(TraceRecord { id, time, process, event });
        id
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn header(&self) -> Option<&RunHeader> {
        match self.records.first().map(|r| &r.event) {
            Some(Event::Start(h)) => Some(h),
            _ => None,
        }
    }

    pub fn from_records(records: Vec<TraceRecord>) -> Self {
        Trace { records }
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    /// Parses a JSONL trace. A malformed final line is reported as truncation.
    pub fn read_jsonl<R: BufRead>(r: R) -> Result<(Trace, bool), String> {
        let lines: Vec<String> = r.lines().collect::<Result<_, _>>().map_err(|e| e.to_string())?;
        let mut records = Vec::with_capacity(lines.len());
        let mut truncated = false;
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<TraceRecord>(line) {
                Ok(rec) => records.push(rec),
                Err(_) if i + 1 == lines.len() => truncated = true,
                Err(e) => return Err(format!("line {}: {e}", i + 1)),
            }
        }
        let trace = Trace { records };
        if !matches!(trace.last().map(|r| &r.event), Some(Event::End { .. })) {
            truncated = true;
        }
        Ok((trace, truncated))
    }
}
