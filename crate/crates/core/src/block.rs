//! Block hashing, validity against a chain prefix, and the mempool stub.

use std::collections::BTreeSet;

use sha2::{Digest as _, Sha256};

use crate::types::{Block, Digest, Height, ProcessId, TxId, Value};

pub const MAX_PAYLOAD: usize = 64;

pub fn hash_block(b: &Block) -> Digest {
    let mut h = Sha256::new();
    h.update(b"block/v1");
    h.update(b.height.to_le_bytes());
    h.update(b.parent.0);
    h.update((b.payload.len() as u64).to_le_bytes());
    for tx in &b.payload {
        h.update(tx.0.to_le_bytes());
    }
    h.update((b.last_commit.len() as u64).to_le_bytes());
    for p in &b.last_commit {
        h.update(p.0.to_le_bytes());
    }
    Digest(h.finalize().into())
}

/// The tip a candidate block must extend.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainContext {
    pub height: Height,
    pub tip: Digest,
}

impl ChainContext {
    pub fn after(chain: &[Block]) -> ChainContext {
        let tip = chain.last().expect("chain always holds genesis");
        ChainContext { height: tip.height + 1, tip: tip.digest() }
    }
}

pub fn payload_well_formed(payload: &[TxId]) -> bool {
    payload.len() <= MAX_PAYLOAD
        && payload.iter().all(|t| t.0 != 0)
        && payload.windows(2).all(|w| w[0] < w[1])
}

pub fn is_valid(v: &Value, ctx: &ChainContext) -> bool {
    match v {
        Value::Block(b) => b.height == ctx.height && b.parent == ctx.tip && payload_well_formed(&b.payload),
        Value::Nil | Value::Bottom => false,
    }
}

/// Checks heights, parent links and payloads from genesis onwards.
pub fn chain_intact(chain: &[Block]) -> Result<(), String> {
    match chain.first() {
        Some(g) if *g == Block::genesis() => {}
        _ => return Err("chain does not start at genesis".into()),
    }
    for i in 1..chain.len() {
        let ctx = ChainContext::after(&chain[..i]);
        if !is_valid(&Value::Block(chain[i].clone()), &ctx) {
            return Err(format!("block at index {i} does not extend its predecessor"));
        }
    }
    Ok(())
}

/// Deterministic synthetic transaction source, one draw per (height, proposer).
#[derive(Clone, Debug)]
pub struct Mempool {
    pub seed: u64,
    pub per_block: usize,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl Mempool {
    pub fn new(seed: u64) -> Self {
        Mempool { seed, per_block: 3 }
    }

    pub fn take(&self, height: Height, proposer: ProcessId) -> Vec<TxId> {
        let base = self.seed ^ height.rotate_left(32) ^ (proposer.0 as u64).rotate_left(16);
        let mut txs: Vec<TxId> = (0..self.per_block as u64)
            .map(|k| TxId(splitmix(base.wrapping_add(k)) | 1))
            .collect();
        txs.sort();
        txs.dedup();
        txs
    }
}

/// Builds a block extending `chain`, carrying `signature` as its last-commit set.
pub fn create_new_block(
    signature: &BTreeSet<ProcessId>,
    mempool: &Mempool,
    chain: &[Block],
    proposer: ProcessId,
) -> Block {
    let ctx = ChainContext::after(chain);
    Block {
        height: ctx.height,
        parent: ctx.tip,
        payload: mempool.take(ctx.height, proposer),
        last_commit: signature.clone(),
    }
}
