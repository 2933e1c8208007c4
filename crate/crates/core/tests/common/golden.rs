//! Expected per-round states and vote counts for the two scripted height-1 scenarios.

use tendermint_sim::trace::Trace;
use tendermint_sim::types::{Block, Digest, Value};

use super::*;

/// Lock cell of a state table: unlocked, or locked on a named block at a round.
#[derive(Clone, Copy, Debug)]
pub enum Cell {
    Free,
    On(&'static str, i64),
}

fn digest_of(name: &str, blocks: &[(&'static str, Block)]) -> Digest {
    blocks.iter().find(|(n, _)| *n == name).map(|(_, b)| b.digest()).expect("named block")
}

fn cell_matches(cell: Cell, locked: Option<Digest>, llr: i64, blocks: &[(&'static str, Block)]) -> bool {
    match cell {
        Cell::Free => locked.is_none(),
        Cell::On(name, round) => locked == Some(digest_of(name, blocks)) && llr == round,
    }
}

fn expect(ok: bool, what: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what)
    }
}

/// (round, p2, p3) at the end of each round of the lock-split schedule; p1 decides B in round 1.
pub const SPLIT_TABLE: [(Round, Cell, Cell); 5] = [
    (1, Cell::On("B", 1), Cell::Free),
    (2, Cell::On("B", 1), Cell::On("B", 2)),
    (3, Cell::Free, Cell::On("B", 2)),
    (4, Cell::Free, Cell::Free),
    (5, Cell::Free, Cell::Free),
];

/// Checks the legacy run: tables for rounds 1 to 5, then p2 decides B' in round 6 while p3 locks it.
pub fn split_legacy(trace: &Trace) -> Result<(), String> {
    let b = proposal(trace, 1).ok_or("no round-1 proposal")?;
    let b2 = proposal(trace, 6).ok_or("no round-6 proposal")?;
    expect(b != b2, "B' must differ from B".into())?;
    let blocks = [("B", b.clone()), ("B'", b2.clone())];
    expect(decision(trace, 1) == Some((1, b.clone())), "p1 decides B in round 1".into())?;
    let ends = end_of_round(trace);
    for (round, p2, p3) in SPLIT_TABLE {
        for (p, cell) in [(2, p2), (3, p3)] {
            let s = ends.get(&(p, round)).ok_or(format!("p{p} never left round {round}"))?;
            expect(cell_matches(cell, s.locked, s.llr, &blocks), format!("round {round}: p{p} is {s:?}, expected {cell:?}"))?;
        }
    }
    expect(decision(trace, 2) == Some((6, b2.clone())), "p2 decides B' in round 6".into())?;
    let (locked, llr) = last_lock(trace, 3).ok_or("p3 never locked")?;
    expect(cell_matches(Cell::On("B'", 6), locked, llr, &blocks), format!("p3 ends locked on {locked:?} at {llr}"))?;
    expect(decision(trace, 3).is_none(), "p3 stays undecided".into())
}

/// The corrected rule keeps p2 on B, which it decides.
pub fn split_corrected(trace: &Trace) -> Result<(), String> {
    let b = proposal(trace, 1).ok_or("no round-1 proposal")?;
    for p in 1..=3 {
        if let Some((_, d)) = decision(trace, p) {
            expect(d == b, format!("p{p} decided a block other than B"))?;
        }
    }
    expect(decision(trace, 2).is_some_and(|(_, d)| d == b), "p2 decides B".into())
}

/// (round, process, prevote quorum for the named block at precommit entry).
pub const SPLIT_PREVOTE_QUORUMS: [(Round, u32, &str, bool); 12] = [
    (1, 1, "B", true),
    (1, 2, "B", true),
    (1, 3, "B", false),
    (2, 2, "B", false),
    (2, 3, "B", true),
    (3, 2, "B", false),
    (3, 3, "B", false),
    (4, 2, "B", false),
    (4, 3, "B", false),
    (6, 2, "B'", true),
    (6, 3, "B'", true),
    (5, 2, "nil", false),
];

/// (round, process, block, precommit quorum, at least one third) over precommits delivered in the round.
pub const SPLIT_PRECOMMITS: [(Round, u32, &str, bool, bool); 5] = [
    (1, 1, "B", true, true),
    (1, 2, "B", false, true),
    (1, 3, "B", false, true),
    (6, 2, "B'", true, true),
    (6, 3, "B'", false, true),
];

pub fn split_vote_counts(trace: &Trace) -> Result<(), String> {
    let b = proposal(trace, 1).ok_or("no round-1 proposal")?;
    let b2 = proposal(trace, 6).ok_or("no round-6 proposal")?;
    let value = |name: &str| match name {
        "B" => Value::Block(b.clone()),
        "B'" => Value::Block(b2.clone()),
        _ => Value::Nil,
    };
    for (round, p, name, want) in SPLIT_PREVOTE_QUORUMS {
        let got = prevote_quorum_at_precommit(trace, p, round, &value(name));
        expect(got == want, format!("round {round}: p{p} prevote quorum for {name} is {got}, expected {want}"))?;
    }
    for (round, p, name, want_maj, want_third) in SPLIT_PRECOMMITS {
        let votes = precommits_in_round(trace, p, round);
        let v = value(name);
        let block = v.as_block().expect("block");
        let (m, t) = (maj(&v, &votes, 4), third(block, &votes, 4));
        expect(
            (m, t) == (want_maj, want_third),
            format!("round {round}: p{p} precommits for {name} give ({m}, {t}), expected ({want_maj}, {want_third})"),
        )?;
    }
    Ok(())
}

/// (round, p1, p2, p3, PoLCR) at the end of each tabulated livelock round.
pub const LIVELOCK_TABLE: [(Round, Cell, Cell, Cell, Option<Round>); 6] = [
    (1, Cell::On("v1", 1), Cell::Free, Cell::Free, None),
    (2, Cell::On("v1", 1), Cell::Free, Cell::Free, None),
    (3, Cell::On("v1", 1), Cell::Free, Cell::On("v3", 3), None),
    (5, Cell::On("v1", 5), Cell::Free, Cell::On("v3", 3), Some(1)),
    (6, Cell::On("v1", 5), Cell::Free, Cell::On("v3", 3), Some(1)),
    (7, Cell::On("v1", 5), Cell::Free, Cell::On("v3", 7), Some(3)),
];

pub fn livelock_tables(trace: &Trace) -> Result<(), String> {
    let v1 = proposal(trace, 1).ok_or("no round-1 proposal")?;
    let v3 = proposal(trace, 3).ok_or("no round-3 proposal")?;
    let blocks = [("v1", v1), ("v3", v3)];
    let ends = end_of_round(trace);
    for (round, p1, p2, p3, polcr) in LIVELOCK_TABLE {
        for (p, cell) in [(1, p1), (2, p2), (3, p3)] {
            let s = ends.get(&(p, round)).ok_or(format!("p{p} never left round {round}"))?;
            expect(cell_matches(cell, s.locked, s.llr, &blocks), format!("round {round}: p{p} is {s:?}, expected {cell:?}"))?;
            if matches!(cell, Cell::Free) {
                expect(s.llr == -1, format!("round {round}: p{p} has llr {} while unlocked", s.llr))?;
            }
            // Round 1 precedes the first proposal that carries a lock round.
            if round > 1 {
                expect(s.polcr == polcr, format!("round {round}: p{p} PoLCR {:?}, expected {polcr:?}", s.polcr))?;
            }
        }
    }
    Ok(())
}

/// (round, process, prevote quorum for the named block at precommit entry).
pub const LIVELOCK_PREVOTE_QUORUMS: [(Round, u32, &str, bool); 15] = [
    (1, 1, "v1", true),
    (1, 2, "v1", false),
    (1, 3, "v1", false),
    (2, 1, "v2", false),
    (2, 2, "v2", false),
    (2, 3, "v2", false),
    (3, 1, "v3", false),
    (3, 2, "v3", false),
    (3, 3, "v3", true),
    (5, 1, "v1", true),
    (5, 2, "v1", false),
    (5, 3, "v1", false),
    (7, 1, "v3", false),
    (7, 2, "v3", false),
    (7, 3, "v3", true),
];

pub fn livelock_vote_counts(trace: &Trace) -> Result<(), String> {
    let block = |r: Round| proposal(trace, r).map(Value::Block).ok_or(format!("no round-{r} proposal"));
    let named = [("v1", block(1)?), ("v2", block(2)?), ("v3", block(3)?)];
    for (round, p, name, want) in LIVELOCK_PREVOTE_QUORUMS {
        let v = &named.iter().find(|(n, _)| *n == name).expect("named").1;
        let got = prevote_quorum_at_precommit(trace, p, round, v);
        expect(got == want, format!("round {round}: p{p} prevote quorum for {name} is {got}, expected {want}"))?;
    }
    for round in 1..=7 {
        for p in 1..=3 {
            let votes = precommits_in_round(trace, p, round);
            for (name, v) in &named {
                expect(!maj(v, &votes, 4), format!("round {round}: p{p} holds a precommit quorum for {name}"))?;
            }
        }
    }
    Ok(())
}
