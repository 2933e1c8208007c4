//! Thresholds per validator count, and how a vote set treats duplicates and
//! equivocations.
//!
//! cargo run --example quorum_oracle

use tendermint_sim::quorum::{is_23_maj, max_faults, one_third, quorum, VoteSet};
use tendermint_sim::types::{Block, Message, MsgKind, ProcessId, Value};

fn main() {
    println!(" n  quorum  one-third  max f");
    for n in 1..=10 {
        println!("{n:>2}  {:>6}  {:>9}  {:>5}", quorum(n), one_third(n), max_faults(n));
    }

    let b = Value::Block(Block::genesis());
    let vote = |s: u32, v: &Value| Message::prevote(ProcessId(s), 1, 1, v.clone(), -1);
    let mut set = VoteSet::new(1, 1, MsgKind::Prevote);
    for m in [vote(1, &b), vote(2, &b), vote(2, &b), vote(3, &Value::Nil), vote(3, &b)] {
        println!("insert {m} -> {:?}", set.insert(&m));
    }
    println!("count(block) = {}, count(nil) = {}, evidence = {}", set.count(&b), set.count(&Value::Nil), set.evidence().len());
    let votes: Vec<&Message> = set.messages().collect();
    println!("quorum for block among 4: {}", is_23_maj(&b, &votes, 4).unwrap());
}
