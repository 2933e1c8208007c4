//! Drives a single validator's state machine directly, printing the effects
//! of each input.
//!
//! cargo run --example oneshot_by_hand

use tendermint_sim::block::ChainContext;
use tendermint_sim::oneshot::{OneShot, OneShotConfig};
use tendermint_sim::types::{Block, Message, ProcessId, TxId, Value};

fn main() {
    let genesis = Block::genesis();
    let proposal = Block { height: 1, parent: genesis.digest(), payload: vec![TxId(7)], last_commit: Default::default() };
    let me = ProcessId(2);
    let ctx = ChainContext::after(&[genesis]);
    let mut node = OneShot::new(me, 1, ProcessId::roster(4), OneShotConfig::default(), ctx, proposal.clone());

    let b = Value::Block(proposal);
    let inputs = [
        Message::propose(ProcessId(1), 1, 1, b.clone(), None),
        Message::prevote(ProcessId(1), 1, 1, b.clone(), -1),
        Message::prevote(ProcessId(3), 1, 1, b.clone(), -1),
        Message::precommit(ProcessId(1), 1, 1, b.clone()),
        Message::precommit(ProcessId(3), 1, 1, b),
    ];
    println!("start -> {:?}", node.start());
    for m in &inputs {
        println!("{m}");
        for e in node.on_message(m) {
            println!("    {e:?}");
        }
    }
    println!("decided: {}", node.decided().is_some());
}
