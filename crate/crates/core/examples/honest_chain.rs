//! Four correct validators on a synchronous network build a short chain.
//!
//! cargo run --example honest_chain

use tendermint_sim::harness::run;
use tendermint_sim::scenarios;
use tendermint_sim::trace::Event;

fn main() {
    let out = run(&scenarios::honest());
    for rec in out.trace().records() {
        if let (Some(p), Event::Output { height, block }) = (rec.process, &rec.event) {
            if p.0 == 1 {
                println!("t={:<5} H{height:<3} {} txs, rewards {:?}", rec.time, block.payload.len(), block.last_commit);
            }
        }
    }
    print!("{}", out.report.summary());
}
