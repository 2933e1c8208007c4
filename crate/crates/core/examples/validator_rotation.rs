//! Stake-weighted validator sets drawn from the chain tip; non-validators
//! follow the chain from commits.
//!
//! cargo run --example validator_rotation -- [seed]

use tendermint_sim::harness::run;
use tendermint_sim::scenarios;
use tendermint_sim::trace::Event;

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let out = run(&scenarios::rotation(seed));
    let mut last = 0;
    for rec in out.trace().records() {
        if let Event::HeightStart { height, validators, .. } = &rec.event {
            if *height > last {
                last = *height;
                let ids: Vec<String> = validators.iter().map(|p| p.to_string()).collect();
                println!("H{height:<3} validators {}", ids.join(" "));
            }
        }
    }
    println!("outputs per process: {:?}", out.report.outputs);
    println!("identical: {}", out.report.outputs_identical);
}
