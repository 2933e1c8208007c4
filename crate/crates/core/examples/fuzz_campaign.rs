//! Seeded safety fuzzing: random Byzantine strategies across network modes.
//!
//! cargo run --release --example fuzz_campaign -- [runs] [seed]

use tendermint_sim::harness::{fuzz, Campaign};

fn main() {
    let mut args = std::env::args().skip(1);
    let runs: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(200);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(1);

    let campaign = Campaign::safety(seed, runs);
    let (summary, repro) = fuzz(&campaign);
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    for c in repro.iter().take(3) {
        println!("--- reproducer {}\n{}", c.name, c.to_toml());
    }
}
