//! Lock-split schedules with seeded timing perturbations, under both unlock rules.
//!
//! cargo run --release --example targeted_fuzz -- [runs] [seed]

use tendermint_sim::harness::{fuzz, Campaign};
use tendermint_sim::oneshot::UnlockRule;

fn main() {
    let mut args = std::env::args().skip(1);
    let runs: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(200);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(1);
    for rule in [UnlockRule::Legacy, UnlockRule::Corrected] {
        let (summary, _) = fuzz(&Campaign::targeted(seed, runs, rule));
        println!("{rule:?}: {} of {} runs broke agreement", summary.violations["agreement"], summary.runs);
    }
}
