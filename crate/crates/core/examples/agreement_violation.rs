//! The six-round lock-split schedule under both unlock rules, with the lock
//! state each correct process carries out of every round.
//!
//! cargo run --example agreement_violation

use tendermint_sim::harness::run;
use tendermint_sim::oneshot::UnlockRule;
use tendermint_sim::scenarios;
use tendermint_sim::trace::Event;
use tendermint_sim::types::Digest;

fn show(locked: Option<Digest>, llr: i64) -> String {
    locked.map_or(format!("unlocked (llr {llr})"), |d| format!("{} @ {llr}", d.short()))
}

fn main() {
    for rule in [UnlockRule::Legacy, UnlockRule::Corrected] {
        let out = run(&scenarios::agreement_violation(rule));
        println!("== {rule:?}");
        for rec in out.trace().records() {
            match (&rec.event, rec.process) {
                (Event::RoundEntry { round, locked, llr, .. }, Some(p)) if *round > 1 && p.0 <= 3 => {
                    println!("  end of r{}: {p} {}", round - 1, show(*locked, *llr));
                }
                (Event::Decide { round, block, .. }, Some(p)) => {
                    println!("  {p} decides {} in r{round}", block.digest().short());
                }
                _ => {}
            }
        }
        println!("  agreement: {}", out.report.check.get("agreement").unwrap());
    }
}
