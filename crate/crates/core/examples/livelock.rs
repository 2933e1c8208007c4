//! Just-in-time prevotes keep two correct processes locked on different
//! blocks; the side-condition monitor never finds a satisfying round.
//!
//! cargo run --example livelock

use tendermint_sim::harness::run;
use tendermint_sim::monitor::round_checks;
use tendermint_sim::scenarios;
use tendermint_sim::trace::Event;

fn main() {
    let out = run(&scenarios::livelock());
    for rec in out.trace().records() {
        if let (Event::RoundEntry { round, locked, llr, left_polcr, .. }, Some(p)) = (&rec.event, rec.process) {
            if (2..=8).contains(round) && p.0 <= 3 {
                let lock = locked.map_or("-".to_string(), |d| d.short());
                println!("end of r{}: {p} locked {lock:<10} llr {llr:>2} polcr {left_polcr:?}", round - 1);
            }
        }
    }
    let checks = round_checks(out.trace());
    let best = checks.iter().map(|c| c.count).min();
    println!("{} rounds examined, satisfying: {}, smallest count {best:?}", checks.len(), checks.iter().filter(|c| c.satisfied).count());
    println!("decisions: {}", out.report.decisions.len());
}
