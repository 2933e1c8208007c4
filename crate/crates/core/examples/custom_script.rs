//! A hand-written Byzantine schedule in TOML: p4 equivocates in round 1 and
//! p1's precommits to p2 are held back until p2 reaches round 2.
//!
//! cargo run --example custom_script

use tendermint_sim::config::RunConfig;
use tendermint_sim::harness::run;

const CONFIG: &str = r#"
name = "custom-script"
n = 4
byzantine = [4]
seed = 1

[network]
mode = "asynchronous"
gst = 0
delta = 1
max_pre_gst = 1000

[protocol]
one_shot = true
prevote_timer = "on_entry"

[horizon]
time = 500

[adversary]
kind = "script"

[[adversary.actions]]
action = "send"
signer = 4
kind = "PREVOTE"
round = 1
value = { value = "proposal", round = 1 }
to = [1, 2]
when = { trigger = { on = "step", process = 1, round = 1, step = "prevote" }, offset = 1 }

[[adversary.actions]]
action = "send"
signer = 4
kind = "PREVOTE"
round = 1
value = { value = "nil" }
to = [3]
when = { trigger = { on = "step", process = 3, round = 1, step = "prevote" }, offset = 1 }

[[adversary.actions]]
action = "hold"
kind = "PRECOMMIT"
round = 1
signer = 1
to = 2
until = { trigger = { on = "step", process = 2, round = 2, step = "propose" }, offset = 0 }

[expect]
agreement = "holds"
"#;

fn main() {
    let cfg = RunConfig::from_toml(CONFIG).expect("valid config");
    let out = run(&cfg);
    print!("{}", out.report.summary());
    for d in &out.report.decisions {
        println!("{} decided H{} {}", d.process, d.height, &d.block[..12]);
    }
}
