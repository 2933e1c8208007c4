//! Writes a run's artifacts, reads the JSONL trace back and re-checks it;
//! a second run with the same seed must match byte for byte.
//!
//! cargo run --example trace_replay

use std::fs;

use tendermint_sim::check::check_trace;
use tendermint_sim::harness::{run, write_artifacts};
use tendermint_sim::scenarios;
use tendermint_sim::trace::Trace;

fn main() -> std::io::Result<()> {
    let root = std::env::temp_dir().join("tmsim-trace-replay");
    let cfg = scenarios::rotation(3);
    for copy in ["a", "b"] {
        write_artifacts(&root.join(copy), &run(&cfg))?;
    }
    let a = fs::read(root.join("a/trace.jsonl"))?;
    let b = fs::read(root.join("b/trace.jsonl"))?;
    println!("{} bytes, identical: {}", a.len(), a == b);

    let (trace, truncated) = Trace::read_jsonl(&a[..]).expect("well-formed");
    let report = check_trace(&trace, truncated);
    for v in &report.verdicts {
        println!("  {v}");
    }

    let cut = &a[..a.len() / 2];
    let (partial, truncated) = Trace::read_jsonl(cut).expect("prefix parses");
    println!("half the trace: {} records, truncated {truncated}, partial {}", partial.records().len(), check_trace(&partial, truncated).partial);
    Ok(())
}
