//! Drives the command layer from a config file, as the binary does.
//!
//!     cargo run --example simulate_config -- configs/pl_counterexample.cfg out/pl

use std::path::PathBuf;

use nonlocal_flow::cli::{cmd_simulate, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let config = PathBuf::from(args.next().ok_or("usage: simulate_config CONFIG [OUT]")?);
    let out = args.next().map_or_else(|| PathBuf::from("out"), PathBuf::from);
    let cfg = RunConfig::load(&config)?;
    let tr = cmd_simulate(&cfg, &out)?;
    println!("{} samples, {} events, written to {}", tr.samples.len(), tr.events.len(), out.display());
    for e in &tr.events {
        println!("  {} at {:.6}", e.label, e.tau);
    }
    Ok(())
}
