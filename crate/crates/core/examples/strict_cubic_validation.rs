//! Strict non-convergence parameters: the α schedule is built in log space,
//! validation passes, and simulation is refused because the first transition
//! lies far beyond any reachable horizon.

use std::path::Path;

use nonlocal_flow::cli::{cmd_construct, cmd_simulate, RunConfig};
use nonlocal_flow::constructors::{generate_alpha_schedule, ScheduleRule};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sched = generate_alpha_schedule(&ScheduleRule::CubicFull { safety: 0.5 }, 1.0 / 8.0, 1.0 / 10.0, 0.5, 3);
    for (j, (la, k)) in sched.log_alpha.iter().zip(&sched.kappa).enumerate() {
        println!("j = {j}: log α = {la:.6e}, κ = {k:.6e}");
    }
    println!("α underflows f64: {}", sched.underflow);

    let text = "[run]\nt_end = 10\n[cubic]\neta = 1/8\nmu0 = 1/10\nalpha0 = 1/2\nK = 2\nstrictness = full\n";
    let cfg = RunConfig::parse(text, Path::new("."))?;
    let out = std::env::temp_dir().join("strict_cubic_validation");
    cmd_construct(&cfg, &out)?;
    println!("construct: wrote {}", out.display());
    match cmd_simulate(&cfg, &out) {
        Err(e) => println!("simulate: {e}"),
        Ok(_) => println!("simulate unexpectedly ran"),
    }
    Ok(())
}
