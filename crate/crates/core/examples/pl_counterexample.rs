//! Runs the truncated piecewise-linear construction and prints transition
//! times, the gap to each segment target at the transitions, and the
//! oscillation amplitude of f̄.

use nonlocal_flow::analysis::{check_um_bounds, oscillation_summary};
use nonlocal_flow::constructors::*;
use nonlocal_flow::exact::Weight;
use nonlocal_flow::integrator::{run, IntegratorOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = PLSpec { eta: Weight::fraction(1, 2), mu0: Weight::fraction(1, 8), alpha0: 0.2, k: 3, alpha: AlphaSchedule::default() };
    let st = build_pl(&spec)?;
    let tr = run(&st, 40.0, &IntegratorOptions::default(), &mut [])?;

    let osc = oscillation_summary(&tr);
    for e in &osc.events {
        println!(
            "τ_{} = {:8.4} (level {}): f̄ = {:+.6}, target {:+.6}, gap {:.3e} ≤ {:.3e} {}",
            e.k, e.tau, e.label, e.fbar, e.target, e.gap, e.bound, if e.pass { "ok" } else { "FAIL" }
        );
    }
    match osc.predicted_amplitude {
        Some(p) => println!("amplitude of f̄: {:.6} (untruncated limit {p:.6})", osc.amplitude),
        None => println!("amplitude of f̄: {:.6}", osc.amplitude),
    }

    let um = check_um_bounds(&tr)?;
    println!("u_m stays inside the middle phase with margins {:.4} / {:.4}", um.worst_upper_margin, um.worst_lower_margin);
    println!("{} dormant promotions, energy identity residual {:.2e}", tr.promotions.len(), tr.energy_identity_residual());
    Ok(())
}
