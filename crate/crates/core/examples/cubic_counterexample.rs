//! Ordering-mode cubic construction: the dormant level grows in log space
//! while the middle level and the H decomposition stay within their bounds.

use nonlocal_flow::analysis::{check_h_bounds, check_necessary_condition, check_um_bounds};
use nonlocal_flow::constructors::*;
use nonlocal_flow::exact::Weight;
use nonlocal_flow::integrator::{run, IntegratorOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = CubicSpec {
        eta: Weight::fraction(1, 8),
        mu0: Weight::fraction(1, 10),
        alpha0: 0.5,
        theta: Weight::zero(),
        k: 2,
        alpha: AlphaSchedule::default(),
        strictness: Strictness::Ordering,
        subatoms: 4,
    };
    let st = build_cubic(&spec)?;
    println!("{}", st.to_text());
    println!("necessary condition: {:?}", check_necessary_condition(&st)?);

    let tr = run(&st, 150.0, &IntegratorOptions::default(), &mut [])?;
    for e in &tr.events {
        println!("level {} leaves the middle phase at t = {:.4}", e.label, e.tau);
    }
    for t in [0.0, 50.0, 100.0, 150.0] {
        let s = tr.sample_near(t);
        let logs: Vec<String> = s.dormant.iter().flatten().map(|(_, l)| format!("{l:.2}")).collect();
        println!("t = {:6.1}  u_m = {:+.6}  f̄ = {:+.3e}  dormant log offsets [{}]", s.t, s.um, s.fbar, logs.join(", "));
    }
    let um = check_um_bounds(&tr)?;
    let h = check_h_bounds(&tr)?;
    println!(
        "u_m bounds: {} ({} samples); H bounds: {}/{} samples pass",
        if um.pass { "pass" } else { "FAIL" },
        um.samples,
        h.iter().filter(|c| c.pass).count(),
        h.len()
    );
    Ok(())
}
