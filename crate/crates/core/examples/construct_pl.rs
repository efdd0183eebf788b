//! Validates and builds the truncated piecewise-linear construction, then
//! prints the condition report, the state file and the unit-interval layout.
//!
//!     cargo run --example construct_pl -- [eta] [K]

use nonlocal_flow::constructors::*;
use nonlocal_flow::exact::Weight;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let eta = Weight::parse(&args.next().unwrap_or_else(|| "1/2".into()))?;
    let k: usize = args.next().map_or(Ok(3), |s| s.parse())?;
    let spec = PLSpec { eta, mu0: Weight::fraction(1, 8), alpha0: 0.2, k, alpha: AlphaSchedule::default() };

    let v = validate_pl(&spec)?;
    for c in &v.checks {
        let idx = c.index.map_or("-".into(), |j| j.to_string());
        println!("{:<16} {idx:>2}  margin {:+.3e}  {}", c.condition, c.margin, if c.pass { "ok" } else { "FAIL" });
    }
    if let Some(bad) = v.first_failure() {
        return Err(format!("{} fails: {}", bad.condition, bad.description).into());
    }

    let st = build_pl(&spec)?;
    println!("\n{}", st.to_text());
    for i in layout_on_interval(&st)? {
        let tail = if i.tail { " (tail)" } else { "" };
        println!("{:>3}  [{} , {}]  u = {:+.6}{tail}", i.label, i.lo, i.hi, i.level);
    }
    // The last segment has no perturbation left and no target.
    for t in truncated_targets(&spec).iter().filter(|t| t.fbar_eq.is_finite()) {
        println!("segment {}: f̄ → {:+.6}, rate {:.6}", t.k, t.fbar_eq, t.rate);
    }
    Ok(())
}
