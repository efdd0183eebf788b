//! The phase ratio of a three-value cubic state against its closed-form
//! rate, at two sample intervals.

use nonlocal_flow::analysis::ratio_residual;
use nonlocal_flow::constructors::cubic_three_value;
use nonlocal_flow::exact::Weight;
use nonlocal_flow::integrator::{run, IntegratorOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (el, er) in [("1/1000", "2/1000"), ("0", "0")] {
        let st = cubic_three_value(&Weight::parse(el)?, &Weight::parse(er)?, -0.9, 0.1)?;
        for h in [0.1, 0.05, 0.025] {
            let opts = IntegratorOptions { sample_every: h, ..IntegratorOptions::default() };
            let tr = run(&st, 5.0, &opts, &mut [])?;
            let r0 = tr.samples[0].ratio;
            let r1 = tr.samples.last().map_or(f64::NAN, |s| s.ratio);
            println!("ε = ({el}, {er}), h = {h:<5}: R {r0:.6} → {r1:.6}, residual {:.3e}", ratio_residual(&tr, 0.0, 5.0)?);
        }
    }
    Ok(())
}
