//! Fitted decay rates for three-value states: 4ε for the piecewise-linear
//! family, 1 at ε = 0, and 2 for the symmetric cubic state.

use std::path::Path;

use nonlocal_flow::cli::commands::sweep_point;
use nonlocal_flow::cli::run_config::{SweepFamily, SweepPoint};
use nonlocal_flow::cli::RunConfig;
use nonlocal_flow::exact::Weight;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RunConfig::parse("[nonlinearity]\nkind = pl\n", Path::new("."))?;
    let grid = [
        (SweepFamily::PlThreeValue, "1/100"),
        (SweepFamily::PlThreeValue, "1/1000"),
        (SweepFamily::PlThreeValue, "1/10000"),
        (SweepFamily::PlThreeValue, "0"),
        (SweepFamily::CubicSymmetric, "0"),
    ];
    println!("{:<16} {:>8} {:>14} {:>14} {:>10}", "family", "ε", "fitted", "predicted", "rel err");
    for (family, eps) in grid {
        let e = Weight::parse(eps)?;
        let (fit, pred) = sweep_point(family, &SweepPoint::Eps { eps_l: e.clone(), eps_r: e }, None, &cfg)?;
        println!(
            "{:<16} {eps:>8} {:>14.8e} {:>14.8e} {:>10.2e}",
            format!("{family:?}"),
            fit.rate,
            pred,
            (fit.rate - pred).abs() / pred
        );
    }
    Ok(())
}
