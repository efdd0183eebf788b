//! Samples the smooth transition ramp and discretizes the resulting profile
//! into sub-atoms; the sub-atom count controls how finely each zone is cut.

use nonlocal_flow::analysis::check_necessary_condition;
use nonlocal_flow::constructors::*;
use nonlocal_flow::exact::Weight;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let theta = Weight::fraction(1, 64);
    let ramp = smooth_ramp(theta.value());
    // The ramp rises across [1 − θ, 1].
    for x in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let y = 1.0 - theta.value() * (1.0 - x);
        println!("ramp(1 − θ + {x:.2}θ) = {:.6}", ramp(y));
    }
    for n in [1, 4, 16] {
        let spec = CubicSpec {
            eta: Weight::fraction(1, 8),
            mu0: Weight::fraction(1, 10),
            alpha0: 0.5,
            theta: theta.clone(),
            k: 2,
            alpha: AlphaSchedule::default(),
            strictness: Strictness::Ordering,
            subatoms: n,
        };
        let st = discretize_smooth_profile(&ramp, &spec, n)?;
        println!(
            "{n:>2} sub-atoms per zone: {} atoms, mean {:+.1e}, necessary condition satisfied: {}",
            st.len(),
            st.mean(),
            check_necessary_condition(&st)?.is_satisfied()
        );
    }
    Ok(())
}
