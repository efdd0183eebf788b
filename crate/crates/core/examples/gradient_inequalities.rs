//! Checks both gradient inequalities on seeded random states and reports the
//! tightest margins.

use std::sync::Arc;

use nonlocal_flow::analysis::random::{random_in_phase_pl, random_state_near};
use nonlocal_flow::analysis::{grad_inequality_general, grad_inequality_pl};
use nonlocal_flow::nonlinearity::{Nonlinearity, Phase};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for nl in [Nonlinearity::piecewise_linear(), Nonlinearity::cubic()] {
        let nl = Arc::new(nl);
        for s in [-0.1, 0.0, 0.1] {
            let mut worst = f64::INFINITY;
            for i in 0..1000 {
                let st = random_state_near(&nl, s, 0.05, 2 + i % 7, &mut rng);
                let r = grad_inequality_general(&st, 0.05)?;
                assert!(r.pass, "{r:?}");
                worst = worst.min(r.margin / r.rhs.max(f64::MIN_POSITIVE));
            }
            println!("{} s = {s:+.1}: 1000 states pass, smallest relative margin {worst:.3e}", nl.kind().name());
        }
    }

    let (mut sharp, mut strict) = (0, 0);
    for i in 0..1000 {
        let st = random_in_phase_pl(2 + i % 7, i % 2 == 0, &mut rng);
        let r = grad_inequality_pl(&st)?;
        if (0..st.len()).all(|j| st.phase_of(j) != Phase::Middle) {
            assert!(r.is_equality(1e-13));
            sharp += 1;
        } else {
            assert!(r.pass);
            strict += 1;
        }
    }
    println!("piecewise-linear form: {sharp} equalities, {strict} states with middle levels");
    Ok(())
}
