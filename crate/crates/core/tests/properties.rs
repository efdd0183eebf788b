use std::sync::Arc;

use nonlocal_flow::analysis::random::{random_in_phase_pl, random_state, random_state_near};
use nonlocal_flow::analysis::*;
use nonlocal_flow::exact::Weight;
use nonlocal_flow::integrator::{run, IntegratorOptions};
use nonlocal_flow::nonlinearity::{Nonlinearity, Phase};
use nonlocal_flow::state::AtomicState;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn nonlinearity(cubic: bool) -> Arc<Nonlinearity> {
    Arc::new(if cubic { Nonlinearity::cubic() } else { Nonlinearity::piecewise_linear() })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn flow_conserves_mean_and_dissipates(seed in any::<u64>(), n in 2usize..6, cubic in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let st = random_state(&nonlinearity(cubic), n, -1.5, 1.5, &mut rng);
        let tr = run(&st, 10.0, &IntegratorOptions::default(), &mut []).unwrap();
        prop_assert!(tr.max_mean_drift() <= 1e-10);
        prop_assert!(tr.max_energy_increase <= 1e-10);
        prop_assert!(tr.energy_identity_residual() <= 1e-8);
        prop_assert!(tr.samples.windows(2).all(|w| w[1].energy <= w[0].energy + 1e-10));
        // Events only take levels out of the middle phase, in time order.
        prop_assert!(tr.events.windows(2).all(|w| w[0].tau <= w[1].tau));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn general_gradient_inequality_holds_near_equilibria(
        seed in any::<u64>(),
        n in 2usize..8,
        cubic in any::<bool>(),
        s in -0.2f64..0.2,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let st = random_state_near(&nonlinearity(cubic), s, 0.05, n, &mut rng);
        let r = grad_inequality_general(&st, 0.05).unwrap();
        prop_assert!(r.pass, "{:?}", r);
        prop_assert!(r.lhs >= 0.0 && r.rhs >= 0.0);
    }

    #[test]
    fn pl_gradient_inequality_is_sharp_without_middle_levels(seed in any::<u64>(), n in 1usize..8, middle in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let st = random_in_phase_pl(n, middle, &mut rng);
        let r = grad_inequality_pl(&st).unwrap();
        prop_assert!(r.pass, "{:?}", r);
        if (0..st.len()).all(|i| st.phase_of(i) != Phase::Middle) {
            prop_assert!(r.is_equality(1e-13), "{:?}", r);
        }
    }

    #[test]
    fn state_text_round_trips(seed in any::<u64>(), n in 1usize..9, cubic in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nl = nonlinearity(cubic);
        let st = random_state(&nl, n, -2.0, 2.0, &mut rng);
        let back = AtomicState::from_text(nl, &st.to_text()).unwrap();
        prop_assert_eq!(back, st);
    }

    #[test]
    fn weights_print_and_parse_exactly(num in 1i64..10_000, den in 1i64..10_000) {
        let w = Weight::fraction(num, den);
        prop_assert_eq!(Weight::parse(&w.to_string()).unwrap(), w);
    }

    #[test]
    fn mean_zero_thirds_satisfy_the_necessary_condition(a in 0.05f64..1.0, b in 0.05f64..1.0, c in -0.5f64..0.5) {
        // Levels −a < c < b with the mean restored exactly by a shift.
        let t = Weight::fraction(1, 3);
        let (lo, hi) = (c - a, c + b);
        let shift = (lo + c + hi) / 3.0;
        let st = AtomicState::three_value(nonlinearity(true), [t.clone(), t.clone(), t], [lo - shift, c - shift, hi - shift]).unwrap();
        let verdict = check_necessary_condition(&st).unwrap();
        if st.mean().abs() <= 1e-12 {
            prop_assert!(verdict.is_satisfied(), "{:?}", verdict);
        }
    }

    #[test]
    fn bregman_divergence_is_nonnegative_on_convex_pieces(base in 0.6f64..1.5, v in 0.6f64..1.5, cubic in any::<bool>()) {
        let nl = nonlinearity(cubic);
        prop_assert!(nl.bregman(base, v) >= -1e-16);
    }
}
