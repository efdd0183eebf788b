//! Random states for property checks. Weights are exact rationals with
//! small integer numerators so that they sum to one exactly.

use std::sync::Arc;

use rand::Rng;

use crate::exact::Weight;
use crate::nonlinearity::{Nonlinearity, Phase};
use crate::state::AtomicState;

fn exact_weights<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Weight> {
    let k: Vec<i64> = (0..n).map(|_| rng.random_range(1..=64)).collect();
    let total: i64 = k.iter().sum();
    k.into_iter().map(|x| Weight::fraction(x, total)).collect()
}

fn assemble(nl: &Arc<Nonlinearity>, mut values: Vec<f64>, weights: Vec<Weight>) -> Option<AtomicState> {
    values.sort_by(f64::total_cmp);
    if values.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    AtomicState::from_levels(nl.clone(), weights, values).ok()
}

/// `n` distinct levels drawn uniformly from `[lo, hi]`.
pub fn random_state<R: Rng + ?Sized>(nl: &Arc<Nonlinearity>, n: usize, lo: f64, hi: f64, rng: &mut R) -> AtomicState {
    loop {
        let values = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
        if let Some(s) = assemble(nl, values, exact_weights(n, rng)) {
            return s;
        }
    }
}

fn random_phase<R: Rng + ?Sized>(rng: &mut R, middle: bool) -> Phase {
    let choices: &[Phase] = if middle { &[Phase::Left, Phase::Middle, Phase::Right] } else { &[Phase::Left, Phase::Right] };
    choices[rng.random_range(0..choices.len())]
}

/// Levels within `radius/4` of the branch roots of `s`, in random phases.
/// The mean force of the result differs from `s` by `O(radius)`; draws whose
/// levels end up farther than `radius` from the roots of their own mean
/// force are rejected.
pub fn random_state_near<R: Rng + ?Sized>(
    nl: &Arc<Nonlinearity>,
    s: f64,
    radius: f64,
    n: usize,
    rng: &mut R,
) -> AtomicState {
    let roots = nl.branch_roots(s).expect("s must be an admissible force level");
    loop {
        let values = (0..n)
            .map(|_| {
                let z = roots.for_phase(random_phase(rng, true)).expect("phase has a root");
                z + rng.random_range(-0.25 * radius..=0.25 * radius)
            })
            .collect();
        let Some(st) = assemble(nl, values, exact_weights(n, rng)) else { continue };
        let Ok(r) = nl.branch_roots(st.mean_force()) else { continue };
        let near = (0..st.len()).all(|i| {
            r.for_phase(st.phase_of(i)).is_some_and(|z| (st.value(i) - z).abs() <= radius)
        });
        if near {
            return st;
        }
    }
}

/// Piecewise-linear state with every level strictly inside a phase; with
/// `middle = false` only the outer phases are used.
pub fn random_in_phase_pl<R: Rng + ?Sized>(n: usize, middle: bool, rng: &mut R) -> AtomicState {
    let nl = Arc::new(Nonlinearity::piecewise_linear());
    loop {
        let values = (0..n)
            .map(|_| {
                let x = rng.random_range(0.001..0.999);
                match random_phase(rng, middle) {
                    Phase::Left => -1.5 + x,
                    Phase::Middle => -0.5 + x,
                    _ => 0.5 + x,
                }
            })
            .collect();
        let Some(st) = assemble(&nl, values, exact_weights(n, rng)) else { continue };
        if st.mean_force().abs() < 0.5 {
            return st;
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn weights_sum_to_one_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let nl = Arc::new(Nonlinearity::cubic());
        let s = random_state(&nl, 6, -1.0, 1.0, &mut rng);
        assert_eq!(Weight::sum(s.atoms().iter().map(|a| &a.weight)), Weight::one());
        assert!(s.is_strictly_ordered());
    }
}
