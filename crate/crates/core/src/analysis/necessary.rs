//! Test of the necessary condition for a cubic trajectory to fail to
//! converge: zero mean and a level `c` splitting the mass into thirds.

use std::cmp::Ordering;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::Weight;
use crate::nonlinearity::Kind;
use crate::state::AtomicState;

const MEAN_TOL: f64 = 1e-12;
const WEIGHT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum NecessaryCondition {
    Satisfied { c: f64, exact: bool },
    /// Non-convergence is impossible; the reason names the failed clause.
    Violated { reason: String },
}

impl NecessaryCondition {
    pub fn is_satisfied(&self) -> bool {
        matches!(self, NecessaryCondition::Satisfied { .. })
    }
}

pub fn check_necessary_condition(state: &AtomicState) -> Result<NecessaryCondition> {
    if state.nonlinearity().kind() != Kind::Cubic {
        return Err(Error::CubicOnly);
    }
    let mean = state.mean();
    if mean.abs() > MEAN_TOL {
        return Ok(NecessaryCondition::Violated { reason: format!("mean: ū = {mean:e} is not zero") });
    }
    let exact = state.atoms().iter().all(|a| a.weight.is_exact());
    let third = Weight::fraction(1, 3);
    let is_third = |w: &Weight| {
        if exact {
            w == &third
        } else {
            (w.value() - 1.0 / 3.0).abs() <= WEIGHT_TOL
        }
    };

    // Runs of equal levels.
    let n = state.len();
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..=n {
        if i == n || state.compare_levels(i - 1, i) != Ordering::Equal {
            runs.push((start, i));
            start = i;
        }
    }
    let sum = |a: usize, b: usize| Weight::sum(state.atoms()[a..b].iter().map(|x| &x.weight));
    let mut closest = f64::INFINITY;
    for &(a, b) in &runs {
        let (below, at, above) = (sum(0, a), sum(a, b), sum(b, n));
        if is_third(&below) && is_third(&at) && is_third(&above) {
            return Ok(NecessaryCondition::Satisfied { c: state.value(a), exact });
        }
        let dev = [below, at, above].iter().map(|w| (w.value() - 1.0 / 3.0).abs()).fold(0.0, f64::max);
        closest = closest.min(dev);
    }
    Ok(NecessaryCondition::Violated {
        reason: format!("measure: no level splits the mass into thirds (closest deviation {closest:e})"),
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::nonlinearity::Nonlinearity;

    fn cubic3(w: [Weight; 3], v: [f64; 3]) -> AtomicState {
        AtomicState::three_value(Arc::new(Nonlinearity::cubic()), w, v).unwrap()
    }

    #[test]
    fn thirds_with_zero_mean() {
        let t = Weight::fraction(1, 3);
        let s = cubic3([t.clone(), t.clone(), t], [-1.0, 0.0, 1.0]);
        assert_eq!(check_necessary_condition(&s).unwrap(), NecessaryCondition::Satisfied { c: 0.0, exact: true });
    }

    #[test]
    fn violations() {
        let t = Weight::fraction(1, 3);
        let shifted = cubic3([t.clone(), t.clone(), t], [-0.9, 0.1, 1.1]);
        match check_necessary_condition(&shifted).unwrap() {
            NecessaryCondition::Violated { reason } => assert!(reason.starts_with("mean")),
            other => panic!("{other:?}"),
        }
        let quarter = cubic3([Weight::fraction(1, 4), Weight::fraction(1, 2), Weight::fraction(1, 4)], [-1.0, 0.0, 1.0]);
        match check_necessary_condition(&quarter).unwrap() {
            NecessaryCondition::Violated { reason } => assert!(reason.starts_with("measure")),
            other => panic!("{other:?}"),
        }
    }
}
