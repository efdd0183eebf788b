//! Phase ratio `R = (u_r − u_m)/(u_m − u_l)` for cubic three-phase states.

use crate::error::{Error, Result};
use crate::integrator::trajectory::centered_derivative;
use crate::integrator::Trajectory;
use crate::nonlinearity::Kind;
use crate::state::AtomicState;

const MIN_DENOMINATOR: f64 = 1e-13;

fn lmr_indices(labels: impl Fn(&str) -> Option<usize>) -> Result<[usize; 3]> {
    let mut missing = Vec::new();
    let mut out = [0; 3];
    for (k, name) in ["l", "m", "r"].into_iter().enumerate() {
        match labels(name) {
            Some(i) => out[k] = i,
            None => missing.push(name),
        }
    }
    if missing.is_empty() {
        Ok(out)
    } else {
        Err(Error::MissingLabels(missing.join(", ")))
    }
}

fn ratio(ul: f64, um: f64, ur: f64) -> Result<f64> {
    let den = um - ul;
    if !(den > MIN_DENOMINATOR) {
        return Err(Error::DegenerateDenominator(den));
    }
    Ok((ur - um) / den)
}

pub fn phase_ratio(state: &AtomicState) -> Result<f64> {
    if state.nonlinearity().kind() != Kind::Cubic {
        return Err(Error::CubicOnly);
    }
    let [l, m, r] = lmr_indices(|s| state.index_of(s))?;
    ratio(state.value(l), state.value(m), state.value(r))
}

/// `∂_t R` predicted from the levels: `−(u_l + u_m + u_r)(u_r − u_l)·R`.
pub fn ratio_rate(ul: f64, um: f64, ur: f64, r: f64) -> f64 {
    -(ul + um + ur) * (ur - ul) * r
}

/// Largest deviation over `[t0, t1]` between a centered difference of the
/// sampled ratio and [`ratio_rate`].
pub fn ratio_residual(traj: &Trajectory, t0: f64, t1: f64) -> Result<f64> {
    if traj.kind != Kind::Cubic {
        return Err(Error::CubicOnly);
    }
    let [l, m, r] = lmr_indices(|s| traj.label_index(s))?;
    let pts: Vec<(f64, f64, [f64; 3])> = traj
        .samples_in(t0, t1)
        .map(|s| {
            let lv = [s.levels[l], s.levels[m], s.levels[r]];
            ratio(lv[0], lv[1], lv[2]).map(|q| (s.t, q, lv))
        })
        .collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for w in pts.windows(3) {
        if w[0].0 == w[1].0 || w[1].0 == w[2].0 {
            continue;
        }
        let d = centered_derivative([w[0].0, w[1].0, w[2].0], [w[0].1, w[1].1, w[2].1]);
        let [ul, um, ur] = w[1].2;
        worst = worst.max((d - ratio_rate(ul, um, ur, w[1].1)).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::exact::Weight;
    use crate::nonlinearity::Nonlinearity;

    fn cubic3(values: [f64; 3]) -> AtomicState {
        let w = [Weight::fraction(1, 3), Weight::fraction(1, 3), Weight::fraction(1, 3)];
        AtomicState::three_value(Arc::new(Nonlinearity::cubic()), w, values).unwrap()
    }

    #[test]
    fn symmetric_ratio_is_one_and_stationary() {
        let s = cubic3([-0.9, 0.0, 0.9]);
        assert_eq!(phase_ratio(&s).unwrap(), 1.0);
        assert_eq!(ratio_rate(-0.9, 0.0, 0.9, 1.0), 0.0);
    }

    #[test]
    fn degenerate_and_wrong_kind() {
        let s = cubic3([-0.9, -0.9 + 1e-14, 0.9]);
        assert!(matches!(phase_ratio(&s), Err(Error::DegenerateDenominator(_))));
        let pl = AtomicState::three_value(
            Arc::new(Nonlinearity::piecewise_linear()),
            [Weight::fraction(1, 4), Weight::fraction(1, 2), Weight::fraction(1, 4)],
            [-1.0, 0.0, 1.0],
        )
        .unwrap();
        assert_eq!(phase_ratio(&pl), Err(Error::CubicOnly));
    }
}
