//! Location of middle-phase exits on a step's continuous extension.

use serde::Serialize;

use super::dopri::DenseOutput;
use crate::poly::bisect_monotone;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Boundary {
    /// `b̂`, the upper edge of `Φ_l`.
    BHat,
    /// `â`, the lower edge of `Φ_r`.
    AHat,
}

impl Boundary {
    pub fn name(self) -> &'static str {
        match self {
            Boundary::BHat => "bhat",
            Boundary::AHat => "ahat",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Direction {
    ToLeft,
    ToRight,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransitionEvent {
    pub level: usize,
    pub label: String,
    pub tau: f64,
    pub boundary: Boundary,
    pub direction: Direction,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Crossing {
    pub level: usize,
    pub t: f64,
    pub boundary: Boundary,
}

/// Crossings of `b̂` (downwards) or `â` (upwards) by the monitored
/// components over the step, earliest first. A component counts as crossing
/// when it ends the step outside `(b̂, â)`; the crossing time is bisected
/// on the interpolant to full resolution.
pub fn locate_events(dense: &DenseOutput, monitored: &[usize], b_hat: f64, a_hat: f64) -> Vec<Crossing> {
    let mut out = Vec::new();
    for &j in monitored {
        let end = dense.component_at_theta(j, 1.0);
        let (boundary, level) = if end >= a_hat {
            (Boundary::AHat, a_hat)
        } else if end <= b_hat {
            (Boundary::BHat, b_hat)
        } else {
            continue;
        };
        let g = |th: f64| dense.component_at_theta(j, th) - level;
        let g0 = g(0.0);
        let th = if g0 == 0.0 {
            0.0
        } else if g(1.0) == 0.0 || g0.signum() == g(1.0).signum() {
            1.0
        } else {
            bisect_monotone(g, 0.0, 1.0, g0)
        };
        let t = (dense.t0 + th * dense.h).min(dense.t1());
        out.push(Crossing { level: j, t, boundary });
    }
    out.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.level.cmp(&b.level)));
    out
}
