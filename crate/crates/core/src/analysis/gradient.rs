//! Gradient inequalities near equilibria.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::nonlinearity::{Kind, Phase};
use crate::state::AtomicState;
use crate::sum::CompensatedSum;

/// Guard band around the critical values of `f`.
pub const REGULAR_BAND: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub lhs: f64,
    pub rhs: f64,
    /// Constant multiplying the energy gap (`1` for the PL form).
    pub c: f64,
    pub margin: f64,
    pub pass: bool,
}

impl GradCheckReport {
    fn new(lhs: f64, rhs: f64, c: f64) -> Self {
        let pass = lhs <= rhs + 1e-14 * (1.0 + rhs.abs());
        Self { lhs, rhs, c, margin: rhs - lhs, pass }
    }

    /// `|lhs − rhs| ≤ tol·max(|lhs|, |rhs|)`.
    pub fn is_equality(&self, tol: f64) -> bool {
        (self.lhs - self.rhs).abs() <= tol * self.lhs.abs().max(self.rhs.abs())
    }
}

/// Branch root of `s` matching each level's phase.
fn phi(state: &AtomicState, s: f64) -> Result<Vec<f64>> {
    let roots = state.nonlinearity().branch_roots(s)?;
    (0..state.len())
        .map(|i| {
            roots
                .for_phase(state.phase_of(i))
                .ok_or_else(|| Error::LevelOutOfPhase(state.label(i).to_string()))
        })
        .collect()
}

/// Energy gap `Σ μ (F(u) − F(φ) − s(u − φ))` and `Σ μ (f(u) − s)²`, both
/// summed around `φ` so that small deviations keep full relative accuracy.
fn gap_and_gradient(state: &AtomicState, s: f64, phi: &[f64]) -> (f64, f64) {
    let nl = state.nonlinearity();
    let mut gap = CompensatedSum::new();
    let mut grad = CompensatedSum::new();
    for (i, &p) in phi.iter().enumerate() {
        let u = state.value(i);
        let d = u - p;
        let r = nl.f(p) - s;
        let mu = state.weights()[i];
        gap.add_product(mu, nl.bregman(p, u) + r * d);
        let (dd, _) = nl.divided_difference(p, d);
        let g = dd.mul_add(d, r);
        grad.add_product(mu, g * g);
    }
    (gap.value(), grad.value())
}

/// `c·|E(u) − E(φ(s)) − s⟨1, u − φ(s)⟩| ≤ ‖Q∇E(u)‖²` with `s = f̄(u)` and
/// `c = ½λ̲²/λ̄`, the extreme values of `|f′|` between each level and its
/// branch root.
pub fn grad_inequality_general(state: &AtomicState, radius: f64) -> Result<GradCheckReport> {
    let nl = state.nonlinearity();
    let s = state.mean_force();
    for cv in nl.critical_values() {
        if (s - cv).abs() < REGULAR_BAND {
            return Err(Error::NotRegular { s, band: REGULAR_BAND });
        }
    }
    let phi = phi(state, s)?;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for (i, &p) in phi.iter().enumerate() {
        let u = state.value(i);
        let dist = (u - p).abs();
        if dist > radius {
            return Err(Error::TooFar { label: state.label(i).to_string(), distance: dist, radius });
        }
        let (mn, mx) = nl.abs_fprime_range(u.min(p), u.max(p));
        lo = lo.min(mn);
        hi = hi.max(mx);
    }
    if !(lo > 0.0) {
        return Err(Error::NotRegular { s, band: REGULAR_BAND });
    }
    let c = 0.5 * lo * lo / hi;
    let (gap, grad) = gap_and_gradient(state, s, &phi);
    Ok(GradCheckReport::new(c * gap.abs(), grad, c))
}

/// `|E(u) − E(φ) − s∫(u − φ)| ≤ ½∫|f(u) − f̄|²` for the piecewise-linear
/// nonlinearity, with `φ ∈ {−1+s, −s, 1+s}` chosen by phase. Equality holds
/// when no level is in the middle phase.
pub fn grad_inequality_pl(state: &AtomicState) -> Result<GradCheckReport> {
    let nl = state.nonlinearity();
    if nl.kind() != Kind::PiecewiseLinearN {
        return Err(Error::PiecewiseLinearOnly);
    }
    if let Some(i) = (0..state.len()).find(|&i| state.phase_of(i) == Phase::OutOfRange) {
        let p = nl.phases();
        return Err(Error::OutOfRange { s: state.value(i), lo: p.a, hi: p.b });
    }
    let s = state.mean_force();
    let phi = phi(state, s)?;
    let (gap, grad) = gap_and_gradient(state, s, &phi);
    Ok(GradCheckReport::new(gap.abs(), 0.5 * grad, 1.0))
}
