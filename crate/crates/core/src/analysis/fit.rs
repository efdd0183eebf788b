//! Exponential rate fits on one inter-event segment.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::{Sample, Trajectory};

pub const MIN_FIT_SAMPLES: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub enum Observable {
    /// `|f̄ − target|`.
    FbarGap(f64),
    /// `(Σ μ_j (u_j − limit_j)²)^½`.
    DistanceToLimit(Vec<f64>),
    Ratio,
    InverseRatio,
}

impl Observable {
    pub fn eval(&self, traj: &Trajectory, s: &Sample) -> f64 {
        match self {
            Observable::FbarGap(target) => (s.fbar - target).abs(),
            Observable::DistanceToLimit(lim) => s
                .levels
                .iter()
                .zip(lim)
                .zip(&traj.weights)
                .map(|((u, l), w)| w * (u - l) * (u - l))
                .sum::<f64>()
                .sqrt(),
            Observable::Ratio => s.ratio,
            Observable::InverseRatio => 1.0 / s.ratio,
        }
    }

    fn asymptote(&self) -> f64 {
        match self {
            Observable::FbarGap(t) => *t,
            _ => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SegmentFit {
    pub k: usize,
    /// `λ` in `|obs| ≈ A·e^{−λt}`.
    pub rate: f64,
    pub log_amplitude: f64,
    pub asymptote: f64,
    /// RMS residual of the log-linear fit.
    pub residual: f64,
    pub samples: usize,
}

/// Least-squares slope of `ln|obs|` against `t` over the central 60% of
/// `window`; samples where the observable vanishes are skipped.
pub fn fit_rate(traj: &Trajectory, obs: &Observable, window: (f64, f64)) -> Result<SegmentFit> {
    let (a, b) = window;
    let w = b - a;
    let (lo, hi) = (a + 0.2 * w, b - 0.2 * w);
    let pts: Vec<(f64, f64)> = traj
        .samples_in(lo, hi)
        .filter_map(|s| {
            let v = obs.eval(traj, s).abs();
            (v > 0.0 && v.is_finite()).then(|| (s.t, v.ln()))
        })
        .collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientSamples(pts.len()));
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm) * (p.0 - tm)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = ym - slope * tm;
    let residual = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    let k = traj.events.iter().filter(|e| e.tau <= a).count();
    Ok(SegmentFit { k, rate: -slope, log_amplitude: intercept, asymptote: obs.asymptote(), residual, samples: pts.len() })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::exact::Weight;
    use crate::integrator::{run, IntegratorOptions};
    use crate::nonlinearity::Nonlinearity;
    use crate::state::AtomicState;

    #[test]
    fn constant_observable_has_zero_rate() {
        let s = AtomicState::three_value(
            Arc::new(Nonlinearity::piecewise_linear()),
            [Weight::fraction(1, 4), Weight::fraction(1, 2), Weight::fraction(1, 4)],
            [-0.9, -0.1, 1.1],
        )
        .unwrap();
        let tr = run(&s, 5.0, &IntegratorOptions::default(), &mut []).unwrap();
        let fit = fit_rate(&tr, &Observable::FbarGap(0.0), (0.0, 5.0)).unwrap();
        assert!(fit.rate.abs() < 1e-12);
        assert!(matches!(fit_rate(&tr, &Observable::FbarGap(0.0), (0.0, 1.0)), Err(Error::InsufficientSamples(_))));
    }
}
