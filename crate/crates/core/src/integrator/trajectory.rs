use std::io::Write;

use serde::Serialize;

use super::events::TransitionEvent;
use crate::error::{Error, Result};
use crate::nonlinearity::Kind;
use crate::state::{AtomicState, PhaseMeasures};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub fbar: f64,
    /// Anchor level `u_m`, `NaN` when the state has none.
    pub um: f64,
    pub energy: f64,
    pub mean: f64,
    pub measures: PhaseMeasures,
    /// Phase ratio for cubic states with `l`, `m`, `r` levels, else `NaN`.
    pub ratio: f64,
    /// `∫₀ᵗ Σ μ_j (du_j/dt)²`.
    pub dissipated: f64,
    pub levels: Vec<f64>,
    /// `(sign, log offset)` of dormant levels.
    pub dormant: Vec<Option<(f64, f64)>>,
}

impl Sample {
    /// Signed offset from the anchor for dormant levels, else `u_j − u_m`.
    pub fn offset_from_anchor(&self, j: usize) -> f64 {
        match self.dormant[j] {
            Some((s, l)) => s * l.exp(),
            None => self.levels[j] - self.um,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub kind: Kind,
    pub labels: Vec<String>,
    pub weights: Vec<f64>,
    pub samples: Vec<Sample>,
    pub events: Vec<TransitionEvent>,
    /// Accumulated bound on dormant-level force errors (`∫ Σ μ_j err_j dt`).
    pub dormant_error_bound: f64,
    /// Largest per-step mean re-projection shift.
    pub max_mean_shift: f64,
    /// Largest per-step energy increase (negative when strictly dissipative).
    pub max_energy_increase: f64,
    pub promotions: Vec<(usize, f64)>,
    pub demotions: Vec<(usize, f64)>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Most adjacent outer-phase pairs seen tied at f64 resolution at once.
    pub coalesced_pairs: usize,
    pub final_state: AtomicState,
}

impl Trajectory {
    pub fn initial_energy(&self) -> f64 {
        self.samples[0].energy
    }

    pub fn t_end(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// `max |E(t) + ∫₀ᵗ Σμ(du/dt)² − E(0)|` over samples.
    pub fn energy_identity_residual(&self) -> f64 {
        let e0 = self.initial_energy();
        self.samples
            .iter()
            .map(|s| (s.energy + s.dissipated - e0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_mean_drift(&self) -> f64 {
        let m0 = self.samples[0].mean;
        self.samples.iter().map(|s| (s.mean - m0).abs()).fold(0.0, f64::max)
    }

    /// Intervals between consecutive events, from `0` to the last sample.
    pub fn segments(&self) -> Vec<(f64, f64)> {
        let mut cuts = vec![0.0];
        cuts.extend(self.events.iter().map(|e| e.tau));
        cuts.push(self.t_end());
        cuts.windows(2).filter(|w| w[1] > w[0]).map(|w| (w[0], w[1])).collect()
    }

    pub fn samples_in(&self, t0: f64, t1: f64) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(move |s| s.t >= t0 && s.t <= t1)
    }

    /// Sample closest to `t`.
    pub fn sample_near(&self, t: f64) -> &Sample {
        let i = self.samples.partition_point(|s| s.t < t);
        match (i.checked_sub(1), self.samples.get(i)) {
            (Some(p), Some(n)) if (t - self.samples[p].t) <= (n.t - t) => &self.samples[p],
            (_, Some(n)) => n,
            (Some(p), None) => &self.samples[p],
            (None, None) => panic!("empty trajectory"),
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,fbar,um,energy,mean,nu_l,nu_m,nu_r,R")?;
        for s in &self.samples {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                s.t, s.fbar, s.um, s.energy, s.mean, s.measures.nu_l, s.measures.nu_m, s.measures.nu_r, s.ratio
            )?;
        }
        Ok(())
    }

    pub fn write_events_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "level,tau,boundary")?;
        for e in &self.events {
            writeln!(w, "{},{:.16e},{}", e.label, e.tau, e.boundary.name())?;
        }
        Ok(())
    }
}

/// Derivative at the middle of three samples, second order on uneven spacing.
pub(crate) fn centered_derivative(t: [f64; 3], y: [f64; 3]) -> f64 {
    let h0 = t[1] - t[0];
    let h1 = t[2] - t[1];
    (h0 * h0 * (y[2] - y[1]) + h1 * h1 * (y[1] - y[0])) / (h0 * h1 * (h0 + h1))
}

/// Largest deviation of the sampled `df̄/dt` from the piecewise-linear
/// segment law `−(ū + ν_l − ν_r) + (ν_l − ν_m + ν_r)·f̄` over `[t0, t1]`.
pub fn dtbarf_residual(traj: &Trajectory, t0: f64, t1: f64) -> Result<f64> {
    if traj.kind != Kind::PiecewiseLinearN {
        return Err(Error::PiecewiseLinearOnly);
    }
    let s: Vec<&Sample> = traj.samples_in(t0, t1).collect();
    let mut worst: f64 = 0.0;
    for w in s.windows(3) {
        if w[0].t == w[1].t || w[1].t == w[2].t {
            continue;
        }
        let d = centered_derivative([w[0].t, w[1].t, w[2].t], [w[0].fbar, w[1].fbar, w[2].fbar]);
        let m = &w[1].measures;
        let law = -(w[1].mean + m.nu_l - m.nu_r) + (m.nu_l - m.nu_m + m.nu_r) * w[1].fbar;
        worst = worst.max((d - law).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centered_derivative_is_exact_on_quadratics() {
        let q = |t: f64| 3.0 * t * t - t + 2.0;
        let t = [0.1, 0.25, 0.6];
        let d = centered_derivative(t, [q(t[0]), q(t[1]), q(t[2])]);
        assert!((d - (6.0 * 0.25 - 1.0)).abs() < 1e-13);
    }
}
