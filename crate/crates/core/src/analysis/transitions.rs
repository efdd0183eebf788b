//! Bookkeeping around transition times of constructed data: which index
//! leaves next on each side, the resulting bounds on `u_m`, the split of the
//! mean into stable-phase and middle-phase remainders, and the oscillation
//! of `f̄`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::{Sample, Trajectory};
use crate::state::{AtomicState, Provenance};
use crate::sum::CompensatedSum;

/// Group index of a constructed label: `"3"` and `"3~1"` both give `3`.
pub fn group_of(label: &str) -> Option<usize> {
    label.split('~').next()?.parse().ok()
}

/// `τ_j` for main perturbation levels that exited during the run.
pub fn transition_times(traj: &Trajectory) -> BTreeMap<usize, f64> {
    let mut out = BTreeMap::new();
    for e in &traj.events {
        if !e.label.contains('~') {
            if let Some(j) = group_of(&e.label) {
                out.entry(j).or_insert(e.tau);
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TransitionIndices {
    /// Smallest odd `j` with `τ_j ≥ t`.
    pub j_l: usize,
    /// Smallest even `j` with `τ_j ≥ t`.
    pub j_r: usize,
    /// `min(j_l, j_r)`.
    pub j_m: usize,
}

/// Indices that have not transitioned by `t`; an index that never exits
/// within the run (or is absent after truncation) counts as `τ_j = ∞`.
pub fn transition_indices(traj: &Trajectory, t: f64) -> TransitionIndices {
    indices_from(&transition_times(traj), t)
}

fn indices_from(taus: &BTreeMap<usize, f64>, t: f64) -> TransitionIndices {
    let first = |start: usize| {
        let mut j = start;
        while taus.get(&j).is_some_and(|&tau| tau < t) {
            j += 2;
        }
        j
    };
    let j_l = first(1);
    let j_r = first(0);
    TransitionIndices { j_l, j_r, j_m: j_l.min(j_r) }
}

fn provenance(traj: &Trajectory) -> Result<&Provenance> {
    traj.final_state
        .provenance()
        .ok_or_else(|| Error::NotConstructed("run did not start from constructed data".into()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UmBoundReport {
    pub samples: usize,
    /// Smallest `(â − u_m) − μ_{j_l}` seen.
    pub worst_upper_margin: f64,
    /// Smallest `(u_m − b̂) − μ_{j_r}` seen.
    pub worst_lower_margin: f64,
    pub first_failure: Option<f64>,
    pub pass: bool,
}

/// Bounds keeping the anchor away from both folds by the mass of the next
/// level to leave on that side: `â − u_m > μ_{j_l}`, `u_m − b̂ > μ_{j_r}`.
pub fn check_um_bounds(traj: &Trajectory) -> Result<UmBoundReport> {
    let p = provenance(traj)?;
    let ph = traj.final_state.nonlinearity().phases();
    let taus = transition_times(traj);
    let mut rep = UmBoundReport {
        samples: 0,
        worst_upper_margin: f64::INFINITY,
        worst_lower_margin: f64::INFINITY,
        first_failure: None,
        pass: true,
    };
    for s in &traj.samples {
        let ix = indices_from(&taus, s.t);
        let up = (ph.a_hat - s.um) - p.mu(ix.j_l).value();
        let lo = (s.um - ph.b_hat) - p.mu(ix.j_r).value();
        rep.samples += 1;
        rep.worst_upper_margin = rep.worst_upper_margin.min(up);
        rep.worst_lower_margin = rep.worst_lower_margin.min(lo);
        if !(up > 0.0 && lo > 0.0) && rep.first_failure.is_none() {
            rep.first_failure = Some(s.t);
            rep.pass = false;
        }
    }
    Ok(rep)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct HDecomposition {
    pub h_l: f64,
    pub h_m: f64,
    pub h_r: f64,
}

impl HDecomposition {
    pub fn total(&self) -> f64 {
        self.h_l + self.h_m + self.h_r
    }
}

/// `rel(i, b)` is `u_i − u_b`.
fn h_core(labels: &[String], weights: &[f64], lmr: [usize; 3], j_m: usize, rel: impl Fn(usize, usize) -> f64) -> HDecomposition {
    let [l, m, r] = lmr;
    let mut acc = [CompensatedSum::new(); 3];
    for (i, label) in labels.iter().enumerate() {
        let Some(j) = group_of(label) else { continue };
        let (slot, base) = if j >= j_m {
            (1, m)
        } else if j % 2 == 1 {
            (0, l)
        } else {
            (2, r)
        };
        acc[slot].add_product(weights[i], rel(i, base));
    }
    HDecomposition { h_l: acc[0].value(), h_m: acc[1].value(), h_r: acc[2].value() }
}

fn lmr(find: impl Fn(&str) -> Option<usize>) -> Result<[usize; 3]> {
    match (find("l"), find("m"), find("r")) {
        (Some(l), Some(m), Some(r)) => Ok([l, m, r]),
        _ => Err(Error::MissingLabels("l, m, r".into())),
    }
}

/// Remainders of the mean relative to the stable levels (`H_l`, `H_r`, from
/// groups already transitioned) and to the anchor (`H_m`, groups `j ≥ j_m`).
pub fn h_decomposition(state: &AtomicState, j_m: usize) -> Result<HDecomposition> {
    let ix = lmr(|s| state.index_of(s))?;
    let labels: Vec<String> = state.atoms().iter().map(|a| a.label.clone()).collect();
    Ok(h_core(&labels, state.weights(), ix, j_m, |i, b| state.level_gap(b, i)))
}

fn h_of_sample(traj: &Trajectory, s: &Sample, ix: [usize; 3], j_m: usize) -> HDecomposition {
    let m = ix[1];
    h_core(&traj.labels, &traj.weights, ix, j_m, |i, b| match s.dormant[i] {
        Some(_) => (s.levels[m] - s.levels[b]) + s.offset_from_anchor(i),
        None => s.levels[i] - s.levels[b],
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HBoundCheck {
    pub t: f64,
    pub k: usize,
    pub h: HDecomposition,
    pub h_m_bound: f64,
    pub h_lr_bound: f64,
    pub pass: bool,
}

/// Checks `|H_m| ≤ 2μ_k(α_k eᵗ + θ)` and `|H_l + H_r| ≤ 2μ0·exp(−h_k(t − τ_{k−1}))`,
/// `h_k = μ_{k+1}/3`, at every sample strictly inside an inter-event segment.
pub fn check_h_bounds(traj: &Trajectory) -> Result<Vec<HBoundCheck>> {
    let p = provenance(traj)?;
    let ix = lmr(|s| traj.label_index(s))?;
    let taus = transition_times(traj);
    let theta = p.theta.value();
    let mu0 = p.mu0.value();
    let mut out = Vec::new();
    for s in &traj.samples {
        let k = indices_from(&taus, s.t).j_m;
        let tau_prev = if k == 0 { 0.0 } else { taus.get(&(k - 1)).copied().unwrap_or(0.0) };
        let tau_k = taus.get(&k).copied().unwrap_or(f64::INFINITY);
        if !(s.t > tau_prev && s.t < tau_k) {
            continue;
        }
        let h = h_of_sample(traj, s, ix, k);
        let alpha_et = p.log_alpha.get(k).map_or(0.0, |la| (la + s.t).exp());
        let mu_k = p.mu(k).value();
        let h_m_bound = 2.0 * mu_k * (alpha_et + theta);
        let h_lr_bound = 2.0 * mu0 * (-(p.mu(k + 1).value() / 3.0) * (s.t - tau_prev)).exp();
        let pass = h.h_m.abs() <= h_m_bound && (h.h_l + h.h_r).abs() <= h_lr_bound;
        out.push(HBoundCheck { t: s.t, k, h, h_m_bound, h_lr_bound, pass });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EventGap {
    pub k: usize,
    pub label: String,
    pub tau: f64,
    pub fbar: f64,
    pub target: f64,
    pub gap: f64,
    /// `exp(−μ_k(τ_k − τ_{k−1}))`.
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OscillationSummary {
    pub amplitude: f64,
    /// `(1 − η)/(1 + η)` when the run comes from constructed data.
    pub predicted_amplitude: Option<f64>,
    pub events: Vec<EventGap>,
}

pub fn fbar_amplitude(traj: &Trajectory) -> f64 {
    let (lo, hi) = traj
        .samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.fbar), hi.max(s.fbar)));
    if lo.is_finite() {
        hi - lo
    } else {
        0.0
    }
}

/// Amplitude of `f̄` over the run and, for constructed data, the gap at
/// each event time to `f̄_k = ((−1)^{k−1}/2)(1−η)/(1+η)`.
pub fn oscillation_summary(traj: &Trajectory) -> OscillationSummary {
    let amplitude = fbar_amplitude(traj);
    let Some(p) = traj.final_state.provenance() else {
        return OscillationSummary { amplitude, predicted_amplitude: None, events: Vec::new() };
    };
    let eta = p.eta.value();
    let amp = (1.0 - eta) / (1.0 + eta);
    let mut prev = 0.0;
    let mut events = Vec::new();
    for (k, e) in traj.events.iter().filter(|e| !e.label.contains('~')).enumerate() {
        let fbar = traj
            .samples
            .iter()
            .find(|s| s.t == e.tau)
            .unwrap_or_else(|| traj.sample_near(e.tau))
            .fbar;
        let target = if k % 2 == 0 { -0.5 * amp } else { 0.5 * amp };
        let gap = (fbar - target).abs();
        let bound = (-p.mu(k).value() * (e.tau - prev)).exp();
        events.push(EventGap { k, label: e.label.clone(), tau: e.tau, fbar, target, gap, bound, pass: gap <= bound });
        prev = e.tau;
    }
    OscillationSummary { amplitude, predicted_amplitude: Some(amp), events }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indices_follow_definitions() {
        let mut taus = BTreeMap::new();
        taus.insert(0, 1.0);
        taus.insert(1, 9.0);
        taus.insert(2, 25.0);
        assert_eq!(indices_from(&taus, 0.5), TransitionIndices { j_l: 1, j_r: 0, j_m: 0 });
        assert_eq!(indices_from(&taus, 1.0).j_m, 0);
        assert_eq!(indices_from(&taus, 2.0), TransitionIndices { j_l: 1, j_r: 2, j_m: 1 });
        assert_eq!(indices_from(&taus, 10.0), TransitionIndices { j_l: 3, j_r: 2, j_m: 2 });
        assert_eq!(indices_from(&taus, 30.0), TransitionIndices { j_l: 3, j_r: 4, j_m: 3 });
    }

    #[test]
    fn groups() {
        assert_eq!(group_of("12"), Some(12));
        assert_eq!(group_of("3~0"), Some(3));
        assert_eq!(group_of("m"), None);
    }
}
