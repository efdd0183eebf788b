//! Time integration of the level system `du_j/dt = f̄ − f(u_j)`.
//!
//! Active levels are integrated directly. Dormant levels are integrated in
//! the coordinate `L = log|u_j − u_m|`, whose equation
//! `dL/dt = −(f(u_m + δ) − f(u_m))/δ` is evaluated with an exact divided
//! difference, so the offset `δ` never has to be resolved against `u_m`.

pub mod dopri;
pub mod events;
pub mod trajectory;

use std::sync::Arc;

pub use dopri::DenseOutput;
pub use events::{locate_events, Boundary, Crossing, Direction, TransitionEvent};
pub use trajectory::{dtbarf_residual, Sample, Trajectory};

use crate::error::{Error, Result};
use crate::nonlinearity::{Kind, Nonlinearity, Phase};
use crate::state::{AtomicState, LevelSlot, PhaseMeasures, DEMOTE_THRESHOLD, PROMOTE_THRESHOLD};
use crate::sum::CompensatedSum;
use dopri::Rhs;

/// Outer-phase levels closer than this many ulps count as coalesced rather
/// than misordered.
const COALESCE_ULPS: f64 = 4.0;

#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub initial_step: f64,
    /// Sample cadence; samples are also taken at every event.
    pub sample_every: f64,
    pub check_invariants: bool,
    pub manage_dormancy: bool,
    /// Allowed energy increase per accepted step.
    pub energy_tol: f64,
    /// Allowed mean re-projection shift per accepted step.
    pub shift_tol: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_step: 0.01,
            min_step: 1e-14,
            initial_step: 1e-3,
            sample_every: 0.1,
            check_invariants: true,
            manage_dormancy: true,
            energy_tol: 1e-10,
            shift_tol: 1e-12,
        }
    }
}

impl IntegratorOptions {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if !(pos(self.rtol) && pos(self.atol) && pos(self.max_step) && pos(self.min_step) && pos(self.initial_step)) {
            return Err(Error::Config("tolerances and step bounds must be positive".into()));
        }
        if !pos(self.sample_every) {
            return Err(Error::Config("sample cadence must be positive".into()));
        }
        Ok(())
    }
}

/// Callbacks fired at each sample and each event of a run.
pub trait Observer {
    fn on_sample(&mut self, _sample: &Sample, _state: &AtomicState) {}
    fn on_event(&mut self, _event: &TransitionEvent, _state: &AtomicState) {}
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Coord {
    Level,
    Log { anchor: usize, sign: f64 },
}

struct System {
    nl: Arc<Nonlinearity>,
    mu: Vec<f64>,
    coords: Vec<Coord>,
}

impl System {
    fn new(state: &AtomicState) -> Self {
        let coords = (0..state.len())
            .map(|i| match state.slot(i) {
                LevelSlot::Active { .. } => Coord::Level,
                LevelSlot::Dormant { anchor, sign, .. } => Coord::Log { anchor, sign },
            })
            .collect();
        Self { nl: state.nonlinearity_arc(), mu: state.weights().to_vec(), coords }
    }

    fn pack(&self, state: &AtomicState) -> Vec<f64> {
        (0..state.len())
            .map(|i| match state.slot(i) {
                LevelSlot::Active { value } => value,
                LevelSlot::Dormant { log_offset, .. } => log_offset,
            })
            .collect()
    }

    fn unpack(&self, y: &[f64], state: &mut AtomicState) {
        for (i, c) in self.coords.iter().enumerate() {
            let slot = match *c {
                Coord::Level => LevelSlot::Active { value: y[i] },
                Coord::Log { anchor, sign } => LevelSlot::Dormant { anchor, sign, log_offset: y[i] },
            };
            state.set_slot(i, slot);
        }
    }

    fn scale(&self, i: usize, y0: f64, y1: f64, rtol: f64, atol: f64) -> f64 {
        match self.coords[i] {
            Coord::Level => atol + rtol * y0.abs().max(y1.abs()),
            // An absolute error in L is a relative error in the offset.
            Coord::Log { .. } => rtol,
        }
    }

    #[inline]
    fn dormant_force(&self, y: &[f64], j: usize, anchor: usize, sign: f64) -> (f64, f64) {
        let um = y[anchor];
        let d = sign * y[j].exp();
        let (dd, _) = self.nl.divided_difference(um, d);
        (dd.mul_add(d, self.nl.f(um)), dd)
    }
}

impl Rhs for System {
    fn eval(&self, y: &[f64], dy: &mut [f64]) -> f64 {
        let mut acc = CompensatedSum::new();
        for j in 0..y.len() {
            let f = match self.coords[j] {
                Coord::Level => self.nl.f(y[j]),
                Coord::Log { anchor, sign } => self.dormant_force(y, j, anchor, sign).0,
            };
            dy[j] = f;
            acc.add_product(self.mu[j], f);
        }
        let fbar = acc.value();
        let mut diss = 0.0;
        for j in 0..y.len() {
            let v = fbar - dy[j];
            diss += self.mu[j] * v * v;
            dy[j] = match self.coords[j] {
                Coord::Level => v,
                Coord::Log { anchor, sign } => -self.dormant_force(y, j, anchor, sign).1,
            };
        }
        diss
    }
}

/// Right-hand side of the flow; dormant components are `d(log offset)/dt`.
pub fn rhs(state: &AtomicState) -> Vec<f64> {
    let sys = System::new(state);
    let y = sys.pack(state);
    let mut dy = vec![0.0; y.len()];
    sys.eval(&y, &mut dy);
    dy
}

fn controller_factor(err: f64) -> f64 {
    if err == 0.0 {
        5.0
    } else if err.is_finite() {
        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
    } else {
        0.2
    }
}

/// Restores the conserved mean by a uniform shift of the active levels
/// (dormant levels follow their anchor), skipping `pinned`. Returns the shift.
fn reproject(sys: &System, y: &mut [f64], state: &mut AtomicState, mean0: f64, pinned: Option<usize>) -> f64 {
    sys.unpack(y, state);
    let deficit = mean0 - state.mean();
    let free_weight = 1.0 - pinned.map_or(0.0, |p| sys.mu[p]);
    let shift = deficit / free_weight;
    if shift != 0.0 {
        for (i, c) in sys.coords.iter().enumerate() {
            if *c == Coord::Level && Some(i) != pinned {
                y[i] += shift;
            }
        }
        sys.unpack(y, state);
    }
    shift
}

/// One accepted adaptive step without event handling. Returns the new
/// state, the step size used and the step's continuous extension.
pub fn step(state: &AtomicState, dt_suggest: f64, opts: &IntegratorOptions) -> Result<(AtomicState, f64, DenseOutput)> {
    opts.validate()?;
    let sys = System::new(state);
    let mean0 = state.mean();
    let y = sys.pack(state);
    let mut k1 = vec![0.0; y.len()];
    let d1 = sys.eval(&y, &mut k1);
    let mut h = dt_suggest.min(opts.max_step);
    loop {
        let out = dopri::step(&sys, 0.0, &y, &k1, d1, h, |i, a, b| sys.scale(i, a, b, opts.rtol, opts.atol));
        if out.err <= 1.0 {
            let mut next = state.clone();
            let mut y1 = out.y1;
            reproject(&sys, &mut y1, &mut next, mean0, None);
            return Ok((next, h, out.dense));
        }
        h *= controller_factor(out.err).min(1.0);
        if h < opts.min_step {
            return Err(Error::StepSizeUnderflow { t: 0.0, dt: h });
        }
    }
}

fn ratio_of(state: &AtomicState) -> f64 {
    if state.nonlinearity().kind() != Kind::Cubic {
        return f64::NAN;
    }
    match (state.index_of("l"), state.index_of("m"), state.index_of("r")) {
        (Some(l), Some(m), Some(r)) => state.level_gap(m, r) / state.level_gap(l, m),
        _ => f64::NAN,
    }
}

fn make_sample(state: &AtomicState, t: f64, energy: f64, dissipated: f64) -> Sample {
    let measures = state.phase_measures().unwrap_or_else(|_| {
        let ([nu_l, nu_m, nu_r], _) = state.phase_weights();
        PhaseMeasures { nu_l, nu_m, nu_r, eps_l: 0.0, eps_r: 0.0 }
    });
    Sample {
        t,
        fbar: state.mean_force(),
        um: state.anchor_index().map_or(f64::NAN, |m| state.value(m)),
        energy,
        mean: state.mean(),
        measures,
        ratio: ratio_of(state),
        dissipated,
        levels: state.values(),
        dormant: (0..state.len())
            .map(|i| match state.slot(i) {
                LevelSlot::Dormant { sign, log_offset, .. } => Some((sign, log_offset)),
                LevelSlot::Active { .. } => None,
            })
            .collect(),
    }
}

/// Integrates from `t = 0` to `t_end` with event location, dormancy
/// management and runtime invariant checks.
pub fn run(
    initial: &AtomicState,
    t_end: f64,
    opts: &IntegratorOptions,
    observers: &mut [&mut dyn Observer],
) -> Result<Trajectory> {
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::Config(format!("t_end must be positive, got {t_end}")));
    }
    opts.validate()?;
    let mut st = initial.clone();
    let nl = st.nonlinearity_arc();
    let ph = nl.phases();
    let n = st.len();
    let mut sys = System::new(&st);
    let mut y = sys.pack(&st);
    let mut k1 = vec![0.0; n];
    let mut d1 = sys.eval(&y, &mut k1);

    let mean0 = st.mean();
    let box_tol = 1e-12;
    let in_box = |s: &AtomicState| {
        (0..s.len()).all(|i| {
            let v = s.value(i);
            v >= ph.a - box_tol && v <= ph.b + box_tol
        })
    };
    let started_in_box = in_box(&st);
    let mut prev_phase: Vec<Phase> = (0..n).map(|i| st.phase_of(i)).collect();
    let mut exited = vec![false; n];
    let mut prev_nu = st.phase_weights().0;
    let mut energy = st.energy();
    let mut dissipated = 0.0;

    let first = make_sample(&st, 0.0, energy, dissipated);
    for o in observers.iter_mut() {
        o.on_sample(&first, &st);
    }
    let mut traj = Trajectory {
        kind: nl.kind(),
        labels: st.atoms().iter().map(|a| a.label.clone()).collect(),
        weights: st.weights().to_vec(),
        samples: vec![first],
        events: Vec::new(),
        dormant_error_bound: 0.0,
        max_mean_shift: 0.0,
        max_energy_increase: f64::NEG_INFINITY,
        promotions: Vec::new(),
        demotions: Vec::new(),
        accepted_steps: 0,
        rejected_steps: 0,
        coalesced_pairs: 0,
        final_state: st.clone(),
    };

    let violation = |t: f64, what: String| Error::InvariantViolation { t, what };
    let mut t = 0.0;
    let mut h = opts.initial_step.min(opts.max_step);
    let mut sample_idx: u64 = 1;

    while t < t_end {
        let next_sample = (sample_idx as f64 * opts.sample_every).min(t_end);
        let remaining = next_sample - t;
        let mut h_try = h.min(opts.max_step);
        let clamped = h_try >= remaining;
        if clamped {
            h_try = remaining;
        }
        let scale = |i: usize, a: f64, b: f64| sys.scale(i, a, b, opts.rtol, opts.atol);
        let out = dopri::step(&sys, t, &y, &k1, d1, h_try, scale);
        if !(out.err <= 1.0) {
            traj.rejected_steps += 1;
            h = h_try * controller_factor(out.err).min(1.0);
            if h < opts.min_step {
                return Err(Error::StepSizeUnderflow { t, dt: h });
            }
            continue;
        }

        let watch: Vec<usize> = (0..n)
            .filter(|&j| !exited[j] && sys.coords[j] == Coord::Level && prev_phase[j] == Phase::Middle)
            .collect();
        let crossings = locate_events(&out.dense, &watch, ph.b_hat, ph.a_hat);
        let (mut y_new, t_new, diss_step, event) = match crossings.first() {
            Some(c) => {
                let target = match c.boundary {
                    Boundary::AHat => ph.a_hat,
                    Boundary::BHat => ph.b_hat,
                };
                let mut h_ev = c.t - t;
                if h_ev > 0.0 {
                    // Newton on the step length so the restart point agrees
                    // with the actual step, not just the interpolant.
                    let mut redo = dopri::step(&sys, t, &y, &k1, d1, h_ev, scale);
                    let mut dy = vec![0.0; n];
                    for _ in 0..4 {
                        let gap = target - redo.y1[c.level];
                        if gap.abs() <= 4.0 * f64::EPSILON * (1.0 + target.abs()) {
                            break;
                        }
                        sys.eval(&redo.y1, &mut dy);
                        let rate = dy[c.level];
                        if rate == 0.0 || !rate.is_finite() {
                            break;
                        }
                        let h_next = (h_ev + gap / rate).clamp(0.0, h_try);
                        if h_next == h_ev || h_next == 0.0 {
                            break;
                        }
                        h_ev = h_next;
                        redo = dopri::step(&sys, t, &y, &k1, d1, h_ev, scale);
                    }
                    (redo.y1, t + h_ev, redo.dissipated, Some(*c))
                } else {
                    (y.clone(), t, 0.0, Some(*c))
                }
            }
            _ => {
                let t_new = if clamped { next_sample } else { t + h_try };
                (out.y1.clone(), t_new, out.dissipated, None)
            }
        };

        let pinned = event.map(|c| {
            y_new[c.level] = match c.boundary {
                Boundary::AHat => ph.a_hat,
                Boundary::BHat => ph.b_hat,
            };
            c.level
        });
        let shift = reproject(&sys, &mut y_new, &mut st, mean0, pinned);
        if pinned.is_none() {
            traj.max_mean_shift = traj.max_mean_shift.max(shift.abs());
        }
        traj.dormant_error_bound += (t_new - t) * st.mean_force_with_bound().1;
        dissipated += diss_step;
        t = t_new;
        y = y_new;
        traj.accepted_steps += 1;

        if let Some(c) = event {
            exited[c.level] = true;
            let (boundary, direction) = match c.boundary {
                Boundary::AHat => (Boundary::AHat, Direction::ToRight),
                Boundary::BHat => (Boundary::BHat, Direction::ToLeft),
            };
            let ev = TransitionEvent { level: c.level, label: st.label(c.level).to_string(), tau: t, boundary, direction };
            for o in observers.iter_mut() {
                o.on_event(&ev, &st);
            }
            traj.events.push(ev);
        }

        if opts.manage_dormancy && manage_dormancy(&mut st, t, &mut traj, &exited) {
            sys = System::new(&st);
            y = sys.pack(&st);
        }

        let e_new = st.energy();
        traj.max_energy_increase = traj.max_energy_increase.max(e_new - energy);
        if opts.check_invariants {
            if e_new > energy + opts.energy_tol {
                return Err(violation(t, format!("energy increased by {:e} in one step", e_new - energy)));
            }
            if pinned.is_none() && shift.abs() > opts.shift_tol {
                return Err(violation(t, format!("mean re-projection shift {:e} exceeds {:e}", shift.abs(), opts.shift_tol)));
            }
            let (coalesced, bad) = st.order_defects(COALESCE_ULPS);
            traj.coalesced_pairs = traj.coalesced_pairs.max(coalesced);
            if let Some(i) = bad {
                return Err(violation(t, format!("strict level order lost between {} and {}", st.label(i - 1), st.label(i))));
            }
            if let Some(m) = st.anchor_index() {
                let has_dormant = (0..n).any(|i| st.is_dormant(i));
                if has_dormant && nl.phase_of(st.value(m)) != Phase::Middle {
                    return Err(violation(t, "anchor left the middle phase while carrying dormant levels".into()));
                }
            }
            if started_in_box {
                if !in_box(&st) {
                    return Err(violation(t, "a level left the invariant interval [a, b]".into()));
                }
                let nu = st.phase_weights().0;
                let eps = 1e-15;
                if nu[1] > prev_nu[1] + eps || nu[0] < prev_nu[0] - eps || nu[2] < prev_nu[2] - eps {
                    return Err(violation(t, "phase measures are not monotone".into()));
                }
                prev_nu = nu;
                for (i, prev) in prev_phase.iter().enumerate() {
                    if matches!(prev, Phase::Left | Phase::Right) && st.phase_of(i) != *prev {
                        return Err(violation(t, format!("level {} left a stable phase", st.label(i))));
                    }
                }
            }
        }
        energy = e_new;
        for (i, p) in prev_phase.iter_mut().enumerate() {
            *p = st.phase_of(i);
        }

        d1 = sys.eval(&y, &mut k1);
        let proposal = h_try * controller_factor(out.err);
        h = if clamped || event.is_some() { h.max(proposal) } else { proposal };

        let at_sample = t >= next_sample;
        if at_sample || event.is_some() {
            let s = make_sample(&st, t, energy, dissipated);
            for o in observers.iter_mut() {
                o.on_sample(&s, &st);
            }
            traj.samples.push(s);
        }
        if at_sample {
            sample_idx += 1;
        }
    }
    if traj.max_energy_increase == f64::NEG_INFINITY {
        traj.max_energy_increase = 0.0;
    }
    traj.final_state = st;
    Ok(traj)
}

/// Promotes dormant levels that reached the promote threshold and demotes
/// middle-phase levels that came within the demote threshold of the anchor.
/// Returns whether any representation changed.
fn manage_dormancy(st: &mut AtomicState, t: f64, traj: &mut Trajectory, exited: &[bool]) -> bool {
    let mut changed = false;
    let promote_log = PROMOTE_THRESHOLD.ln();
    for i in 0..st.len() {
        if let LevelSlot::Dormant { log_offset, .. } = st.slot(i) {
            if log_offset >= promote_log {
                st.force_promote(i);
                traj.promotions.push((i, t));
                changed = true;
            }
        }
    }
    if let Some(m) = st.anchor_index() {
        let um = st.value(m);
        for i in 0..st.len() {
            if i == m || exited[i] || st.is_dormant(i) {
                continue;
            }
            let d = st.value(i) - um;
            if d != 0.0 && d.abs() < DEMOTE_THRESHOLD && st.demote(i).is_ok() {
                traj.demotions.push((i, t));
                changed = true;
            }
        }
    }
    changed
}
