use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::run_config::{Ramp, RunConfig, Source, SweepConfig, SweepFamily, SweepPoint};
use crate::analysis::random::random_state_near;
use crate::analysis::*;
use crate::constructors::{
    build_cubic, build_pl, cubic_three_value, discretize_smooth_profile, layout_on_interval, pl_three_value,
    smooth_ramp, truncated_targets, validate_cubic, validate_pl, AlphaSchedule, PLSpec, Strictness, Validation,
};
use crate::error::{Error, Result};
use crate::exact::Weight;
use crate::integrator::{dtbarf_residual, run, Trajectory};
use crate::nonlinearity::{Kind, Phase};
use crate::state::AtomicState;

fn create_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    write_file(path, &s)
}

fn validation_text(v: &Validation) -> String {
    let mut out = String::new();
    for c in &v.checks {
        let idx = c.index.map_or("-".to_string(), |j| j.to_string());
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        out.push_str(&format!(
            "{} {idx} {:.16e} {:.16e} {:.16e} {verdict} # {}\n",
            c.condition, c.lhs, c.rhs, c.margin, c.description
        ));
    }
    out
}

fn layout_csv(state: &AtomicState) -> Result<String> {
    let mut out = String::from("label,lo,hi,lo_closed,hi_closed,level,tail\n");
    for i in layout_on_interval(state)? {
        out.push_str(&format!(
            "{},{},{},{},{},{:.16e},{}\n",
            i.label, i.lo, i.hi, i.lo_closed, i.hi_closed, i.level, i.tail
        ));
    }
    Ok(out)
}

fn build(cfg: &RunConfig) -> Result<(AtomicState, Option<Validation>)> {
    match &cfg.source {
        Some(Source::Pl(spec)) => {
            let v = validate_pl(spec)?;
            Ok((build_pl(spec)?, Some(v)))
        }
        Some(Source::Cubic { spec, ramp }) => {
            let v = validate_cubic(spec)?;
            let st = match ramp {
                Ramp::Linear => build_cubic(spec)?,
                Ramp::Smooth => {
                    let theta = spec.theta.value();
                    discretize_smooth_profile(&smooth_ramp(theta), spec, spec.subatoms.max(1))?
                }
            };
            Ok((st, Some(v)))
        }
        _ => match cfg.explicit_state()? {
            Some(s) => Ok((s, None)),
            None => Err(Error::Config("no initial data: give [pl], [cubic] or [state]".into())),
        },
    }
}

/// Writes `state.txt`, `layout.csv` and the condition report.
pub fn cmd_construct(cfg: &RunConfig, out: &Path) -> Result<AtomicState> {
    let validation = match &cfg.source {
        Some(Source::Pl(spec)) => validate_pl(spec)?,
        Some(Source::Cubic { spec, .. }) => validate_cubic(spec)?,
        _ => return Err(Error::Config("construct needs a [pl] or [cubic] block".into())),
    };
    create_dir(out)?;
    write_file(&out.join("report.txt"), &validation_text(&validation))?;
    write_json(&out.join("report.json"), &validation)?;
    let (state, _) = build(cfg)?;
    write_file(&out.join("state.txt"), &state.to_text())?;
    write_file(&out.join("layout.csv"), &layout_csv(&state)?)?;
    Ok(state)
}

/// Refuses runs whose transition times are far beyond any feasible horizon.
fn feasibility(cfg: &RunConfig) -> Result<()> {
    let Some(Source::Cubic { spec, .. }) = &cfg.source else { return Ok(()) };
    if spec.strictness != Strictness::FullNonconvergence {
        return Ok(());
    }
    let v = validate_cubic(spec)?;
    let la = v.schedule.log_alpha.get(1).copied().unwrap_or(f64::NEG_INFINITY);
    Err(Error::Infeasible(format!(
        "strict non-convergence parameters give log α_1 = {la:.6e}; with |f′| ≤ 1 on the middle phase the first \
         perturbation cannot leave before t ≈ {:.3e}, and κ_0 = {:.6e}. Construct and validate these data, but simulate \
         with strictness = ordering.",
        -la,
        v.schedule.kappa.first().copied().unwrap_or(f64::NAN)
    )))
}

fn simulate(cfg: &RunConfig, state: &AtomicState) -> Result<Trajectory> {
    let t_end = cfg.t_end.ok_or_else(|| Error::Config("[run] t_end is required to simulate".into()))?;
    run(state, t_end, &cfg.opts, &mut [])
}

fn summary(traj: &Trajectory) -> serde_json::Value {
    let events: Vec<_> = traj
        .events
        .iter()
        .map(|e| json!({"label": e.label, "tau": e.tau, "boundary": e.boundary.name(), "direction": e.direction}))
        .collect();
    json!({
        "t_end": traj.t_end(),
        "samples": traj.samples.len(),
        "accepted_steps": traj.accepted_steps,
        "rejected_steps": traj.rejected_steps,
        "events": events,
        "oscillation": oscillation_summary(traj),
        "energy_identity_residual": traj.energy_identity_residual(),
        "max_mean_drift": traj.max_mean_drift(),
        "max_mean_shift": traj.max_mean_shift,
        "max_energy_increase": traj.max_energy_increase,
        "dormant_error_bound": traj.dormant_error_bound,
        "promotions": traj.promotions.len(),
        "demotions": traj.demotions.len(),
        "coalesced_pairs": traj.coalesced_pairs,
        "invariant_violations": 0,
    })
}

/// Writes `trajectory.csv`, `events.csv` and `summary.json`.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<Trajectory> {
    feasibility(cfg)?;
    let (state, _) = build(cfg)?;
    if cfg.t_end.is_none() {
        return Err(Error::Config("[run] t_end is required to simulate".into()));
    }
    create_dir(out)?;
    let traj = match simulate(cfg, &state) {
        Ok(t) => t,
        Err(e) => {
            if let Error::InvariantViolation { t, what } = &e {
                write_json(&out.join("summary.json"), &json!({"invariant_violations": 1, "t": t, "violation": what}))?;
            }
            return Err(e);
        }
    };
    let open = |name: &str| {
        fs::File::create(out.join(name)).map(BufWriter::new).map_err(|e| Error::Io(format!("{name}: {e}")))
    };
    let mut w = open("trajectory.csv")?;
    traj.write_csv(&mut w)?;
    w.flush()?;
    let mut w = open("events.csv")?;
    traj.write_events_csv(&mut w)?;
    w.flush()?;
    write_json(&out.join("summary.json"), &summary(&traj))?;
    Ok(traj)
}

/// Sample cadence used whenever the dtbarf check runs.
pub const DTBARF_CADENCE: f64 = 0.01;

pub const CHECKS: &[&str] = &[
    "grad-general",
    "grad-pl",
    "grad-random",
    "necessary",
    "mean",
    "energy",
    "dtbarf",
    "ratio",
    "um-bounds",
    "h-bounds",
    "oscillation",
];

fn default_checks(cfg: &RunConfig, state: &AtomicState) -> Vec<String> {
    let mut c = Vec::new();
    let cubic = cfg.nl.kind() == Kind::Cubic;
    let pl = cfg.nl.kind() == Kind::PiecewiseLinearN;
    let constructed = state.provenance().is_some();
    if cubic {
        c.push("necessary");
    }
    if pl && (0..state.len()).all(|i| state.phase_of(i) != Phase::OutOfRange) {
        c.push("grad-pl");
    }
    if cfg.t_end.is_some() && feasibility(cfg).is_ok() {
        c.extend(["mean", "energy"]);
        if pl {
            c.push("dtbarf");
        }
        if constructed {
            c.push("um-bounds");
            c.push(if cubic { "h-bounds" } else { "oscillation" });
        } else if cubic && ["l", "m", "r"].iter().all(|l| state.index_of(l).is_some()) {
            c.push("ratio");
        }
    }
    c.into_iter().map(String::from).collect()
}

fn grad_line(name: &str, r: Result<GradCheckReport>) -> CheckLine {
    match r {
        Ok(g) => {
            let mut l = CheckLine::le(name, g.lhs, g.rhs);
            l.pass = g.pass;
            l.with_note(format!("c = {:.6e}", g.c))
        }
        Err(e) => CheckLine::flag(name, false, format!("precondition: {e}")),
    }
}

/// Runs the selected checks; `extra` comes from `--check` flags and
/// replaces the configured list when non-empty.
pub fn cmd_verify(cfg: &RunConfig, out: &Path, extra: &[String], seed: Option<u64>) -> Result<Report> {
    let (state, _) = build(cfg)?;
    let mut checks: Vec<String> = if !extra.is_empty() {
        extra.to_vec()
    } else if !cfg.verify.checks.is_empty() {
        cfg.verify.checks.clone()
    } else {
        default_checks(cfg, &state)
    };
    checks.dedup();
    if let Some(bad) = checks.iter().find(|c| !CHECKS.contains(&c.as_str())) {
        return Err(Error::Config(format!("unknown check {bad:?}; known: {}", CHECKS.join(", "))));
    }
    let needs_traj = checks
        .iter()
        .any(|c| matches!(c.as_str(), "mean" | "energy" | "dtbarf" | "ratio" | "um-bounds" | "h-bounds" | "oscillation"));
    let traj = if needs_traj {
        feasibility(cfg)?;
        // The centered difference behind the dtbarf residual needs a fine cadence.
        let mut fine = cfg.clone();
        if checks.iter().any(|c| c == "dtbarf") {
            fine.opts.sample_every = fine.opts.sample_every.min(DTBARF_CADENCE);
        }
        Some(simulate(&fine, &state)?)
    } else {
        None
    };
    let v = &cfg.verify;
    let mut rep = Report::default();
    for name in &checks {
        let traj = traj.as_ref();
        let line = match name.as_str() {
            "grad-general" => grad_line(name, grad_inequality_general(&state, v.radius)),
            "grad-pl" => grad_line(name, grad_inequality_pl(&state)),
            "grad-random" => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(cfg.seed));
                let mut failures = 0usize;
                let mut worst = f64::INFINITY;
                for (i, s) in [0.0, 0.1, -0.1].into_iter().cycle().take(v.random_states).enumerate() {
                    let n = 2 + i % 7;
                    let st = random_state_near(&cfg.nl, s, v.radius, n, &mut rng);
                    match grad_inequality_general(&st, v.radius) {
                        Ok(r) => {
                            worst = worst.min(r.margin);
                            failures += usize::from(!r.pass);
                        }
                        Err(_) => failures += 1,
                    }
                }
                CheckLine::le(name, failures as f64, 0.0).with_note(format!("{} states, worst margin {worst:.3e}", v.random_states))
            }
            "necessary" => match check_necessary_condition(&state) {
                Ok(NecessaryCondition::Satisfied { c, exact }) => {
                    CheckLine::flag(name, true, format!("satisfied at c = {c:.16e} (exact weights: {exact})"))
                }
                Ok(NecessaryCondition::Violated { reason }) => CheckLine::flag(name, false, reason),
                Err(e) => CheckLine::flag(name, false, e.to_string()),
            },
            "mean" => CheckLine::le(name, traj.unwrap().max_mean_drift(), 1e-10),
            "energy" => CheckLine::le(name, traj.unwrap().energy_identity_residual(), v.energy_tol),
            "dtbarf" => {
                let t = traj.unwrap();
                let worst = t
                    .segments()
                    .iter()
                    .map(|&(a, b)| dtbarf_residual(t, a, b))
                    .try_fold(0.0f64, |acc, r| r.map(|x| acc.max(x)));
                match worst {
                    Ok(w) => CheckLine::le(name, w, v.dtbarf_tol),
                    Err(e) => CheckLine::flag(name, false, e.to_string()),
                }
            }
            "ratio" => {
                let t = traj.unwrap();
                let worst = t
                    .segments()
                    .iter()
                    .map(|&(a, b)| ratio_residual(t, a, b))
                    .try_fold(0.0f64, |acc, r| r.map(|x| acc.max(x)));
                match worst {
                    Ok(w) => CheckLine::le(name, w, v.ratio_tol),
                    Err(e) => CheckLine::flag(name, false, e.to_string()),
                }
            }
            "um-bounds" => match check_um_bounds(traj.unwrap()) {
                Ok(r) => {
                    let worst = r.worst_upper_margin.min(r.worst_lower_margin);
                    let mut l = CheckLine::le(name, -worst, 0.0);
                    l.pass = r.pass;
                    l.with_note(format!("{} samples", r.samples))
                }
                Err(e) => CheckLine::flag(name, false, e.to_string()),
            },
            "h-bounds" => match check_h_bounds(traj.unwrap()) {
                Ok(h) => {
                    let bad = h.iter().filter(|c| !c.pass).count();
                    CheckLine::le(name, bad as f64, 0.0).with_note(format!("{} samples checked", h.len()))
                }
                Err(e) => CheckLine::flag(name, false, e.to_string()),
            },
            "oscillation" => {
                let o = oscillation_summary(traj.unwrap());
                let bad = o.events.iter().filter(|e| !e.pass).count();
                let note = format!("amplitude {:.6e}, {} events", o.amplitude, o.events.len());
                if o.events.is_empty() {
                    CheckLine::flag(name, false, format!("{note}; needs constructed data with events"))
                } else {
                    CheckLine::le(name, bad as f64, 0.0).with_note(note)
                }
            }
            _ => unreachable!(),
        };
        rep.push(line);
    }
    create_dir(out)?;
    write_file(&out.join("verify.txt"), &rep.to_text())?;
    write_json(&out.join("verify.json"), &json!({"pass": rep.passed(), "checks": rep.checks}))?;
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub family: &'static str,
    pub eps_l: f64,
    pub eps_r: f64,
    pub eta: f64,
    pub fitted_rate: f64,
    pub predicted_rate: f64,
    pub rel_error: f64,
    pub residual: f64,
    pub status: String,
}

fn family_name(f: SweepFamily) -> &'static str {
    match f {
        SweepFamily::PlThreeValue => "pl_three_value",
        SweepFamily::CubicSymmetric => "cubic_symmetric",
        SweepFamily::PlCounterexample => "pl_counterexample",
    }
}

/// One sweep point: the fit and the rate it should reproduce.
pub fn sweep_point(family: SweepFamily, p: &SweepPoint, t_end: Option<f64>, cfg: &RunConfig) -> Result<(SegmentFit, f64)> {
    let go = |st: &AtomicState, t: f64| run(st, t, &cfg.opts, &mut []);
    match (family, p) {
        (SweepFamily::PlThreeValue, SweepPoint::Eps { eps_l, eps_r }) => {
            if !eps_l.is_positive() && !eps_r.is_positive() {
                let st = pl_three_value(eps_l, eps_r, -1.1, -0.1)?;
                let f0 = st.mean_force();
                let t = t_end.unwrap_or(20.0);
                let tr = go(&st, t)?;
                let obs = Observable::DistanceToLimit(vec![f0 - 1.0, -f0, f0 + 1.0]);
                Ok((fit_rate(&tr, &obs, (0.0, t))?, 1.0))
            } else {
                let st = pl_three_value(eps_l, eps_r, -1.0, 0.1)?;
                let (el, er) = (eps_l.value(), eps_r.value());
                let t = t_end.unwrap_or(100.0);
                let tr = go(&st, t)?;
                let target = (el - er) / (2.0 * (el + er));
                let window = tr.segments().first().copied().unwrap_or((0.0, t));
                Ok((fit_rate(&tr, &Observable::FbarGap(target), window)?, 2.0 * (el + er)))
            }
        }
        (SweepFamily::CubicSymmetric, SweepPoint::Eps { eps_l, eps_r }) => {
            let st = cubic_three_value(eps_l, eps_r, -0.8, 0.0)?;
            let t = t_end.unwrap_or(12.0);
            let tr = go(&st, t)?;
            let obs = Observable::DistanceToLimit(vec![-1.0, 0.0, 1.0]);
            Ok((fit_rate(&tr, &obs, (0.0, t))?, 2.0))
        }
        (SweepFamily::PlCounterexample, SweepPoint::Eta(eta)) => {
            let cap = Weight::one().sub(eta).div_int(4);
            let eighth = Weight::fraction(1, 8);
            let mu0 = if cap.value() < eighth.value() { cap } else { eighth };
            let spec = PLSpec { eta: eta.clone(), mu0, alpha0: 0.2, k: 3, alpha: AlphaSchedule::default() };
            let st = build_pl(&spec)?;
            let tr = go(&st, t_end.unwrap_or(40.0))?;
            let taus = transition_times(&tr);
            let (Some(&t0), Some(&t1)) = (taus.get(&0), taus.get(&1)) else {
                return Err(Error::Infeasible("fewer than two transitions within the horizon".into()));
            };
            let target = &truncated_targets(&spec)[1];
            Ok((fit_rate(&tr, &Observable::FbarGap(target.fbar_eq), (t0, t1))?, target.rate))
        }
        _ => Err(Error::Config("sweep point does not match the family".into())),
    }
}

/// Runs all grid points in parallel and writes `sweep.csv`; failures are
/// recorded per row.
pub fn cmd_sweep(cfg: &RunConfig, out: &Path) -> Result<Vec<SweepRow>> {
    let sw: &SweepConfig = cfg.sweep.as_ref().ok_or_else(|| Error::Config("sweep needs a [sweep] block".into()))?;
    let t_end = sw.t_end.or(cfg.t_end);
    let rows: Vec<SweepRow> = sw
        .points
        .par_iter()
        .map(|p| {
            let (eps_l, eps_r, eta) = match p {
                SweepPoint::Eps { eps_l, eps_r } => (eps_l.value(), eps_r.value(), f64::NAN),
                SweepPoint::Eta(e) => (f64::NAN, f64::NAN, e.value()),
            };
            let base = SweepRow {
                family: family_name(sw.family),
                eps_l,
                eps_r,
                eta,
                fitted_rate: f64::NAN,
                predicted_rate: f64::NAN,
                rel_error: f64::NAN,
                residual: f64::NAN,
                status: "ok".into(),
            };
            match sweep_point(sw.family, p, t_end, cfg) {
                Ok((fit, pred)) => SweepRow {
                    fitted_rate: fit.rate,
                    predicted_rate: pred,
                    rel_error: (fit.rate - pred).abs() / pred.abs(),
                    residual: fit.residual,
                    ..base
                },
                Err(e) => SweepRow { status: format!("error: {e}").replace(',', ";"), ..base },
            }
        })
        .collect();
    create_dir(out)?;
    let mut csv = String::from("family,eps_l,eps_r,eta,fitted_rate,predicted_rate,rel_error,residual,status\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
            r.family, r.eps_l, r.eps_r, r.eta, r.fitted_rate, r.predicted_rate, r.rel_error, r.residual, r.status
        ));
    }
    write_file(&out.join("sweep.csv"), &csv)?;
    Ok(rows)
}
