//! Initial data that never settle: a three-phase base state with
//! perturbation levels `(−1)ʲ·α_j` whose offsets shrink fast enough that they
//! leave the middle phase one at a time, alternately to the left and right.
//!
//! Weights are exact rationals whenever `η` and `μ0` are given exactly, and
//! every `α_j` is carried as `log α_j` so schedules far below
//! `f64::MIN_POSITIVE` remain usable.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::Weight;
use crate::nonlinearity::{Nonlinearity, Phase};
use crate::state::{Atom, AtomicState, Family, LevelSlot, Provenance, PROMOTE_THRESHOLD};
use crate::sum::CompensatedSum;

pub const PL_PARAMETERS: &str = "pl-parameters";
pub const PL_ORDERING: &str = "pl-ordering";
pub const PL_OSCILLATION: &str = "pl-oscillation";
pub const CUBIC_SMALLNESS: &str = "cubic-smallness";
pub const CUBIC_ORDERING: &str = "cubic-ordering";
pub const CUBIC_NONCONVERGENCE: &str = "cubic-nonconvergence";
pub const PHASE_PLACEMENT: &str = "phase-placement";

/// Smallest `α` representable directly; below this only `log α` is kept.
const UNDERFLOW_ALPHA: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq)]
pub enum BetaRule {
    /// `β_j = first · ratioʲ`.
    Geometric { first: f64, ratio: f64 },
    List(Vec<f64>),
}

impl Default for BetaRule {
    fn default() -> Self {
        BetaRule::Geometric { first: 0.5, ratio: 0.9 }
    }
}

impl BetaRule {
    pub fn beta(&self, j: usize) -> Option<f64> {
        match self {
            BetaRule::Geometric { first, ratio } => Some(first * ratio.powi(j as i32)),
            BetaRule::List(v) => v.get(j).copied(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AlphaSchedule {
    /// `α_1, …, α_{K−1}` given directly (`α_0` comes from the spec).
    Explicit(Vec<f64>),
    /// Same, given as natural logarithms.
    ExplicitLog(Vec<f64>),
    /// Binding bound times `safety`. `beta` is only used by the
    /// piecewise-linear family.
    Generated { beta: BetaRule, safety: f64 },
}

impl Default for AlphaSchedule {
    fn default() -> Self {
        AlphaSchedule::Generated { beta: BetaRule::default(), safety: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PLSpec {
    pub eta: Weight,
    pub mu0: Weight,
    pub alpha0: f64,
    pub k: usize,
    pub alpha: AlphaSchedule,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Strictness {
    /// Enough to order the transition times.
    Ordering,
    /// Enough for non-convergence; transition times are astronomically large.
    FullNonconvergence,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CubicSpec {
    pub eta: Weight,
    pub mu0: Weight,
    pub alpha0: f64,
    pub theta: Weight,
    pub k: usize,
    pub alpha: AlphaSchedule,
    pub strictness: Strictness,
    /// Sub-atoms per transition zone (ignored when `θ = 0`).
    pub subatoms: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub condition: &'static str,
    pub index: Option<usize>,
    pub description: String,
    /// Left and right sides of `lhs ≤ rhs`; logarithms for α-conditions.
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
}

impl ConditionCheck {
    fn new(condition: &'static str, index: Option<usize>, description: String, lhs: f64, rhs: f64) -> Self {
        Self { condition, index, description, lhs, rhs, margin: rhs - lhs, pass: lhs <= rhs }
    }

    fn strict(condition: &'static str, index: Option<usize>, description: String, lhs: f64, rhs: f64) -> Self {
        let mut c = Self::new(condition, index, description, lhs, rhs);
        c.pass = lhs < rhs;
        c
    }

    fn to_error(&self) -> Error {
        let at = self.index.map_or(String::new(), |j| format!(" at j = {j}"));
        Error::InvalidSpec {
            condition: self.condition.to_string(),
            detail: format!("{}{at}: {} > {}", self.description, self.lhs, self.rhs),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Schedule {
    pub log_alpha: Vec<f64>,
    /// `α_j`, zero where it underflows.
    pub alpha: Vec<f64>,
    pub underflow: bool,
    /// `κ_j = (3/μ_{j+1})·ln(18/μ_{j+1})`, cubic schedules only.
    pub kappa: Vec<f64>,
}

impl Schedule {
    fn from_logs(log_alpha: Vec<f64>, kappa: Vec<f64>) -> Self {
        let alpha: Vec<f64> = log_alpha.iter().map(|l| l.exp()).collect();
        let underflow = log_alpha.iter().any(|&l| l < UNDERFLOW_ALPHA.ln());
        Self { log_alpha, alpha, underflow, kappa }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Validation {
    pub checks: Vec<ConditionCheck>,
    pub schedule: Schedule,
}

impl Validation {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn first_failure(&self) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| !c.pass)
    }

    fn into_result(self) -> Result<Schedule> {
        match self.first_failure() {
            Some(c) => Err(c.to_error()),
            None => Ok(self.schedule),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScheduleRule {
    Pl { beta: BetaRule, safety: f64 },
    CubicOrdering { safety: f64 },
    CubicFull { safety: f64 },
}

fn kappa(mu_next: f64) -> f64 {
    (3.0 / mu_next) * (18.0 / mu_next).ln()
}

fn log_mu(mu0: f64, eta: f64, j: usize) -> f64 {
    mu0.ln() + j as f64 * eta.ln()
}

/// Log of the right-hand side of the binding α-condition for index `j ≥ 1`.
fn pl_ordering_log(la_prev: f64, lmu_prev: f64) -> f64 {
    la_prev + lmu_prev
}

fn pl_oscillation_log(la_prev: f64, lmu_prev: f64, beta_prev: f64) -> f64 {
    la_prev + lmu_prev + beta_prev.ln() / lmu_prev.exp()
}

fn cubic_ordering_log(la_prev: f64, lmu: f64) -> f64 {
    lmu + (la_prev - 2f64.ln()) / lmu.exp()
}

fn cubic_full_log(la_prev: f64, lmu: f64, kappa_j: f64) -> f64 {
    -(24f64.ln()) + (la_prev - 2f64.ln()) / lmu.exp() - 2.0 * kappa_j
}

/// `α_0, …, α_{K−1}` at the binding bound times the safety factor, built in
/// log space.
pub fn generate_alpha_schedule(rule: &ScheduleRule, eta: f64, mu0: f64, alpha0: f64, k: usize) -> Schedule {
    let mut logs = Vec::with_capacity(k);
    if k == 0 {
        return Schedule::from_logs(logs, Vec::new());
    }
    logs.push(alpha0.ln());
    let kap: Vec<f64> = match rule {
        ScheduleRule::Pl { .. } => Vec::new(),
        _ => (0..k).map(|j| kappa(log_mu(mu0, eta, j + 1).exp())).collect(),
    };
    for j in 1..k {
        let prev = logs[j - 1];
        let bound = match rule {
            ScheduleRule::Pl { beta, .. } => match beta.beta(j - 1) {
                Some(b) => pl_oscillation_log(prev, log_mu(mu0, eta, j - 1), b),
                None => pl_ordering_log(prev, log_mu(mu0, eta, j - 1)),
            },
            ScheduleRule::CubicOrdering { .. } => cubic_ordering_log(prev, log_mu(mu0, eta, j)),
            ScheduleRule::CubicFull { .. } => {
                let lmu = log_mu(mu0, eta, j);
                cubic_ordering_log(prev, lmu).min(cubic_full_log(prev, lmu, kap[j]))
            }
        };
        let safety = match rule {
            ScheduleRule::Pl { safety, .. }
            | ScheduleRule::CubicOrdering { safety }
            | ScheduleRule::CubicFull { safety } => *safety,
        };
        logs.push(bound + safety.ln());
    }
    Schedule::from_logs(logs, kap)
}

fn explicit_logs(alpha0: f64, sched: &AlphaSchedule, k: usize) -> Option<Result<Vec<f64>>> {
    let rest: Vec<f64> = match sched {
        AlphaSchedule::Explicit(v) => v.iter().map(|a| a.ln()).collect(),
        AlphaSchedule::ExplicitLog(v) => v.clone(),
        AlphaSchedule::Generated { .. } => return None,
    };
    if k == 0 {
        return Some(Ok(Vec::new()));
    }
    if rest.len() + 1 < k {
        return Some(Err(Error::InvalidSpec {
            condition: "alpha-schedule".into(),
            detail: format!("explicit schedule gives {} values, need α_1..α_{}", rest.len(), k - 1),
        }));
    }
    let mut logs = vec![alpha0.ln()];
    logs.extend(rest.into_iter().take(k - 1));
    if logs.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
        return Some(Err(Error::InvalidSpec {
            condition: "alpha-schedule".into(),
            detail: "α values must be positive and finite".into(),
        }));
    }
    Some(Ok(logs))
}

fn positivity(name: &'static str, what: &str, v: f64) -> ConditionCheck {
    ConditionCheck::strict(name, None, format!("{what} > 0"), 0.0, v)
}

pub fn validate_pl(spec: &PLSpec) -> Result<Validation> {
    let eta = spec.eta.value();
    let mu0 = spec.mu0.value();
    let a0 = spec.alpha0;
    let mut checks = vec![
        positivity(PL_PARAMETERS, "η", eta),
        ConditionCheck::strict(PL_PARAMETERS, None, "η < 1".into(), eta, 1.0),
        positivity(PL_PARAMETERS, "μ0", mu0),
        ConditionCheck::new(PL_PARAMETERS, None, "μ0 ≤ (1 − η)/4".into(), mu0, (1.0 - eta) / 4.0),
        positivity(PL_PARAMETERS, "α0", a0),
        ConditionCheck::strict(PL_PARAMETERS, None, "α0 < 1/4".into(), a0, 0.25),
    ];
    // Exact check of the μ0 bound when both are rational.
    if let (Some(m), Some(e)) = (spec.mu0.exact(), spec.eta.exact()) {
        let bound = (num_rational::BigRational::from_integer(1.into()) - e) / num_rational::BigRational::from_integer(4.into());
        checks[3].pass = *m <= bound;
    }
    if checks.iter().any(|c| !c.pass) {
        return Ok(Validation { checks, schedule: Schedule::default() });
    }
    let safety = match &spec.alpha {
        AlphaSchedule::Generated { safety, .. } => Some(*safety),
        _ => None,
    };
    if let Some(s) = safety {
        checks.push(ConditionCheck::strict("alpha-schedule", None, "0 < safety".into(), 0.0, s));
        checks.push(ConditionCheck::new("alpha-schedule", None, "safety ≤ 1".into(), s, 1.0));
    }
    let logs = match explicit_logs(a0, &spec.alpha, spec.k) {
        Some(r) => r?,
        None => {
            let AlphaSchedule::Generated { beta, safety } = &spec.alpha else { unreachable!() };
            generate_alpha_schedule(&ScheduleRule::Pl { beta: beta.clone(), safety: *safety }, eta, mu0, a0, spec.k).log_alpha
        }
    };
    for j in 1..logs.len() {
        let lmu = log_mu(mu0, eta, j - 1);
        checks.push(ConditionCheck::new(
            PL_ORDERING,
            Some(j - 1),
            "α_{j+1} ≤ α_j·μ_j".into(),
            logs[j],
            pl_ordering_log(logs[j - 1], lmu),
        ));
        if let AlphaSchedule::Generated { beta, .. } = &spec.alpha {
            let Some(b) = beta.beta(j - 1) else {
                return Err(Error::InvalidSpec {
                    condition: PL_OSCILLATION.into(),
                    detail: format!("no β given for j = {}", j - 1),
                });
            };
            checks.push(ConditionCheck::strict(PL_OSCILLATION, Some(j - 1), "0 < β_j".into(), 0.0, b));
            checks.push(ConditionCheck::new(
                PL_OSCILLATION,
                Some(j - 1),
                "α_{j+1} ≤ α_j·μ_j·β_j^(1/μ_j)".into(),
                logs[j],
                pl_oscillation_log(logs[j - 1], lmu, b),
            ));
        }
    }
    Ok(Validation { checks, schedule: Schedule::from_logs(logs, Vec::new()) })
}

pub fn validate_cubic(spec: &CubicSpec) -> Result<Validation> {
    let eta = spec.eta.value();
    let mu0 = spec.mu0.value();
    let a0 = spec.alpha0;
    let theta = spec.theta.value();
    let eta2 = spec.eta.mul(&spec.eta);
    let mut checks = vec![
        positivity(CUBIC_SMALLNESS, "η", eta),
        ConditionCheck::new(CUBIC_SMALLNESS, None, "η ≤ 1/8".into(), eta, 0.125),
        positivity(CUBIC_SMALLNESS, "μ0", mu0),
        ConditionCheck::new(CUBIC_SMALLNESS, None, "μ0 ≤ 1/10".into(), mu0, 0.1),
        positivity(CUBIC_SMALLNESS, "α0", a0),
        ConditionCheck::new(CUBIC_SMALLNESS, None, "α0 ≤ 1/2".into(), a0, 0.5),
        ConditionCheck::new(CUBIC_SMALLNESS, None, "θ ≥ 0".into(), 0.0, theta),
        ConditionCheck::new(CUBIC_SMALLNESS, None, "θ ≤ η²".into(), theta, eta2.value()),
    ];
    let exact_le = |a: &Weight, b: &Weight| match (a.exact(), b.exact()) {
        (Some(x), Some(y)) => Some(x <= y),
        _ => None,
    };
    if let Some(p) = exact_le(&spec.eta, &Weight::fraction(1, 8)) {
        checks[1].pass = p;
    }
    if let Some(p) = exact_le(&spec.mu0, &Weight::fraction(1, 10)) {
        checks[3].pass = p;
    }
    if let Some(p) = exact_le(&spec.theta, &eta2) {
        checks[7].pass = p;
    }
    if spec.theta.is_positive() && spec.subatoms == 0 {
        checks.push(ConditionCheck::strict("transition-zones", None, "sub-atoms per zone ≥ 1".into(), 0.0, 0.0));
    }
    if checks.iter().any(|c| !c.pass) {
        return Ok(Validation { checks, schedule: Schedule::default() });
    }
    let kap: Vec<f64> = (0..spec.k).map(|j| kappa(log_mu(mu0, eta, j + 1).exp())).collect();
    let logs = match explicit_logs(a0, &spec.alpha, spec.k) {
        Some(r) => r?,
        None => {
            let AlphaSchedule::Generated { safety, .. } = &spec.alpha else { unreachable!() };
            checks.push(ConditionCheck::strict("alpha-schedule", None, "0 < safety".into(), 0.0, *safety));
            checks.push(ConditionCheck::new("alpha-schedule", None, "safety ≤ 1".into(), *safety, 1.0));
            let rule = match spec.strictness {
                Strictness::Ordering => ScheduleRule::CubicOrdering { safety: *safety },
                Strictness::FullNonconvergence => ScheduleRule::CubicFull { safety: *safety },
            };
            generate_alpha_schedule(&rule, eta, mu0, a0, spec.k).log_alpha
        }
    };
    for j in 1..logs.len() {
        let lmu = log_mu(mu0, eta, j);
        checks.push(ConditionCheck::strict(
            "alpha-schedule",
            Some(j),
            "α_j < α_{j−1}".into(),
            logs[j],
            logs[j - 1],
        ));
        checks.push(ConditionCheck::new(
            CUBIC_ORDERING,
            Some(j),
            "α_j ≤ μ_j·(α_{j−1}/2)^(1/μ_j)".into(),
            logs[j],
            cubic_ordering_log(logs[j - 1], lmu),
        ));
        if spec.strictness == Strictness::FullNonconvergence {
            checks.push(ConditionCheck::new(
                CUBIC_NONCONVERGENCE,
                Some(j),
                "α_j ≤ (1/24)·(α_{j−1}/2)^(1/μ_j)·exp(−2κ_j)".into(),
                logs[j],
                cubic_full_log(logs[j - 1], lmu, kap[j]),
            ));
        }
    }
    Ok(Validation { checks, schedule: Schedule::from_logs(logs, kap) })
}

/// `v0` of one atom before the mean shift: a base value, or `σ·exp(L)`.
#[derive(Clone, Copy, Debug, PartialEq)]
enum V0 {
    Base(f64),
    Pert { sign: f64, log_abs: f64 },
}

impl V0 {
    fn value(self) -> f64 {
        match self {
            V0::Base(b) => b,
            V0::Pert { sign, log_abs } => sign * log_abs.exp(),
        }
    }
}

struct Raw {
    label: String,
    weight: Weight,
    v0: V0,
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Ascending raw atoms. `zone(j, i)` is the ramp value of sub-atom `i` of the
/// transition zone of group `j`, or `None` without zones.
fn raw_atoms(
    base: &Weight,
    mid: &Weight,
    eta: &Weight,
    mu0: &Weight,
    logs: &[f64],
    theta: &Weight,
    subatoms: usize,
    zone: &dyn Fn(usize, usize) -> f64,
) -> Vec<Raw> {
    let k = logs.len();
    let mu: Vec<Weight> = (0..k).map(|j| mu0.mul(&eta.powi(j as u32))).collect();
    let odd_sum = Weight::sum(mu.iter().skip(1).step_by(2));
    let even_sum = Weight::sum(mu.iter().step_by(2));
    let zones = theta.is_positive() && subatoms > 0;
    let main_w = |j: usize| if zones { mu[j].mul(&Weight::one().sub(theta)) } else { mu[j].clone() };
    let sub_w = |j: usize| mu[j].mul(theta).div_int(subatoms as i64);
    // log α_{j−2} with α_{−2} = α_{−1} = 1.
    let log_prev2 = |j: usize| if j >= 2 { logs[j - 2] } else { 0.0 };
    let sub_log = |j: usize, i: usize| {
        let r = zone(j, i).clamp(0.0, 1.0);
        log_add_exp(logs[j] + (1.0 - r).ln(), log_prev2(j) + r.ln())
    };

    let mut out = vec![Raw { label: "l".into(), weight: base.sub(&odd_sum), v0: V0::Base(-1.0) }];
    for j in (1..k).step_by(2) {
        if zones {
            for i in (0..subatoms).rev() {
                out.push(Raw { label: format!("{j}~{i}"), weight: sub_w(j), v0: V0::Pert { sign: -1.0, log_abs: sub_log(j, i) } });
            }
        }
        out.push(Raw { label: j.to_string(), weight: main_w(j), v0: V0::Pert { sign: -1.0, log_abs: logs[j] } });
    }
    out.push(Raw { label: "m".into(), weight: mid.clone(), v0: V0::Base(0.0) });
    let last_even = if k == 0 { None } else { Some(if (k - 1) % 2 == 0 { k - 1 } else { k - 2 }) };
    if let Some(top) = last_even {
        for j in (0..=top).rev().step_by(2) {
            out.push(Raw { label: j.to_string(), weight: main_w(j), v0: V0::Pert { sign: 1.0, log_abs: logs[j] } });
            if zones {
                for i in 0..subatoms {
                    out.push(Raw { label: format!("{j}~{i}"), weight: sub_w(j), v0: V0::Pert { sign: 1.0, log_abs: sub_log(j, i) } });
                }
            }
        }
    }
    out.push(Raw { label: "r".into(), weight: base.sub(&even_sum), v0: V0::Base(1.0) });
    merge_duplicates(out)
}

/// Folds atoms with identical `v0` into their predecessor.
fn merge_duplicates(raw: Vec<Raw>) -> Vec<Raw> {
    let mut out: Vec<Raw> = Vec::with_capacity(raw.len());
    for r in raw {
        match out.last_mut() {
            Some(prev) if prev.v0.value() == r.v0.value() && same_v0(prev.v0, r.v0) => {
                prev.weight = prev.weight.add(&r.weight);
            }
            _ => out.push(r),
        }
    }
    out
}

fn same_v0(a: V0, b: V0) -> bool {
    match (a, b) {
        (V0::Pert { sign: s1, log_abs: l1 }, V0::Pert { sign: s2, log_abs: l2 }) => s1 == s2 && l1 == l2,
        (V0::Base(x), V0::Base(y)) => x == y,
        (V0::Base(x), p @ V0::Pert { .. }) | (p @ V0::Pert { .. }, V0::Base(x)) => x == p.value() && x.abs() == 1.0,
    }
}

/// Shifts by the compensated mean and picks the level representation.
fn assemble(nl: Arc<Nonlinearity>, raw: Vec<Raw>, provenance: Provenance) -> Result<AtomicState> {
    let mut acc = CompensatedSum::new();
    for r in &raw {
        acc.add_product(r.weight.value(), r.v0.value());
    }
    let vbar = acc.value();
    let m = raw.iter().position(|r| r.label == "m").expect("anchor present");
    let atoms: Vec<Atom> = raw
        .into_iter()
        .map(|r| {
            let slot = match r.v0 {
                V0::Base(b) => LevelSlot::Active { value: b - vbar },
                V0::Pert { sign, log_abs } if log_abs < PROMOTE_THRESHOLD.ln() => {
                    LevelSlot::Dormant { anchor: m, sign, log_offset: log_abs }
                }
                V0::Pert { sign, log_abs } => LevelSlot::Active { value: sign * log_abs.exp() - vbar },
            };
            Atom { label: r.label, weight: r.weight, slot }
        })
        .collect();
    let state = AtomicState::new(nl, atoms)?.with_provenance(provenance);
    check_phase_placement(&state)?;
    Ok(state)
}

fn check_phase_placement(state: &AtomicState) -> Result<()> {
    for (i, a) in state.atoms().iter().enumerate() {
        let want = match a.label.as_str() {
            "l" => Phase::Left,
            "r" => Phase::Right,
            l if l.contains('~') => continue,
            _ => Phase::Middle,
        };
        if state.phase_of(i) != want {
            return Err(Error::InvalidSpec {
                condition: PHASE_PLACEMENT.into(),
                detail: format!("level {} = {} is not in the {want:?} phase", a.label, state.value(i)),
            });
        }
    }
    Ok(())
}

pub fn build_pl(spec: &PLSpec) -> Result<AtomicState> {
    let schedule = validate_pl(spec)?.into_result()?;
    let raw = raw_atoms(
        &Weight::fraction(1, 4),
        &Weight::fraction(1, 2),
        &spec.eta,
        &spec.mu0,
        &schedule.log_alpha,
        &Weight::zero(),
        0,
        &|_, _| 0.0,
    );
    let prov = Provenance {
        family: Family::PiecewiseLinear,
        eta: spec.eta.clone(),
        mu0: spec.mu0.clone(),
        theta: Weight::zero(),
        k: spec.k,
        log_alpha: schedule.log_alpha,
        subatoms: 0,
    };
    assemble(Arc::new(Nonlinearity::piecewise_linear()), raw, prov)
}

/// Cubic data with sub-atom values placed uniformly (midpoint rule) across
/// each transition zone.
pub fn build_cubic(spec: &CubicSpec) -> Result<AtomicState> {
    let n = spec.subatoms.max(1);
    build_cubic_with(spec, &|i| (i as f64 + 0.5) / n as f64)
}

fn build_cubic_with(spec: &CubicSpec, ramp_at: &dyn Fn(usize) -> f64) -> Result<AtomicState> {
    let schedule = validate_cubic(spec)?.into_result()?;
    let third = Weight::fraction(1, 3);
    let raw = raw_atoms(
        &third,
        &third,
        &spec.eta,
        &spec.mu0,
        &schedule.log_alpha,
        &spec.theta,
        spec.subatoms,
        &|_, i| ramp_at(i),
    );
    let prov = Provenance {
        family: Family::Cubic,
        eta: spec.eta.clone(),
        mu0: spec.mu0.clone(),
        theta: spec.theta.clone(),
        k: spec.k,
        log_alpha: schedule.log_alpha,
        subatoms: if spec.theta.is_positive() { spec.subatoms } else { 0 },
    };
    assemble(Arc::new(Nonlinearity::cubic()), raw, prov)
}

/// A smooth nondecreasing ramp with `Θ = 0` on `(−∞, 1−θ]` and `Θ = 1` on
/// `[1, ∞)`, built from `exp(−1/x)` blends.
pub fn smooth_ramp(theta: f64) -> impl Fn(f64) -> f64 {
    move |y: f64| {
        if theta <= 0.0 {
            return if y >= 1.0 { 1.0 } else { 0.0 };
        }
        let x = (y - (1.0 - theta)) / theta;
        let psi = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
        if x <= 0.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else {
            psi(x) / (psi(x) + psi(1.0 - x))
        }
    }
}

fn check_ramp(ramp: &dyn Fn(f64) -> f64, theta: f64) -> Result<()> {
    let lo = 1.0 - theta - 0.5;
    let hi = 1.5;
    let n = 2000;
    let mut prev = f64::NEG_INFINITY;
    for i in 0..=n {
        let y = lo + (hi - lo) * i as f64 / n as f64;
        let v = ramp(y);
        if !v.is_finite() {
            return Err(Error::InvalidRamp(format!("Θ({y}) is not finite")));
        }
        if v < prev {
            return Err(Error::InvalidRamp(format!("Θ decreases near {y}")));
        }
        if y <= 1.0 - theta && y < 1.0 && v != 0.0 {
            return Err(Error::InvalidRamp(format!("Θ({y}) = {v}, expected 0 below 1 − θ")));
        }
        if y >= 1.0 && v != 1.0 {
            return Err(Error::InvalidRamp(format!("Θ({y}) = {v}, expected 1 from 1 on")));
        }
        prev = v;
    }
    Ok(())
}

/// Samples the smooth profile `α_j + (α_{j−2} − α_j)·Θ(·)` on each transition
/// zone at `subatoms` midpoints of equal sub-intervals.
pub fn discretize_smooth_profile(ramp: &dyn Fn(f64) -> f64, spec: &CubicSpec, subatoms: usize) -> Result<AtomicState> {
    let theta = spec.theta.value();
    check_ramp(ramp, theta)?;
    if subatoms == 0 {
        return Err(Error::InvalidRamp("need at least one sample per zone".into()));
    }
    let mut s = spec.clone();
    s.subatoms = subatoms;
    let n = subatoms as f64;
    build_cubic_with(&s, &|i| ramp(1.0 - theta + theta * (i as f64 + 0.5) / n))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Target {
    pub k: usize,
    pub fbar_eq: f64,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Targets {
    pub segments: Vec<Target>,
    /// `(1 − η)/(1 + η)`.
    pub amplitude: f64,
}

/// Targets of the mean force on each inter-event segment of the untruncated
/// construction: `f̄_k = ((−1)^{k−1}/2)(1−η)/(1+η)`, rate `2μ_k/(1−η)`.
pub fn predicted_targets(spec: &PLSpec) -> Targets {
    let eta = spec.eta.value();
    let mu0 = spec.mu0.value();
    let amp = (1.0 - eta) / (1.0 + eta);
    let segments = (0..spec.k.max(1))
        .map(|k| {
            let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
            Target { k, fbar_eq: 0.5 * sign * amp, rate: 2.0 * mu0 * eta.powi(k as i32) / (1.0 - eta) }
        })
        .collect();
    Targets { segments, amplitude: amp }
}

/// Same targets for the truncated construction: only `j < K` remain, so
/// `ε_l, ε_r` are finite sums and the last segments drift further.
pub fn truncated_targets(spec: &PLSpec) -> Vec<Target> {
    let eta = spec.eta.value();
    let mu0 = spec.mu0.value();
    (0..=spec.k)
        .map(|k| {
            let (mut el, mut er) = (0.0, 0.0);
            for j in k..spec.k {
                let mu = mu0 * eta.powi(j as i32);
                if j % 2 == 1 {
                    el += mu;
                } else {
                    er += mu;
                }
            }
            let e = el + er;
            let fbar_eq = if e > 0.0 { 0.5 * (el - er) / e } else { f64::NAN };
            Target { k, fbar_eq, rate: 2.0 * e }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayoutInterval {
    pub label: String,
    pub lo: String,
    pub hi: String,
    pub lo_f64: f64,
    pub hi_f64: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
    pub level: f64,
    /// Blocks of omitted indices `j ≥ K`, carried by `l` or `r`.
    pub tail: bool,
}

/// Monotone arrangement of the constructed state on `[0, 1]`: odd blocks left
/// of the middle block, even blocks right of it, each zone at the end facing
/// the neighbouring larger-offset block.
pub fn layout_on_interval(state: &AtomicState) -> Result<Vec<LayoutInterval>> {
    let p = state
        .provenance()
        .ok_or_else(|| Error::NotConstructed("layout needs construction parameters".into()))?;
    let (c1, c2) = match p.family {
        Family::PiecewiseLinear => (Weight::fraction(1, 4), Weight::fraction(3, 4)),
        Family::Cubic => (Weight::fraction(1, 3), Weight::fraction(2, 3)),
    };
    let one = Weight::one();
    let eta = &p.eta;
    let s = p.mu0.mul(&inverse(&one.sub(&eta.mul(eta))));
    let level = |label: &str| state.index_of(label).map(|i| state.value(i));
    let mut out = Vec::new();
    let mut push = |label: &str, lo: Weight, hi: Weight, lc: bool, hc: bool, tail: bool| {
        let lv = level(label.split('~').next().unwrap_or(label));
        let lv = level(label).or(lv).unwrap_or(f64::NAN);
        out.push(LayoutInterval {
            label: label.to_string(),
            lo_f64: lo.value(),
            hi_f64: hi.value(),
            lo: lo.to_string(),
            hi: hi.to_string(),
            lo_closed: lc,
            hi_closed: hc,
            level: lv,
            tail,
        });
    };
    let k = p.k;
    let zones = p.theta.is_positive() && p.subatoms > 0;
    let n = p.subatoms.max(1) as i64;
    let first_omitted = |parity: usize| if k % 2 == parity { k } else { k + 1 };

    push("l", Weight::zero(), c1.sub(&eta.mul(&s)), true, false, false);
    for j in (1..k).step_by(2) {
        let lo = c1.sub(&s.mul(&eta.powi(j as u32)));
        let hi = c1.sub(&s.mul(&eta.powi(j as u32 + 2)));
        let mu = p.mu(j);
        if zones {
            let zlen = mu.mul(&p.theta);
            for i in (0..n).rev() {
                let a = lo.add(&zlen.mul(&Weight::fraction(n - 1 - i, n)));
                let b = lo.add(&zlen.mul(&Weight::fraction(n - i, n)));
                push(&format!("{j}~{i}"), a, b, true, false, false);
            }
            push(&j.to_string(), lo.add(&zlen), hi, true, false, false);
        } else {
            push(&j.to_string(), lo, hi, true, false, false);
        }
    }
    let j_odd = first_omitted(1).max(1);
    let tail_lo = c1.sub(&s.mul(&eta.powi(j_odd as u32)));
    if tail_lo.value() < c1.value() {
        push("l", tail_lo, c1.clone(), true, false, true);
    }
    push("m", c1.clone(), c2.clone(), true, true, false);
    let j_even = first_omitted(0);
    let tail_hi = c2.add(&s.mul(&eta.powi(j_even as u32)));
    if tail_hi.value() > c2.value() {
        push("r", c2.clone(), tail_hi, false, true, true);
    }
    let top_even = (0..k).rev().find(|j| j % 2 == 0);
    if let Some(top) = top_even {
        for j in (0..=top).rev().step_by(2) {
            let lo = c2.add(&s.mul(&eta.powi(j as u32 + 2)));
            let hi = c2.add(&s.mul(&eta.powi(j as u32)));
            let mu = p.mu(j);
            if zones {
                let zlen = mu.mul(&p.theta);
                let zstart = hi.sub(&zlen);
                push(&j.to_string(), lo, zstart.clone(), false, true, false);
                for i in 0..n {
                    let a = zstart.add(&zlen.mul(&Weight::fraction(i, n)));
                    let b = zstart.add(&zlen.mul(&Weight::fraction(i + 1, n)));
                    push(&format!("{j}~{i}"), a, b, false, true, false);
                }
            } else {
                push(&j.to_string(), lo, hi, false, true, false);
            }
        }
    }
    push("r", c2.add(&s), one, false, true, false);
    Ok(out)
}

fn inverse(w: &Weight) -> Weight {
    match w.exact() {
        Some(r) => Weight::from_ratio(r.recip()),
        None => Weight::from_f64(1.0 / w.value()),
    }
}

/// Three-value state with weights `(¼ − ε_l, ½ + ε_l + ε_r, ¼ − ε_r)` for the
/// piecewise-linear nonlinearity; `u_r` is chosen so that the mean vanishes.
pub fn pl_three_value(eps_l: &Weight, eps_r: &Weight, u_l: f64, u_m: f64) -> Result<AtomicState> {
    let q = Weight::fraction(1, 4);
    let w = [q.sub(eps_l), Weight::fraction(1, 2).add(eps_l).add(eps_r), q.sub(eps_r)];
    three_value_zero_mean(Arc::new(Nonlinearity::piecewise_linear()), w, u_l, u_m)
}

/// Cubic analogue with weights `(⅓ − ε_l, ⅓ + ε_l + ε_r, ⅓ − ε_r)`.
pub fn cubic_three_value(eps_l: &Weight, eps_r: &Weight, u_l: f64, u_m: f64) -> Result<AtomicState> {
    let t = Weight::fraction(1, 3);
    let w = [t.sub(eps_l), t.add(eps_l).add(eps_r), t.sub(eps_r)];
    three_value_zero_mean(Arc::new(Nonlinearity::cubic()), w, u_l, u_m)
}

fn three_value_zero_mean(nl: Arc<Nonlinearity>, w: [Weight; 3], u_l: f64, u_m: f64) -> Result<AtomicState> {
    if !w.iter().all(Weight::is_positive) {
        return Err(Error::InvalidState("three-value weights must be positive".into()));
    }
    let u_r = -(w[0].value() * u_l + w[1].value() * u_m) / w[2].value();
    AtomicState::three_value(nl, w, [u_l, u_m, u_r])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(n: i64, d: i64) -> Weight {
        Weight::fraction(n, d)
    }

    pub(crate) fn pl_spec(k: usize) -> PLSpec {
        PLSpec { eta: w(1, 2), mu0: w(1, 8), alpha0: 0.2, k, alpha: AlphaSchedule::default() }
    }

    fn cubic_spec(k: usize) -> CubicSpec {
        CubicSpec {
            eta: w(1, 8),
            mu0: w(1, 10),
            alpha0: 0.5,
            theta: Weight::zero(),
            k,
            alpha: AlphaSchedule::Generated { beta: BetaRule::default(), safety: 0.5 },
            strictness: Strictness::Ordering,
            subatoms: 4,
        }
    }

    #[test]
    fn pl_without_perturbations_is_three_valued() {
        let s = build_pl(&pl_spec(0)).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.mean().abs() < 1e-15);
        assert_eq!(s.atoms()[0].weight, w(1, 4));
    }

    #[test]
    fn pl_two_levels_are_middle() {
        let mut spec = pl_spec(2);
        spec.alpha = AlphaSchedule::Explicit(vec![0.2 * 0.125 * 0.5f64.powi(8)]);
        let s = build_pl(&spec).unwrap();
        for l in ["0", "1"] {
            assert_eq!(s.phase_of(s.index_of(l).unwrap()), Phase::Middle);
        }
        assert!(s.mean().abs() <= 1e-15);
        let total = Weight::sum(s.atoms().iter().map(|a| &a.weight));
        assert_eq!(total, Weight::one());
    }

    #[test]
    fn pl_rejects_heavy_mu0() {
        let mut spec = pl_spec(1);
        spec.mu0 = w(1, 5);
        match build_pl(&spec) {
            Err(Error::InvalidSpec { condition, .. }) => assert_eq!(condition, PL_PARAMETERS),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pl_generated_schedule_values() {
        let sched = generate_alpha_schedule(
            &ScheduleRule::Pl { beta: BetaRule::default(), safety: 0.5 },
            0.5,
            0.125,
            0.2,
            3,
        );
        assert!((sched.alpha[1] - 0.5 * 0.2 * 0.125 * 0.5f64.powi(8)).abs() < 1e-18);
        assert!((sched.alpha[1] - 4.8828125e-5).abs() < 1e-15);
        let want2 = 0.5 * sched.alpha[1] * 0.0625 * 0.45f64.powi(16);
        assert!((sched.alpha[2] / want2 - 1.0).abs() < 1e-12);
        let one = generate_alpha_schedule(&ScheduleRule::CubicOrdering { safety: 0.5 }, 0.125, 0.1, 0.5, 1);
        assert_eq!(one.alpha, vec![0.5]);
    }

    #[test]
    fn kappa_value() {
        assert!((kappa(0.1) - 30.0 * 180f64.ln()).abs() < 1e-12);
        assert!((kappa(0.1) - 155.78).abs() < 0.01);
    }

    #[test]
    fn cubic_builds_and_bounds_the_mean_shift() {
        let s = build_cubic(&cubic_spec(1)).unwrap();
        let m = s.index_of("m").unwrap();
        assert!(s.value(m).abs() <= 0.1);
        assert!(s.mean().abs() <= 1e-15);
    }

    #[test]
    fn cubic_theta_at_eta_squared_is_accepted() {
        let mut spec = cubic_spec(2);
        spec.theta = w(1, 64);
        let s = build_cubic(&spec).unwrap();
        assert!(s.index_of("0~0").is_some());
        let mut over = spec.clone();
        over.theta = w(1, 63);
        assert!(build_cubic(&over).is_err());
    }

    #[test]
    fn cubic_names_the_violated_ordering_condition() {
        let mut spec = cubic_spec(2);
        spec.alpha = AlphaSchedule::Explicit(vec![1e-3]);
        match build_cubic(&spec) {
            Err(Error::InvalidSpec { condition, .. }) => assert_eq!(condition, CUBIC_ORDERING),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn three_value_helpers_have_zero_mean() {
        let e = Weight::parse("1e-2").unwrap();
        let s = pl_three_value(&e, &e, -1.0, 0.1).unwrap();
        assert!(s.mean().abs() < 1e-16);
        assert_eq!(s.atoms()[1].weight, w(13, 25));
        let c = cubic_three_value(&Weight::zero(), &Weight::zero(), -0.9, 0.1).unwrap();
        assert!((c.value(2) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn targets() {
        let t = predicted_targets(&pl_spec(3));
        assert!((t.segments[0].fbar_eq + 1.0 / 6.0).abs() < 1e-15);
        assert!((t.segments[1].fbar_eq - 1.0 / 6.0).abs() < 1e-15);
        assert!((t.segments[0].rate - 0.5).abs() < 1e-15);
        let mut s = pl_spec(3);
        s.eta = w(1, 8);
        assert!((predicted_targets(&s).amplitude - 7.0 / 9.0).abs() < 1e-15);
        let tr = truncated_targets(&pl_spec(3));
        assert!((tr[1].fbar_eq - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn full_strictness_underflows_gracefully() {
        let mut spec = cubic_spec(2);
        spec.strictness = Strictness::FullNonconvergence;
        let v = validate_cubic(&spec).unwrap();
        assert!(v.passed());
        assert!(v.schedule.underflow);
        assert!(v.schedule.log_alpha[1].is_finite());
        assert!((v.schedule.kappa[0] - 240.0 * 1440f64.ln()).abs() < 1e-9);
        let s = build_cubic(&spec).unwrap();
        assert!(s.is_dormant(s.index_of("1").unwrap()));
    }

    #[test]
    fn smooth_profile_limits() {
        let spec = cubic_spec(2);
        let a = discretize_smooth_profile(&smooth_ramp(0.0), &spec, 4).unwrap();
        assert_eq!(a, build_cubic(&spec).unwrap());
        let mut z = spec.clone();
        z.theta = w(1, 100);
        let one = discretize_smooth_profile(&smooth_ramp(0.01), &z, 1).unwrap();
        assert_eq!(one.len(), build_cubic(&spec).unwrap().len() + 2);
        assert!(discretize_smooth_profile(&|y: f64| 1.0 - y, &z, 2).is_err());
    }

    #[test]
    fn layout_partitions_unit_interval() {
        let s = build_pl(&pl_spec(3)).unwrap();
        let lay = layout_on_interval(&s).unwrap();
        let m = lay.iter().find(|i| i.label == "m").unwrap();
        assert_eq!((m.lo.as_str(), m.hi.as_str()), ("1/4", "3/4"));
        let zero = lay.iter().find(|i| i.label == "0").unwrap();
        assert_eq!(zero.hi, "11/12");
        let mut sorted: Vec<&LayoutInterval> = lay.iter().collect();
        sorted.sort_by(|a, b| a.lo_f64.total_cmp(&b.lo_f64));
        assert_eq!(sorted[0].lo_f64, 0.0);
        for w in sorted.windows(2) {
            assert_eq!(w[0].hi, w[1].lo);
        }
        assert_eq!(sorted.last().unwrap().hi, "1");
        for i in &lay {
            let idx = s.index_of(&i.label).unwrap();
            let total = i.hi_f64 - i.lo_f64;
            assert!(total > 0.0, "{}", i.label);
            let _ = idx;
        }
    }
}
