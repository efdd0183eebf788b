//! Validated run configuration assembled from a sectioned config file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::config::{Config, Section};
use crate::constructors::{AlphaSchedule, BetaRule, CubicSpec, PLSpec, Strictness};
use crate::error::{Error, Result};
use crate::exact::Weight;
use crate::integrator::IntegratorOptions;
use crate::nonlinearity::{Kind, Nonlinearity};
use crate::state::AtomicState;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ramp {
    /// Sub-atom values spaced uniformly across each zone.
    Linear,
    /// Samples of the `exp(−1/x)` blend.
    Smooth,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Pl(PLSpec),
    Cubic { spec: CubicSpec, ramp: Ramp },
    /// State text file, resolved against the config's directory.
    StateFile(PathBuf),
    Levels { labels: Option<Vec<String>>, weights: Vec<Weight>, levels: Vec<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepFamily {
    /// Three-value PL state, rate of `|f̄ − f̄^eq|` (or of the distance to
    /// the limit when `ε_l = ε_r = 0`).
    PlThreeValue,
    /// Symmetric cubic three-value state, rate of the distance to `(−1, 0, 1)`.
    CubicSymmetric,
    /// Truncated PL construction, rate of `|f̄ − f̄_1|` on the second segment.
    PlCounterexample,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub family: SweepFamily,
    pub points: Vec<SweepPoint>,
    pub t_end: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SweepPoint {
    Eps { eps_l: Weight, eps_r: Weight },
    Eta(Weight),
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyConfig {
    pub checks: Vec<String>,
    pub radius: f64,
    pub random_states: usize,
    pub dtbarf_tol: f64,
    pub ratio_tol: f64,
    pub energy_tol: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { checks: Vec::new(), radius: 0.05, random_states: 1000, dtbarf_tol: 1e-6, ratio_tol: 1e-6, energy_tol: 1e-8 }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub nl: Arc<Nonlinearity>,
    pub source: Option<Source>,
    pub t_end: Option<f64>,
    pub opts: IntegratorOptions,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub verify: VerifyConfig,
    pub sweep: Option<SweepConfig>,
}

const SECTIONS: &[&str] = &["run", "nonlinearity", "pl", "cubic", "state", "verify", "sweep"];

fn weight(sec: &Section, key: &str) -> Result<Weight> {
    sec.number(key)?.ok_or_else(|| Error::Config(format!("[{}] is missing required key `{key}`", sec.name)))
}

fn f64_list(sec: &Section, key: &str) -> Result<Option<Vec<f64>>> {
    Ok(sec.list(key)?.map(|v| v.iter().map(Weight::value).collect()))
}

fn alpha_schedule(sec: &Section) -> Result<AlphaSchedule> {
    let explicit = f64_list(sec, "alpha")?;
    let explicit_log = f64_list(sec, "log_alpha")?;
    let beta = match (f64_list(sec, "beta")?, sec.f64("beta_first")?, sec.f64("beta_ratio")?) {
        (Some(list), None, None) => BetaRule::List(list),
        (None, first, ratio) => {
            let d = BetaRule::default();
            let BetaRule::Geometric { first: f0, ratio: r0 } = d else { unreachable!() };
            BetaRule::Geometric { first: first.unwrap_or(f0), ratio: ratio.unwrap_or(r0) }
        }
        _ => return Err(Error::Config(format!("[{}] give either `beta` or `beta_first`/`beta_ratio`", sec.name))),
    };
    match (explicit, explicit_log) {
        (Some(_), Some(_)) => Err(Error::Config(format!("[{}] give at most one of `alpha`, `log_alpha`", sec.name))),
        (Some(v), None) => Ok(AlphaSchedule::Explicit(v)),
        (None, Some(v)) => Ok(AlphaSchedule::ExplicitLog(v)),
        (None, None) => Ok(AlphaSchedule::Generated { beta, safety: sec.f64("safety")?.unwrap_or(0.5) }),
    }
}

fn pl_spec(sec: &Section) -> Result<PLSpec> {
    sec.allow_only(&["eta", "mu0", "alpha0", "K", "alpha", "log_alpha", "beta", "beta_first", "beta_ratio", "safety"])?;
    Ok(PLSpec {
        eta: weight(sec, "eta")?,
        mu0: weight(sec, "mu0")?,
        alpha0: weight(sec, "alpha0")?.value(),
        k: sec.usize("K")?.ok_or_else(|| Error::Config("[pl] is missing required key `K`".into()))?,
        alpha: alpha_schedule(sec)?,
    })
}

fn cubic_spec(sec: &Section) -> Result<(CubicSpec, Ramp)> {
    sec.allow_only(&[
        "eta", "mu0", "alpha0", "theta", "K", "alpha", "log_alpha", "safety", "strictness", "subatoms", "ramp",
    ])?;
    let strictness = match sec.get("strictness").unwrap_or("ordering") {
        "ordering" => Strictness::Ordering,
        "full" | "full_nonconvergence" => Strictness::FullNonconvergence,
        other => return Err(Error::Config(format!("[cubic] unknown strictness {other:?} (ordering | full)"))),
    };
    let ramp = match sec.get("ramp").unwrap_or("linear") {
        "linear" => Ramp::Linear,
        "smooth" => Ramp::Smooth,
        other => return Err(Error::Config(format!("[cubic] unknown ramp {other:?} (linear | smooth)"))),
    };
    let spec = CubicSpec {
        eta: weight(sec, "eta")?,
        mu0: weight(sec, "mu0")?,
        alpha0: weight(sec, "alpha0")?.value(),
        theta: sec.number("theta")?.unwrap_or_else(Weight::zero),
        k: sec.usize("K")?.ok_or_else(|| Error::Config("[cubic] is missing required key `K`".into()))?,
        alpha: alpha_schedule(sec)?,
        strictness,
        subatoms: sec.usize("subatoms")?.unwrap_or(4),
    };
    Ok((spec, ramp))
}

fn state_source(sec: &Section, base: &Path) -> Result<Source> {
    sec.allow_only(&["file", "weights", "levels", "labels"])?;
    if let Some(f) = sec.get("file") {
        if sec.get("weights").is_some() || sec.get("levels").is_some() {
            return Err(Error::Config("[state] give either `file` or `weights`/`levels`".into()));
        }
        return Ok(Source::StateFile(base.join(f)));
    }
    let weights = sec.list("weights")?.ok_or_else(|| Error::Config("[state] needs `file` or `weights`".into()))?;
    let levels = f64_list(sec, "levels")?.ok_or_else(|| Error::Config("[state] needs `levels`".into()))?;
    let labels = sec.get("labels").map(|v| {
        v.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).map(String::from).collect()
    });
    Ok(Source::Levels { labels, weights, levels })
}

fn options(sec: Option<&Section>) -> Result<IntegratorOptions> {
    let mut o = IntegratorOptions::default();
    if let Some(s) = sec {
        o.rtol = s.f64("rtol")?.unwrap_or(o.rtol);
        o.atol = s.f64("atol")?.unwrap_or(o.atol);
        o.max_step = s.f64("max_step")?.unwrap_or(o.max_step);
        o.min_step = s.f64("min_step")?.unwrap_or(o.min_step);
        o.initial_step = s.f64("initial_step")?.unwrap_or(o.initial_step);
        o.sample_every = s.f64("sample_every")?.unwrap_or(o.sample_every);
        o.check_invariants = s.bool("check_invariants")?.unwrap_or(o.check_invariants);
    }
    o.validate()?;
    Ok(o)
}

fn sweep(sec: &Section) -> Result<SweepConfig> {
    sec.allow_only(&["family", "eps", "eps_l", "eps_r", "eta", "t_end"])?;
    let family = match sec.require("family")? {
        "pl_three_value" => SweepFamily::PlThreeValue,
        "cubic_symmetric" => SweepFamily::CubicSymmetric,
        "pl_counterexample" => SweepFamily::PlCounterexample,
        other => {
            return Err(Error::Config(format!(
                "[sweep] unknown family {other:?} (pl_three_value | cubic_symmetric | pl_counterexample)"
            )))
        }
    };
    let points = match (sec.list("eps")?, sec.list("eps_l")?, sec.list("eps_r")?, sec.list("eta")?) {
        (Some(e), None, None, None) => {
            e.into_iter().map(|x| SweepPoint::Eps { eps_l: x.clone(), eps_r: x }).collect()
        }
        (None, Some(l), Some(r), None) => {
            if l.len() != r.len() {
                return Err(Error::Config("[sweep] `eps_l` and `eps_r` need equal lengths".into()));
            }
            l.into_iter().zip(r).map(|(eps_l, eps_r)| SweepPoint::Eps { eps_l, eps_r }).collect()
        }
        (None, None, None, Some(e)) => e.into_iter().map(SweepPoint::Eta).collect(),
        (None, None, None, None) => Vec::new(),
        _ => return Err(Error::Config("[sweep] give one grid: `eps`, `eps_l`+`eps_r`, or `eta`".into())),
    };
    let need_eta = family == SweepFamily::PlCounterexample;
    if points.iter().any(|p| matches!(p, SweepPoint::Eta(_)) != need_eta) {
        return Err(Error::Config("[sweep] pl_counterexample takes an `eta` grid, the others an `eps` grid".into()));
    }
    Ok(SweepConfig { family, points, t_end: sec.f64("t_end")? })
}

impl RunConfig {
    /// Parses and validates everything; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<RunConfig> {
        let cfg = Config::parse(text)?;
        cfg.allow_sections(SECTIONS)?;
        let run = cfg.section("run");
        if let Some(r) = run {
            r.allow_only(&[
                "t_end", "sample_every", "rtol", "atol", "max_step", "min_step", "initial_step", "check_invariants",
                "out", "seed",
            ])?;
        }
        let opts = options(run)?;
        let t_end = run.map(|r| r.f64("t_end")).transpose()?.flatten();
        let out = run.and_then(|r| r.get("out")).map(|p| base.join(p));
        let seed = run.map(|r| r.u64("seed")).transpose()?.flatten().unwrap_or(0);

        let mut sources = Vec::new();
        if let Some(s) = cfg.section("pl") {
            sources.push(Source::Pl(pl_spec(s)?));
        }
        if let Some(s) = cfg.section("cubic") {
            let (spec, ramp) = cubic_spec(s)?;
            sources.push(Source::Cubic { spec, ramp });
        }
        if let Some(s) = cfg.section("state") {
            sources.push(state_source(s, base)?);
        }
        if sources.len() > 1 {
            return Err(Error::Config("give at most one of [pl], [cubic], [state]".into()));
        }
        let source = sources.pop();

        let implied = match &source {
            Some(Source::Pl(_)) => Some(Kind::PiecewiseLinearN),
            Some(Source::Cubic { .. }) => Some(Kind::Cubic),
            _ => None,
        };
        let nl = match cfg.section("nonlinearity") {
            Some(sec) => {
                let nl = Nonlinearity::from_section(sec).map_err(|e| match e {
                    Error::Config(_) => e,
                    other => Error::Config(other.to_string()),
                })?;
                if implied.is_some_and(|k| k != nl.kind()) {
                    return Err(Error::Config("[nonlinearity] does not match the construction family".into()));
                }
                nl
            }
            None => match implied {
                Some(Kind::PiecewiseLinearN) => Nonlinearity::piecewise_linear(),
                Some(Kind::Cubic) => Nonlinearity::cubic(),
                _ if cfg.section("sweep").is_some() => Nonlinearity::piecewise_linear(),
                _ => return Err(Error::Config("missing [nonlinearity] section".into())),
            },
        };

        let mut verify = VerifyConfig::default();
        if let Some(v) = cfg.section("verify") {
            v.allow_only(&["checks", "radius", "random_states", "dtbarf_tol", "ratio_tol", "energy_tol"])?;
            if let Some(c) = v.get("checks") {
                verify.checks =
                    c.split(|ch: char| ch == ',' || ch.is_whitespace()).filter(|s| !s.is_empty()).map(String::from).collect();
            }
            verify.radius = v.f64("radius")?.unwrap_or(verify.radius);
            verify.random_states = v.usize("random_states")?.unwrap_or(verify.random_states);
            verify.dtbarf_tol = v.f64("dtbarf_tol")?.unwrap_or(verify.dtbarf_tol);
            verify.ratio_tol = v.f64("ratio_tol")?.unwrap_or(verify.ratio_tol);
            verify.energy_tol = v.f64("energy_tol")?.unwrap_or(verify.energy_tol);
        }
        let sweep = cfg.section("sweep").map(sweep).transpose()?;
        if let Some(t) = t_end {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::Config(format!("[run] t_end must be positive, got {t}")));
            }
        }
        Ok(RunConfig { nl: Arc::new(nl), source, t_end, opts, out, seed, verify, sweep })
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// State from a state file or inline levels; constructed sources are
    /// handled by the construct command.
    pub fn explicit_state(&self) -> Result<Option<AtomicState>> {
        match &self.source {
            Some(Source::StateFile(p)) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                Ok(Some(AtomicState::from_text(self.nl.clone(), &text)?))
            }
            Some(Source::Levels { labels, weights, levels }) => {
                if weights.len() != levels.len() {
                    return Err(Error::Config("[state] `weights` and `levels` need equal lengths".into()));
                }
                let mut st = AtomicState::from_levels(self.nl.clone(), weights.clone(), levels.clone())?;
                if let Some(l) = labels {
                    if l.len() != levels.len() {
                        return Err(Error::Config("[state] `labels` length does not match `levels`".into()));
                    }
                    let atoms = st
                        .atoms()
                        .iter()
                        .zip(l)
                        .map(|(a, name)| crate::state::Atom { label: name.clone(), ..a.clone() })
                        .collect();
                    st = AtomicState::new(self.nl.clone(), atoms)?;
                }
                Ok(Some(st))
            }
            _ => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pl_block_parses() {
        let c = RunConfig::parse("[pl]\neta = 1/2\nmu0 = 1/8\nalpha0 = 0.2\nK = 3\n[run]\nt_end = 40\n", Path::new(".")).unwrap();
        assert_eq!(c.nl.kind(), Kind::PiecewiseLinearN);
        let Some(Source::Pl(s)) = c.source else { panic!() };
        assert_eq!(s.eta, Weight::fraction(1, 2));
        assert_eq!(s.alpha, AlphaSchedule::default());
        assert_eq!(c.t_end, Some(40.0));
    }

    #[test]
    fn rejects_unknown_and_bad_values() {
        assert!(RunConfig::parse("[pl]\neta = 1/2\nbogus = 1\n", Path::new(".")).is_err());
        assert!(RunConfig::parse("[frobnicate]\n", Path::new(".")).is_err());
        assert!(RunConfig::parse("[nonlinearity]\nkind = cubic\n[run]\nt_end = 0\n", Path::new(".")).is_err());
        assert!(RunConfig::parse("[nonlinearity]\nkind = cubic\n[pl]\neta=1/2\nmu0=1/8\nalpha0=0.2\nK=1\n", Path::new("."))
            .is_err());
    }

    #[test]
    fn sweep_grids() {
        let c = RunConfig::parse("[sweep]\nfamily = pl_three_value\neps = 1e-2, 1e-3\n", Path::new(".")).unwrap();
        assert_eq!(c.sweep.unwrap().points.len(), 2);
        let e = RunConfig::parse("[sweep]\nfamily = pl_three_value\neps =\n", Path::new(".")).unwrap();
        assert!(e.sweep.unwrap().points.is_empty());
    }
}
