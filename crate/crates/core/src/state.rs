//! Finitely-valued states: a list of (weight, level) atoms.
//!
//! A level very close to the middle anchor is stored *dormant*, as a signed
//! log-offset `σ·exp(L)` from the anchor. That keeps offsets like `10⁻⁵⁰`
//! (and far below `f64::MIN_POSITIVE`) meaningful while the anchor itself
//! moves by `O(1)`.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exact::Weight;
use crate::nonlinearity::{Kind, Nonlinearity, Phase};
use crate::sum::CompensatedSum;

pub const PROMOTE_THRESHOLD: f64 = 1e-8;
pub const DEMOTE_THRESHOLD: f64 = 1e-10;

/// Label of the middle anchor level.
pub const ANCHOR_LABEL: &str = "m";

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LevelSlot {
    Active { value: f64 },
    /// `value = level(anchor) + sign · exp(log_offset)`.
    Dormant { anchor: usize, sign: f64, log_offset: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub label: String,
    pub weight: Weight,
    pub slot: LevelSlot,
}

impl Atom {
    pub fn active(label: impl Into<String>, weight: Weight, value: f64) -> Self {
        Self { label: label.into(), weight, slot: LevelSlot::Active { value } }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize)]
pub struct PhaseMeasures {
    pub nu_l: f64,
    pub nu_m: f64,
    pub nu_r: f64,
    pub eps_l: f64,
    pub eps_r: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    PiecewiseLinear,
    Cubic,
}

/// Parameters a constructor used, kept so that later diagnostics (interval
/// layout, transition bookkeeping, bounds) can be evaluated.
#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub family: Family,
    pub eta: Weight,
    pub mu0: Weight,
    pub theta: Weight,
    pub k: usize,
    pub log_alpha: Vec<f64>,
    pub subatoms: usize,
}

impl Provenance {
    /// `μ_j = μ0·ηʲ` (main plus transition-zone mass for cubic data).
    pub fn mu(&self, j: usize) -> Weight {
        self.mu0.mul(&self.eta.powi(j as u32))
    }
}

#[derive(Clone, Debug)]
pub struct AtomicState {
    atoms: Vec<Atom>,
    mu: Vec<f64>,
    nl: Arc<Nonlinearity>,
    provenance: Option<Provenance>,
}

impl PartialEq for AtomicState {
    fn eq(&self, other: &Self) -> bool {
        self.atoms == other.atoms && *self.nl == *other.nl && self.provenance == other.provenance
    }
}

impl AtomicState {
    pub fn new(nl: Arc<Nonlinearity>, atoms: Vec<Atom>) -> Result<Self> {
        let state = Self { mu: atoms.iter().map(|a| a.weight.value()).collect(), atoms, nl, provenance: None };
        state.validate()?;
        Ok(state)
    }

    /// Atoms labelled `0, 1, …` from parallel weight and value lists.
    pub fn from_levels(nl: Arc<Nonlinearity>, weights: Vec<Weight>, values: Vec<f64>) -> Result<Self> {
        if weights.len() != values.len() {
            return Err(Error::InvalidState("weights and values differ in length".into()));
        }
        let atoms = weights
            .into_iter()
            .zip(values)
            .enumerate()
            .map(|(i, (w, v))| Atom::active(i.to_string(), w, v))
            .collect();
        Self::new(nl, atoms)
    }

    /// Three atoms labelled `l`, `m`, `r`.
    pub fn three_value(nl: Arc<Nonlinearity>, weights: [Weight; 3], values: [f64; 3]) -> Result<Self> {
        let [wl, wm, wr] = weights;
        Self::new(
            nl,
            vec![
                Atom::active("l", wl, values[0]),
                Atom::active("m", wm, values[1]),
                Atom::active("r", wr, values[2]),
            ],
        )
    }

    pub fn with_provenance(mut self, p: Provenance) -> Self {
        self.provenance = Some(p);
        self
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    fn validate(&self) -> Result<()> {
        if self.atoms.is_empty() {
            return Err(Error::InvalidState("state has no atoms".into()));
        }
        for (i, a) in self.atoms.iter().enumerate() {
            if !a.weight.is_positive() || !a.weight.value().is_finite() || a.weight.value() > 1.0 {
                return Err(Error::InvalidState(format!("weight of {} must lie in (0, 1], got {}", a.label, a.weight)));
            }
            if a.label.is_empty() || a.label.chars().any(char::is_whitespace) {
                return Err(Error::InvalidState(format!("bad label {:?}", a.label)));
            }
            if self.atoms[..i].iter().any(|b| b.label == a.label) {
                return Err(Error::InvalidState(format!("duplicate label {}", a.label)));
            }
            match a.slot {
                LevelSlot::Active { value } if !value.is_finite() => {
                    return Err(Error::InvalidState(format!("level {} is not finite", a.label)));
                }
                LevelSlot::Dormant { anchor, sign, log_offset } => {
                    let ok = anchor < self.atoms.len()
                        && matches!(self.atoms[anchor].slot, LevelSlot::Active { .. })
                        && (sign == 1.0 || sign == -1.0)
                        && log_offset.is_finite();
                    if !ok {
                        return Err(Error::InvalidState(format!("dormant level {} has a bad anchor or offset", a.label)));
                    }
                }
                _ => {}
            }
        }
        let total = Weight::sum(self.atoms.iter().map(|a| &a.weight));
        let exact_one = total.exact().is_some() && total == Weight::one();
        if !exact_one && (total.value() - 1.0).abs() > 1e-14 {
            return Err(Error::InvalidState(format!("weights sum to {total}, not 1")));
        }
        for i in 1..self.atoms.len() {
            if self.compare_levels(i - 1, i) != Ordering::Less {
                return Err(Error::InvalidState(format!(
                    "levels must be strictly ascending: {} then {}",
                    self.atoms[i - 1].label, self.atoms[i].label
                )));
            }
        }
        Ok(())
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nl
    }

    pub fn nonlinearity_arc(&self) -> Arc<Nonlinearity> {
        self.nl.clone()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.mu
    }

    pub fn label(&self, i: usize) -> &str {
        &self.atoms[i].label
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.atoms.iter().position(|a| a.label == label)
    }

    pub fn anchor_index(&self) -> Option<usize> {
        self.index_of(ANCHOR_LABEL)
    }

    pub fn slot(&self, i: usize) -> LevelSlot {
        self.atoms[i].slot
    }

    pub(crate) fn set_slot(&mut self, i: usize, slot: LevelSlot) {
        self.atoms[i].slot = slot;
    }

    pub fn is_dormant(&self, i: usize) -> bool {
        matches!(self.atoms[i].slot, LevelSlot::Dormant { .. })
    }

    /// Level value, reconstructed for dormant slots (offsets below the
    /// anchor's resolution are lost here; use [`Self::offset`] for those).
    pub fn value(&self, i: usize) -> f64 {
        match self.atoms[i].slot {
            LevelSlot::Active { value } => value,
            LevelSlot::Dormant { anchor, sign, log_offset } => self.value(anchor) + sign * log_offset.exp(),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.value(i)).collect()
    }

    /// Signed offset `σ·e^L` of a dormant level from its anchor.
    pub fn offset(&self, i: usize) -> Option<f64> {
        match self.atoms[i].slot {
            LevelSlot::Dormant { sign, log_offset, .. } => Some(sign * log_offset.exp()),
            LevelSlot::Active { .. } => None,
        }
    }

    /// `(base value, offset)` with `u_i = base + offset`.
    fn split(&self, i: usize) -> (usize, f64) {
        match self.atoms[i].slot {
            LevelSlot::Active { .. } => (i, 0.0),
            LevelSlot::Dormant { anchor, sign, log_offset } => (anchor, sign * log_offset.exp()),
        }
    }

    /// `u_j − u_i`, without cancellation when both share an anchor.
    pub fn level_gap(&self, i: usize, j: usize) -> f64 {
        let (bi, oi) = self.split(i);
        let (bj, oj) = self.split(j);
        if bi == bj {
            oj - oi
        } else {
            (self.value(bj) - self.value(bi)) + (oj - oi)
        }
    }

    /// Order of `u_i` and `u_j`, decided in log space for dormant pairs so
    /// that underflowing offsets still compare correctly.
    pub fn compare_levels(&self, i: usize, j: usize) -> Ordering {
        use LevelSlot::*;
        match (self.atoms[i].slot, self.atoms[j].slot) {
            (Dormant { anchor: ai, sign: si, log_offset: li }, Dormant { anchor: aj, sign: sj, log_offset: lj })
                if ai == aj =>
            {
                if si != sj {
                    si.partial_cmp(&sj).unwrap_or(Ordering::Equal)
                } else {
                    let c = li.partial_cmp(&lj).unwrap_or(Ordering::Equal);
                    if si > 0.0 {
                        c
                    } else {
                        c.reverse()
                    }
                }
            }
            (Dormant { anchor, sign, .. }, Active { .. }) if anchor == j => {
                if sign < 0.0 {
                    Ordering::Less
                } else {
                    Ordering::Greater
                }
            }
            (Active { .. }, Dormant { anchor, sign, .. }) if anchor == i => {
                if sign > 0.0 {
                    Ordering::Less
                } else {
                    Ordering::Greater
                }
            }
            _ => {
                let g = self.level_gap(i, j);
                if g > 0.0 {
                    Ordering::Less
                } else if g < 0.0 {
                    Ordering::Greater
                } else {
                    Ordering::Equal
                }
            }
        }
    }

    pub fn is_strictly_ordered(&self) -> bool {
        (1..self.len()).all(|i| self.compare_levels(i - 1, i) == Ordering::Less)
    }

    /// Adjacent pairs out of strict order. Returns `(coalesced, first_bad)`:
    /// `coalesced` counts active pairs in the same outer phase within
    /// `ulps` units in the last place of each other, which f64 cannot keep
    /// apart once the flow has contracted them; `first_bad` is any other
    /// offending pair.
    pub fn order_defects(&self, ulps: f64) -> (usize, Option<usize>) {
        let mut coalesced = 0;
        for i in 1..self.len() {
            if self.compare_levels(i - 1, i) == Ordering::Less {
                continue;
            }
            let (a, b) = (self.value(i - 1), self.value(i));
            let ph = self.phase_of(i);
            let outer = matches!(ph, Phase::Left | Phase::Right) && self.phase_of(i - 1) == ph;
            let both_active = !self.is_dormant(i - 1) && !self.is_dormant(i);
            let ulp = f64::EPSILON * a.abs().max(b.abs());
            if outer && both_active && a - b <= ulps * ulp {
                coalesced += 1;
            } else {
                return (coalesced, Some(i));
            }
        }
        (coalesced, None)
    }

    /// `f(u_j)` for one level; dormant levels use the exact divided
    /// difference around their anchor. Returns the value and an error bound
    /// (zero unless a breakpoint separates the level from its anchor).
    pub fn force(&self, i: usize) -> (f64, f64) {
        match self.atoms[i].slot {
            LevelSlot::Active { value } => (self.nl.f(value), 0.0),
            LevelSlot::Dormant { anchor, sign, log_offset } => {
                let um = self.value(anchor);
                let d = sign * log_offset.exp();
                let (dd, exact) = self.nl.divided_difference(um, d);
                let bound = if exact { 0.0 } else { d * d * self.nl.sup_abs_fsecond(um - d.abs(), um + d.abs()) };
                (dd.mul_add(d, self.nl.f(um)), bound)
            }
        }
    }

    pub fn forces(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.force(i).0).collect()
    }

    /// `ū = Σ μ_j u_j`, compensated.
    pub fn mean(&self) -> f64 {
        let mut acc = CompensatedSum::new();
        for i in 0..self.len() {
            let (b, off) = self.split(i);
            acc.add_product(self.mu[i], self.value(b));
            if off != 0.0 {
                acc.add_product(self.mu[i], off);
            }
        }
        acc.value()
    }

    /// `f̄ = Σ μ_j f(u_j)`, compensated.
    pub fn mean_force(&self) -> f64 {
        self.mean_force_with_bound().0
    }

    /// Mean force and the accumulated bound `Σ μ_j · err_j` on dormant terms.
    pub fn mean_force_with_bound(&self) -> (f64, f64) {
        let mut acc = CompensatedSum::new();
        let mut bound = 0.0;
        for i in 0..self.len() {
            let (f, b) = self.force(i);
            acc.add_product(self.mu[i], f);
            bound += self.mu[i] * b;
        }
        (acc.value(), bound)
    }

    /// `E = Σ μ_j F(u_j)`.
    pub fn energy(&self) -> f64 {
        let mut acc = CompensatedSum::new();
        for i in 0..self.len() {
            let big_f = match self.atoms[i].slot {
                LevelSlot::Active { value } => self.nl.primitive(value),
                LevelSlot::Dormant { anchor, sign, log_offset } => {
                    let um = self.value(anchor);
                    let d = sign * log_offset.exp();
                    let (dd, _) = self.nl.primitive_divided_difference(um, d);
                    dd.mul_add(d, self.nl.primitive(um))
                }
            };
            acc.add_product(self.mu[i], big_f);
        }
        acc.value()
    }

    /// Components `f(u_j) − f̄`.
    pub fn projected_gradient(&self) -> Vec<f64> {
        let fbar = self.mean_force();
        (0..self.len()).map(|i| self.force(i).0 - fbar).collect()
    }

    pub fn phase_of(&self, i: usize) -> Phase {
        match self.atoms[i].slot {
            LevelSlot::Dormant { anchor, .. } => {
                // A dormant level shares its anchor's phase unless the anchor
                // sits on a phase boundary.
                let p = self.nl.phase_of(self.value(anchor));
                if p == Phase::Middle {
                    p
                } else {
                    self.nl.phase_of(self.value(i))
                }
            }
            LevelSlot::Active { value } => self.nl.phase_of(value),
        }
    }

    /// `(ν_l, ν_m, ν_r)`, and the out-of-range weight.
    pub fn phase_weights(&self) -> ([f64; 3], f64) {
        let mut nu = [CompensatedSum::new(); 3];
        let mut out = 0.0;
        for i in 0..self.len() {
            match self.phase_of(i) {
                Phase::Left => nu[0].add(self.mu[i]),
                Phase::Middle => nu[1].add(self.mu[i]),
                Phase::Right => nu[2].add(self.mu[i]),
                Phase::OutOfRange => out += self.mu[i],
            }
        }
        ([nu[0].value(), nu[1].value(), nu[2].value()], out)
    }

    pub fn phase_measures(&self) -> Result<PhaseMeasures> {
        let m = self.anchor_index().ok_or(Error::MissingAnchor)?;
        let ([nu_l, nu_m, nu_r], _) = self.phase_weights();
        let (mut eps_l, mut eps_r) = (CompensatedSum::new(), CompensatedSum::new());
        for i in 0..self.len() {
            if i == m || self.phase_of(i) != Phase::Middle {
                continue;
            }
            match self.compare_levels(i, m) {
                Ordering::Less => eps_l.add(self.mu[i]),
                Ordering::Greater => eps_r.add(self.mu[i]),
                Ordering::Equal => {}
            }
        }
        Ok(PhaseMeasures { nu_l, nu_m, nu_r, eps_l: eps_l.value(), eps_r: eps_r.value() })
    }

    /// Switches a dormant level to a full-precision value.
    pub fn promote(&mut self, i: usize) -> Result<()> {
        match self.atoms[i].slot {
            LevelSlot::Dormant { log_offset, .. } if log_offset >= PROMOTE_THRESHOLD.ln() => {
                self.force_promote(i);
                Ok(())
            }
            LevelSlot::Dormant { log_offset, .. } => Err(Error::IllegalTransition {
                label: self.atoms[i].label.clone(),
                reason: format!("offset {:e} below promote threshold {PROMOTE_THRESHOLD:e}", log_offset.exp()),
            }),
            LevelSlot::Active { .. } => Err(Error::IllegalTransition {
                label: self.atoms[i].label.clone(),
                reason: "level is already active".into(),
            }),
        }
    }

    pub(crate) fn force_promote(&mut self, i: usize) {
        let v = self.value(i);
        self.atoms[i].slot = LevelSlot::Active { value: v };
    }

    /// Switches an active level within the demote threshold of the anchor to
    /// a log-offset representation.
    pub fn demote(&mut self, i: usize) -> Result<()> {
        let illegal = |reason: String| Error::IllegalTransition { label: self.atoms[i].label.clone(), reason };
        let m = self.anchor_index().ok_or(Error::MissingAnchor)?;
        if i == m {
            return Err(illegal("the anchor cannot be demoted".into()));
        }
        let LevelSlot::Active { value } = self.atoms[i].slot else {
            return Err(illegal("level is already dormant".into()));
        };
        let um = self.value(m);
        let d = value - um;
        if !(d.abs() < DEMOTE_THRESHOLD) || d == 0.0 {
            return Err(illegal(format!("distance {d:e} from anchor not in (0, {DEMOTE_THRESHOLD:e})")));
        }
        if self.nl.phase_of(value) != Phase::Middle || self.nl.phase_of(um) != Phase::Middle {
            return Err(illegal("level and anchor must both be in the middle phase".into()));
        }
        self.atoms[i].slot = LevelSlot::Dormant { anchor: m, sign: d.signum(), log_offset: d.abs().ln() };
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match self.nl.kind() {
            Kind::GeneralPiecewise => {}
            k => {
                let _ = writeln!(out, "#! nonlinearity = {}", k.name());
            }
        }
        if let Some(p) = &self.provenance {
            let fam = match p.family {
                Family::PiecewiseLinear => "pl",
                Family::Cubic => "cubic",
            };
            let la: Vec<String> = p.log_alpha.iter().map(|x| format!("{x:.16e}")).collect();
            let _ = writeln!(out, "#! family = {fam}");
            let _ = writeln!(out, "#! eta = {}", p.eta);
            let _ = writeln!(out, "#! mu0 = {}", p.mu0);
            let _ = writeln!(out, "#! theta = {}", p.theta);
            let _ = writeln!(out, "#! K = {}", p.k);
            let _ = writeln!(out, "#! subatoms = {}", p.subatoms);
            let _ = writeln!(out, "#! log_alpha = {}", la.join(" "));
        }
        for a in &self.atoms {
            let level = match a.slot {
                LevelSlot::Active { value } => format!("{value:.16e}"),
                LevelSlot::Dormant { anchor, sign, log_offset } => format!(
                    "{}{}e^{:.16e}",
                    self.atoms[anchor].label,
                    if sign > 0.0 { '+' } else { '-' },
                    log_offset
                ),
            };
            let _ = writeln!(out, "{} {} {}", a.label, a.weight, level);
        }
        out
    }

    pub fn from_text(nl: Arc<Nonlinearity>, text: &str) -> Result<Self> {
        let mut meta: Vec<(String, String)> = Vec::new();
        let mut raw: Vec<(usize, String, Weight, String)> = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let t = line.trim();
            if let Some(m) = t.strip_prefix("#!") {
                let (k, v) = m.split_once('=').ok_or(Error::Parse { line: line_no, msg: "bad metadata".into() })?;
                meta.push((k.trim().to_string(), v.trim().to_string()));
                continue;
            }
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = t.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(Error::Parse { line: line_no, msg: format!("expected `label weight level`, got {t:?}") });
            }
            let w = Weight::parse(parts[1]).map_err(|e| Error::Parse { line: line_no, msg: e.to_string() })?;
            raw.push((line_no, parts[0].to_string(), w, parts[2].to_string()));
        }
        let get = |k: &str| meta.iter().find(|(key, _)| key == k).map(|(_, v)| v.as_str());
        if let Some(kind) = get("nonlinearity") {
            if kind != nl.kind().name() {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("state was written for nonlinearity {kind}, not {}", nl.kind().name()),
                });
            }
        }
        let mut atoms = Vec::with_capacity(raw.len());
        for (line, label, weight, level) in &raw {
            let slot = match level.parse::<f64>() {
                Ok(v) => LevelSlot::Active { value: v },
                Err(_) => parse_dormant(level, &raw).ok_or(Error::Parse {
                    line: *line,
                    msg: format!("bad level {level:?}"),
                })?,
            };
            atoms.push(Atom { label: label.clone(), weight: weight.clone(), slot });
        }
        let mut state = Self::new(nl, atoms)?;
        if let Some(fam) = get("family") {
            let perr = |k: &str| Error::Parse { line: 1, msg: format!("bad metadata `{k}`") };
            let family = match fam {
                "pl" => Family::PiecewiseLinear,
                "cubic" => Family::Cubic,
                _ => return Err(perr("family")),
            };
            let w = |k: &str| get(k).ok_or_else(|| perr(k)).and_then(|v| Weight::parse(v).map_err(|_| perr(k)));
            let n = |k: &str| get(k).and_then(|v| v.parse::<usize>().ok()).ok_or_else(|| perr(k));
            let log_alpha = get("log_alpha")
                .unwrap_or("")
                .split_whitespace()
                .map(|x| x.parse::<f64>().map_err(|_| perr("log_alpha")))
                .collect::<Result<Vec<_>>>()?;
            state.provenance = Some(Provenance {
                family,
                eta: w("eta")?,
                mu0: w("mu0")?,
                theta: w("theta")?,
                k: n("K")?,
                log_alpha,
                subatoms: n("subatoms")?,
            });
        }
        Ok(state)
    }
}

fn parse_dormant(level: &str, raw: &[(usize, String, Weight, String)]) -> Option<LevelSlot> {
    let pos = level.find("+e^").or_else(|| level.find("-e^"))?;
    let anchor_label = &level[..pos];
    let sign = if level.as_bytes()[pos] == b'+' { 1.0 } else { -1.0 };
    let log_offset: f64 = level[pos + 3..].parse().ok()?;
    let anchor = raw.iter().position(|(_, l, _, _)| l == anchor_label)?;
    Some(LevelSlot::Dormant { anchor, sign, log_offset })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pl() -> Arc<Nonlinearity> {
        Arc::new(Nonlinearity::piecewise_linear())
    }

    fn w(n: i64, d: i64) -> Weight {
        Weight::fraction(n, d)
    }

    fn equilibrium() -> AtomicState {
        AtomicState::three_value(pl(), [w(1, 4), w(1, 2), w(1, 4)], [-0.9, -0.1, 1.1]).unwrap()
    }

    #[test]
    fn equilibrium_statistics() {
        let s = equilibrium();
        assert!(s.mean().abs() < 1e-16);
        assert!((s.mean_force() - 0.1).abs() < 1e-16);
        assert!(s.projected_gradient().iter().all(|g| g.abs() < 1e-16));
        let pm = s.phase_measures().unwrap();
        assert_eq!((pm.nu_l, pm.nu_m, pm.nu_r), (0.25, 0.5, 0.25));
    }

    #[test]
    fn single_atom() {
        let s = AtomicState::from_levels(pl(), vec![Weight::one()], vec![0.3]).unwrap();
        assert_eq!(s.mean(), 0.3);
        assert_eq!(s.mean_force(), -0.3);
        let zero = AtomicState::from_levels(pl(), vec![Weight::one()], vec![0.0]).unwrap();
        assert_eq!(zero.energy(), 0.0);
    }

    #[test]
    fn cubic_energy_and_two_phase_gradient() {
        let c = Arc::new(Nonlinearity::cubic());
        let s = AtomicState::from_levels(c, vec![w(1, 3), w(1, 3), w(1, 3)], vec![-1.0, 0.0, 1.0]).unwrap();
        assert!((s.energy() + 1.0 / 6.0).abs() < 1e-16);
        let p = AtomicState::from_levels(pl(), vec![w(1, 2), w(1, 2)], vec![0.0, 1.0]).unwrap();
        assert_eq!(p.projected_gradient(), vec![0.0, 0.0]);
    }

    #[test]
    fn rejects_invalid_states() {
        assert!(AtomicState::from_levels(pl(), vec![w(1, 2), w(1, 4)], vec![0.0, 1.0]).is_err());
        assert!(AtomicState::from_levels(pl(), vec![w(1, 2), w(1, 2)], vec![1.0, 0.0]).is_err());
        assert!(AtomicState::from_levels(pl(), vec![w(3, 2), w(-1, 2)], vec![0.0, 1.0]).is_err());
        let s = AtomicState::from_levels(pl(), vec![w(1, 2), w(1, 2)], vec![0.0, 1.0]).unwrap();
        assert_eq!(s.phase_measures(), Err(Error::MissingAnchor));
    }

    #[test]
    fn promote_and_demote() {
        let mut s = AtomicState::three_value(pl(), [w(1, 4), w(1, 2), w(1, 4)], [-0.9, 0.0, 1.1]).unwrap();
        let atoms = vec![
            s.atoms[0].clone(),
            s.atoms[1].clone(),
            Atom { label: "0".into(), weight: w(1, 8), slot: LevelSlot::Dormant { anchor: 1, sign: 1.0, log_offset: 1e-8f64.ln() } },
            Atom { label: "r".into(), weight: w(1, 8), slot: LevelSlot::Active { value: 1.1 } },
        ];
        s = AtomicState::new(pl(), atoms).unwrap();
        s.promote(2).unwrap();
        assert!((s.value(2) - 1e-8).abs() <= 1e-14 * 1e-8);

        let mut t = AtomicState::three_value(pl(), [w(1, 4), w(1, 2), w(1, 4)], [-0.9, 0.1, 1.1]).unwrap();
        let atoms = vec![
            t.atoms[0].clone(),
            t.atoms[1].clone(),
            Atom::active("0", w(1, 8), 0.1 + 1e-12),
            Atom::active("r", w(1, 8), 1.1),
        ];
        t = AtomicState::new(pl(), atoms).unwrap();
        let before = t.value(2);
        t.demote(2).unwrap();
        let off = t.offset(2).unwrap();
        assert!((off - (before - 0.1)).abs() <= 1e-14 * off.abs());
        t.promote(2).unwrap_err();
        assert!(t.demote(3).is_err());
    }

    #[test]
    fn dormant_levels_compare_in_log_space() {
        let atoms = vec![
            Atom::active("l", w(1, 4), -1.0),
            Atom { label: "1".into(), weight: w(1, 16), slot: LevelSlot::Dormant { anchor: 3, sign: -1.0, log_offset: -2000.0 } },
            Atom { label: "3".into(), weight: w(1, 16), slot: LevelSlot::Dormant { anchor: 3, sign: -1.0, log_offset: -3000.0 } },
            Atom::active("m", w(1, 4), 0.0),
            Atom::active("r", w(3, 8), 1.0),
        ];
        assert!(AtomicState::new(pl(), atoms.clone()).is_ok());
        let mut bad = atoms;
        bad.swap(1, 2);
        assert!(AtomicState::new(pl(), bad).is_err());
    }

    #[test]
    fn text_round_trip() {
        let atoms = vec![
            Atom::active("l", w(1, 4), -1.0),
            Atom::active("m", w(1, 2), 0.1),
            Atom { label: "0".into(), weight: w(1, 8), slot: LevelSlot::Dormant { anchor: 1, sign: 1.0, log_offset: -900.5 } },
            Atom::active("r", w(1, 8), 1.0),
        ];
        let s = AtomicState::new(pl(), atoms).unwrap();
        let text = s.to_text();
        assert!(text.contains("m+e^-9.0050000000000000e2"));
        let back = AtomicState::from_text(pl(), &text).unwrap();
        assert_eq!(back, s);
        let cubic = Arc::new(Nonlinearity::cubic());
        assert!(AtomicState::from_text(cubic, &text).is_err());
    }
}
