//! Verification reports: one line per check, plus a JSON summary.

use std::fmt::Write as _;

use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl CheckLine {
    /// A check of the form `lhs ≤ rhs`.
    pub fn le(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self { name: name.into(), lhs, rhs, margin: rhs - lhs, pass: lhs <= rhs, note: String::new() }
    }

    pub fn flag(name: impl Into<String>, pass: bool, note: impl Into<String>) -> Self {
        let v = if pass { 1.0 } else { 0.0 };
        Self { name: name.into(), lhs: v, rhs: 1.0, margin: v - 1.0, pass, note: note.into() }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Report {
    pub checks: Vec<CheckLine>,
}

impl Report {
    pub fn push(&mut self, c: CheckLine) {
        self.checks.push(c);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckLine> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// `name lhs rhs margin verdict [note]`, numbers with 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let verdict = if c.pass { "PASS" } else { "FAIL" };
            let _ = write!(out, "{} {:.16e} {:.16e} {:.16e} {verdict}", c.name, c.lhs, c.rhs, c.margin);
            if !c.note.is_empty() {
                let _ = write!(out, " # {}", c.note);
            }
            out.push('\n');
        }
        out
    }
}
