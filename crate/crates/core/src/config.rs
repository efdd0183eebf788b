//! Sectioned `key = value` text files.
//!
//! ```text
//! # comment
//! [nonlinearity]
//! kind = cubic
//! [spec]
//! eta = 1/8
//! ```
//!
//! Keys before the first header land in an unnamed section. Duplicate keys and
//! duplicate sections are rejected; callers reject unknown keys with
//! [`Section::allow_only`].

use crate::error::{Error, Result};
use crate::exact::Weight;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Section {
    pub name: String,
    entries: Vec<(String, String, usize)>,
}

impl Section {
    pub fn new(name: &str) -> Self {
        Self { name: name.to_string(), entries: Vec::new() }
    }

    pub fn insert(&mut self, key: &str, value: &str) {
        self.entries.push((key.to_string(), value.to_string(), 0));
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _, _)| k.as_str())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, _)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Config(format!("[{}] is missing required key `{key}`", self.name)))
    }

    pub fn allow_only(&self, allowed: &[&str]) -> Result<()> {
        for (k, _, line) in &self.entries {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::Config(format!(
                    "unknown key `{k}` in [{}] (line {line}); allowed: {}",
                    self.name,
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }

    pub fn number(&self, key: &str) -> Result<Option<Weight>> {
        self.get(key)
            .map(|v| {
                Weight::parse(v).map_err(|_| {
                    Error::Config(format!("[{}] `{key}`: expected a number, got {v:?}", self.name))
                })
            })
            .transpose()
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>> {
        Ok(self.number(key)?.map(|w| w.value()))
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.get(key)
            .map(|v| {
                v.parse::<usize>().map_err(|_| {
                    Error::Config(format!(
                        "[{}] `{key}`: expected a non-negative integer, got {v:?}",
                        self.name
                    ))
                })
            })
            .transpose()
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>> {
        Ok(self.usize(key)?.map(|v| v as u64))
    }

    pub fn bool(&self, key: &str) -> Result<Option<bool>> {
        self.get(key)
            .map(|v| match v {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(Error::Config(format!(
                    "[{}] `{key}`: expected true/false, got {v:?}",
                    self.name
                ))),
            })
            .transpose()
    }

    /// Comma- or whitespace-separated list of numbers.
    pub fn list(&self, key: &str) -> Result<Option<Vec<Weight>>> {
        self.get(key)
            .map(|v| parse_list(v).map_err(|e| Error::Config(format!("[{}] `{key}`: {e}", self.name))))
            .transpose()
    }
}

pub fn parse_list(v: &str) -> Result<Vec<Weight>> {
    v.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(Weight::parse)
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    sections: Vec<Section>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let mut sections = vec![Section::new("")];
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| Error::Parse {
                    line: line_no,
                    msg: format!("unterminated section header {line:?}"),
                })?;
                let name = name.trim();
                if sections.iter().any(|s| s.name == name) {
                    return Err(Error::Parse { line: line_no, msg: format!("duplicate section [{name}]") });
                }
                sections.push(Section::new(name));
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("expected `key = value`, got {line:?}"),
            })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(Error::Parse { line: line_no, msg: "empty key".into() });
            }
            let sec = sections.last_mut().expect("at least the unnamed section");
            if sec.get(k).is_some() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("duplicate key `{k}` in [{}]", sec.name),
                });
            }
            sec.entries.push((k.to_string(), v.to_string(), line_no));
        }
        if sections[0].entries.is_empty() {
            sections.remove(0);
        }
        Ok(Config { sections })
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn sections(&self) -> &[Section] {
        &self.sections
    }

    pub fn allow_sections(&self, allowed: &[&str]) -> Result<()> {
        for s in &self.sections {
            if !allowed.contains(&s.name.as_str()) {
                return Err(Error::Config(format!(
                    "unknown section [{}]; allowed: {}",
                    s.name,
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let cfg = Config::parse("# top\n[spec]\neta = 1/2 # half\nK=3\n\n[run]\nt_end = 40\n").unwrap();
        let spec = cfg.section("spec").unwrap();
        assert_eq!(spec.get("eta"), Some("1/2"));
        assert_eq!(spec.usize("K").unwrap(), Some(3));
        assert_eq!(cfg.section("run").unwrap().f64("t_end").unwrap(), Some(40.0));
        assert!(spec.allow_only(&["eta"]).is_err());
        assert!(spec.allow_only(&["eta", "K"]).is_ok());
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(Config::parse("[spec\n").is_err());
        assert!(Config::parse("[a]\nnovalue\n").is_err());
        assert!(Config::parse("[a]\nx=1\nx=2\n").is_err());
        assert!(Config::parse("[a]\n[a]\n").is_err());
    }

    #[test]
    fn lists_accept_commas_and_spaces() {
        let v = parse_list("0.5, 0.45 0.405").unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(v[1], Weight::fraction(9, 20));
    }
}
