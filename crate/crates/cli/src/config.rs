//! Flat key = value configuration files with [sections].
//!
//! Parsing is strict: every key must be consumed by the command that reads
//! the file, unknown keys and sections are rejected, and all validation
//! errors are collected and reported together.

use snlse_core::dynamics::{BoundaryPolicy, Integrator};
use snlse_core::error::{Error, Result};
use std::collections::BTreeMap;

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
    consumed: bool,
}

/// A parsed configuration file with consumption tracking.
#[derive(Debug, Default)]
pub struct Config {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
    errors: Vec<String>,
    text: String,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config {
            text: text.to_string(),
            ..Default::default()
        };
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                if !line.ends_with(']') {
                    return Err(Error::InvalidConfig(format!(
                        "line {}: malformed section header {line:?}",
                        lineno + 1
                    )));
                }
                section = line[1..line.len() - 1].trim().to_string();
                cfg.sections.entry(section.clone()).or_default();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::InvalidConfig(format!(
                    "line {}: expected key = value, got {line:?}",
                    lineno + 1
                )));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if section.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "line {}: key {key:?} appears before any [section]",
                    lineno + 1
                )));
            }
            let sec = cfg.sections.get_mut(&section).unwrap();
            if sec.contains_key(&key) {
                return Err(Error::InvalidConfig(format!(
                    "line {}: duplicate key {key:?} in [{section}]",
                    lineno + 1
                )));
            }
            sec.insert(
                key,
                Entry {
                    value,
                    line: lineno + 1,
                    consumed: false,
                },
            );
        }
        Ok(cfg)
    }

    /// The raw text, echoed into run artifacts for reproducibility.
    pub fn raw_text(&self) -> &str {
        &self.text
    }

    fn entry(&mut self, section: &str, key: &str) -> Option<String> {
        self.sections
            .get_mut(section)
            .and_then(|s| s.get_mut(key))
            .map(|e| {
                e.consumed = true;
                e.value.clone()
            })
    }

    pub fn error(&mut self, msg: impl Into<String>) {
        self.errors.push(msg.into());
    }

    pub fn require(&mut self, section: &str, key: &str) -> Option<String> {
        let v = self.entry(section, key);
        if v.is_none() {
            self.errors.push(format!("[{section}] {key}: missing required key"));
        }
        v
    }

    pub fn optional(&mut self, section: &str, key: &str) -> Option<String> {
        self.entry(section, key)
    }

    pub fn require_f64(&mut self, section: &str, key: &str) -> Option<f64> {
        let raw = self.require(section, key)?;
        self.parse_f64(section, key, &raw)
    }

    pub fn optional_f64(&mut self, section: &str, key: &str) -> Option<f64> {
        let raw = self.optional(section, key)?;
        self.parse_f64(section, key, &raw)
    }

    fn parse_f64(&mut self, section: &str, key: &str, raw: &str) -> Option<f64> {
        match raw.parse::<f64>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.errors
                    .push(format!("[{section}] {key}: not a number: {raw:?}"));
                None
            }
        }
    }

    pub fn require_u64(&mut self, section: &str, key: &str) -> Option<u64> {
        let raw = self.require(section, key)?;
        match raw.parse::<u64>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.errors
                    .push(format!("[{section}] {key}: not a non-negative integer: {raw:?}"));
                None
            }
        }
    }

    pub fn optional_u64(&mut self, section: &str, key: &str) -> Option<u64> {
        let raw = self.optional(section, key)?;
        match raw.parse::<u64>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.errors
                    .push(format!("[{section}] {key}: not a non-negative integer: {raw:?}"));
                None
            }
        }
    }

    pub fn optional_bool(&mut self, section: &str, key: &str) -> Option<bool> {
        let raw = self.optional(section, key)?;
        match raw.as_str() {
            "true" | "yes" | "1" => Some(true),
            "false" | "no" | "0" => Some(false),
            other => {
                self.errors
                    .push(format!("[{section}] {key}: not a boolean: {other:?}"));
                None
            }
        }
    }

    pub fn policy(&mut self, section: &str) -> Option<BoundaryPolicy> {
        let raw = self.require(section, "policy")?;
        match raw.as_str() {
            "reflect" => Some(BoundaryPolicy::Reflect),
            "wavebreak" | "wave-break" => Some(BoundaryPolicy::WaveBreak),
            other => {
                self.errors.push(format!(
                    "[{section}] policy: expected reflect or wavebreak, got {other:?}"
                ));
                None
            }
        }
    }

    pub fn scheme(&mut self, section: &str) -> Option<Integrator> {
        match self.optional(section, "scheme") {
            None => Some(Integrator::SplitStep),
            Some(raw) => match raw.as_str() {
                "split" => Some(Integrator::SplitStep),
                "euler" | "euler-maruyama" => Some(Integrator::EulerMaruyama),
                other => {
                    self.errors.push(format!(
                        "[{section}] scheme: expected split or euler, got {other:?}"
                    ));
                    None
                }
            },
        }
    }

    /// Mark whole sections as consumed without reading them; `describe`
    /// uses this to accept full simulation configs.
    pub fn allow_sections(&mut self, names: &[&str]) {
        for name in names {
            if let Some(sec) = self.sections.get_mut(*name) {
                for entry in sec.values_mut() {
                    entry.consumed = true;
                }
            }
        }
    }

    /// Keys under `section` matching `prefix.<suffix>`, consumed in order.
    pub fn prefixed(&mut self, section: &str, prefix: &str) -> Vec<(String, String)> {
        let Some(sec) = self.sections.get_mut(section) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        let full = format!("{prefix}.");
        for (key, entry) in sec.iter_mut() {
            if let Some(suffix) = key.strip_prefix(&full) {
                entry.consumed = true;
                out.push((suffix.to_string(), entry.value.clone()));
            }
        }
        out
    }

    /// Fail with every accumulated problem plus any unconsumed key.
    pub fn finish(mut self, known_sections: &[&str]) -> Result<()> {
        for (section, entries) in &self.sections {
            if !known_sections.contains(&section.as_str()) {
                self.errors
                    .push(format!("[{section}]: unknown section (line context lost)"));
                continue;
            }
            for (key, entry) in entries {
                if !entry.consumed {
                    self.errors.push(format!(
                        "[{section}] {key}: unknown key (line {})",
                        entry.line
                    ));
                }
            }
        }
        if self.errors.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "{} problem(s):\n  - {}",
                self.errors.len(),
                self.errors.join("\n  - ")
            )))
        }
    }

    /// Errors collected so far (used before `finish` when construction of
    /// domain objects must be skipped).
    pub fn has_errors(&self) -> bool {
        !self.errors.is_empty()
    }
}
