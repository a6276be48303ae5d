//! Measured-versus-bound audit records.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
    /// Reported but excluded from the overall verdict.
    #[serde(default)]
    pub informational: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Condition {
    /// `measured ≤ bound`.
    pub fn le(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Condition { name: name.into(), measured, bound, pass: measured <= bound, informational: false, note: None }
    }

    /// `measured ≥ bound`.
    pub fn ge(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Condition { name: name.into(), measured, bound, pass: measured >= bound, informational: false, note: None }
    }

    pub fn flag(name: impl Into<String>, pass: bool) -> Self {
        let v = if pass { 1.0 } else { 0.0 };
        Condition { name: name.into(), measured: v, bound: 1.0, pass, informational: false, note: None }
    }

    pub fn info(mut self) -> Self {
        self.informational = true;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// `measured / bound`, or `NaN` for a zero bound.
    pub fn ratio(&self) -> f64 {
        if self.bound != 0.0 {
            self.measured / self.bound
        } else {
            f64::NAN
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub title: String,
    pub conditions: Vec<Condition>,
    #[serde(default)]
    pub values: BTreeMap<String, f64>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl AuditReport {
    pub fn new(title: impl Into<String>) -> Self {
        AuditReport { title: title.into(), ..Default::default() }
    }

    pub fn push(&mut self, c: Condition) {
        self.conditions.push(c);
    }

    pub fn value(&mut self, key: impl Into<String>, v: f64) {
        self.values.insert(key.into(), v);
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn extend(&mut self, other: AuditReport) {
        self.conditions.extend(other.conditions);
        self.values.extend(other.values);
        self.notes.extend(other.notes);
    }

    /// Failed conditions that count toward the verdict.
    pub fn violations(&self) -> Vec<&Condition> {
        self.conditions.iter().filter(|c| !c.pass && !c.informational).collect()
    }

    pub fn all_pass(&self) -> bool {
        self.violations().is_empty()
    }
}
