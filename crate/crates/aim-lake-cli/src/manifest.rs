use aim_lake::report::{AuditReport, Condition};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileRecord {
    pub fn new(path: impl Into<String>, data: &[u8]) -> Self {
        FileRecord { path: path.into(), sha256: format!("{:x}", Sha256::digest(data)), bytes: data.len() as u64 }
    }
}

/// Everything a run produced, written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub scenario: String,
    pub scenario_name: String,
    pub scenario_hash: String,
    pub seed: u64,
    pub workers: usize,
    pub paper_literal: bool,
    pub versions: BTreeMap<String, String>,
    pub stages: Vec<StageRecord>,
    pub files: Vec<FileRecord>,
    pub audits: Vec<AuditReport>,
    pub pass: bool,
}

impl RunManifest {
    pub fn record_file(&mut self, rec: FileRecord) {
        self.files.retain(|f| f.path != rec.path);
        self.files.push(rec);
    }

    pub fn violations(&self) -> usize {
        self.audits.iter().map(|a| a.violations().len()).sum()
    }
}

fn num(v: f64) -> String {
    if v.is_nan() {
        "n/a".into()
    } else if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.3e}")
    } else {
        format!("{v:.4}")
    }
}

/// Only meaningful against a positive bound.
fn ratio(c: &Condition) -> String {
    if c.bound > 0.0 {
        num(c.ratio())
    } else {
        "n/a".into()
    }
}

fn status(c: &Condition) -> &'static str {
    match (c.pass, c.informational) {
        (true, _) => "✓",
        (false, true) => "flagged",
        (false, false) => "✗",
    }
}

/// Markdown summary of a manifest.
pub fn report_render(m: &RunManifest) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {} ({})\n", m.scenario_name, m.command);
    let _ = writeln!(s, "- scenario: `{}`", m.scenario);
    let _ = writeln!(s, "- scenario hash: `{}`", m.scenario_hash);
    let _ = writeln!(s, "- seed: {}, workers: {}, literal recursion: {}", m.seed, m.workers, m.paper_literal);
    for (k, v) in &m.versions {
        let _ = writeln!(s, "- {k} {v}");
    }
    let verdict = if m.pass { "PASS" } else { "FAIL" };
    let _ = writeln!(s, "- verdict: **{verdict}** ({} violations)\n", m.violations());

    let _ = writeln!(s, "## Stages\n\n| stage | wall clock (s) |\n|---|---|");
    for st in &m.stages {
        let _ = writeln!(s, "| {} | {:.2} |", st.name, st.seconds);
    }
    s.push('\n');

    for a in &m.audits {
        let _ = writeln!(s, "## {}\n", a.title);
        if !a.conditions.is_empty() {
            let _ = writeln!(s, "| | condition | measured | bound | measured/bound | note |\n|---|---|---|---|---|---|");
            for c in &a.conditions {
                let note = match (&c.note, c.informational) {
                    (Some(n), true) => format!("{n} (informational)"),
                    (Some(n), false) => n.clone(),
                    (None, true) => "informational".into(),
                    (None, false) => String::new(),
                };
                let _ = writeln!(s, "| {} | {} | {} | {} | {} | {} |", status(c), c.name, num(c.measured), num(c.bound), ratio(c), note);
            }
            s.push('\n');
        }
        for (k, v) in &a.values {
            let _ = writeln!(s, "- {k} = {}", num(*v));
        }
        for n in &a.notes {
            let _ = writeln!(s, "- {n}");
        }
        if !a.values.is_empty() || !a.notes.is_empty() {
            s.push('\n');
        }
    }

    let _ = writeln!(s, "## Files\n\n| file | bytes | sha256 |\n|---|---|---|");
    for f in &m.files {
        let _ = writeln!(s, "| {} | {} | `{}` |", f.path, f.bytes, &f.sha256[..16]);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(audits: Vec<AuditReport>) -> RunManifest {
        RunManifest {
            command: "audit".into(),
            scenario: "s.toml".into(),
            scenario_name: "s".into(),
            scenario_hash: "abc".into(),
            seed: 1,
            workers: 1,
            paper_literal: false,
            versions: BTreeMap::new(),
            stages: vec![StageRecord { name: "basis".into(), seconds: 0.5 }],
            files: vec![FileRecord::new("a.csv", b"x")],
            audits,
            pass: true,
        }
    }

    #[test]
    fn marks_pass_fail_and_flagged() {
        let mut a = AuditReport::new("demo");
        a.push(Condition::le("ok", 1.0, 2.0));
        a.push(Condition::le("bad", 3.0, 2.0));
        a.push(Condition::ge("hyp", 1.0, 5.0).with_note("hypothesis").info());
        a.value("log_law_C", 0.25);
        let m = manifest(vec![a]);
        assert_eq!(m.violations(), 1);
        let r = report_render(&m);
        assert!(r.contains("| ✓ | ok | 1.0000 | 2.0000 | 0.5000 |"));
        assert!(r.contains("| ✗ | bad |"));
        assert!(r.contains("| flagged | hyp |"));
        assert!(r.contains("hypothesis (informational)"));
        assert!(r.contains("log_law_C = 0.2500"));
    }

    #[test]
    fn file_records_replace_by_path() {
        let mut m = manifest(vec![]);
        m.record_file(FileRecord::new("a.csv", b"y"));
        assert_eq!(m.files.len(), 1);
        assert_eq!(m.files[0].sha256, format!("{:x}", Sha256::digest(b"y")));
    }
}
