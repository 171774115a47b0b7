//! Experiment reports: a deterministic JSON document per run plus a
//! human-oriented summary on stderr.  Timing never enters the JSON so that
//! identical configurations produce byte-identical reports.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;

/// One named check with its measured value and tolerance.  Numbers are
/// stored as exact decimal strings so serialization is total (infinities
/// included) and byte-stable.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub measured: String,
    pub tolerance: String,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
    pub passed: bool,
}

pub fn number(v: f64) -> String {
    format!("{v:.17e}")
}

impl Report {
    pub fn new(command: &str, seed: u64, config: BTreeMap<String, String>) -> Report {
        Report {
            command: command.into(),
            seed,
            config,
            checks: Vec::new(),
            artifacts: Vec::new(),
            passed: true,
        }
    }

    /// Record a check that passes when `measured <= tolerance`.
    pub fn check_le(&mut self, name: &str, measured: f64, tolerance: f64, detail: &str) -> bool {
        let pass = measured.is_finite() && measured <= tolerance;
        self.push(name, pass, number(measured), number(tolerance), detail);
        pass
    }

    /// Record a check that passes when `measured >= bound`.
    pub fn check_ge(&mut self, name: &str, measured: f64, bound: f64, detail: &str) -> bool {
        let pass = measured.is_finite() && measured >= bound;
        self.push(name, pass, number(measured), number(bound), detail);
        pass
    }

    /// Record a boolean check.
    pub fn check_true(&mut self, name: &str, pass: bool, detail: &str) -> bool {
        self.push(name, pass, String::from("-"), String::from("-"), detail);
        pass
    }

    /// Record a run-level numerical failure.
    pub fn failure(&mut self, name: &str, detail: &str) {
        self.push(name, false, String::from("-"), String::from("-"), detail);
    }

    fn push(&mut self, name: &str, pass: bool, measured: String, tolerance: String, detail: &str) {
        self.passed &= pass;
        self.checks.push(Check {
            name: name.into(),
            pass,
            measured,
            tolerance,
            detail: detail.into(),
        });
    }

    /// Record an artifact by file name only: reports must not depend on
    /// where the output directory happens to live.
    pub fn artifact(&mut self, path: &Path) {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        self.artifacts.push(name);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }

    /// Write `report.json` into the output directory.
    pub fn write(&self, out_dir: &Path) -> Result<PathBuf> {
        let path = out_dir.join("report.json");
        std::fs::write(&path, self.to_json())?;
        Ok(path)
    }

    /// Human summary on stderr; runtime stays out of the JSON on purpose.
    pub fn print_summary(&self, runtime: std::time::Duration) {
        for c in &self.checks {
            eprintln!(
                "[{}] {}: measured {} vs {} {}",
                if c.pass { "pass" } else { "FAIL" },
                c.name,
                c.measured,
                c.tolerance,
                if c.detail.is_empty() {
                    String::new()
                } else {
                    format!("({})", c.detail)
                }
            );
        }
        eprintln!(
            "{}: {} in {:.2?}",
            self.command,
            if self.passed {
                "all checks passed"
            } else {
                "CHECKS FAILED"
            },
            runtime
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reports_serialize_deterministically() {
        let mut cfg = BTreeMap::new();
        cfg.insert("zeta".to_string(), "1".to_string());
        cfg.insert("alpha".to_string(), "2".to_string());
        let mut r1 = Report::new("demo", 7, cfg.clone());
        r1.check_le("residual", 1e-9, 1e-8, "solve");
        r1.check_true("flag", true, "");
        let mut r2 = Report::new("demo", 7, cfg);
        r2.check_le("residual", 1e-9, 1e-8, "solve");
        r2.check_true("flag", true, "");
        assert_eq!(r1.to_json(), r2.to_json());
        assert!(r1.passed);
    }

    #[test]
    fn failing_check_flips_the_verdict() {
        let mut r = Report::new("demo", 0, BTreeMap::new());
        assert!(r.check_le("ok", 0.5, 1.0, ""));
        assert!(!r.check_le("bad", 2.0, 1.0, ""));
        assert!(!r.passed);
    }

    #[test]
    fn non_finite_measurements_fail_closed() {
        let mut r = Report::new("demo", 0, BTreeMap::new());
        assert!(!r.check_le("nan", f64::NAN, 1.0, ""));
        assert!(!r.check_ge("inf", f64::INFINITY, 1.0, ""));
        let json = r.to_json();
        assert!(json.contains("NaN") || json.contains("nan"));
    }

    #[test]
    fn json_written_to_disk() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = Report::new("demo", 3, BTreeMap::new());
        r.check_true("present", true, "");
        let path = r.write(dir.path()).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.contains("\"command\": \"demo\""));
    }
}
