use std::io::Write;
use std::path::Path;

use emfield_core::grid::GridSpec;
use emfield_core::pairing::PhysicalConstants;
use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

/// How `max_abs_error` is compared against `tolerance · scale`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AtMost,
    /// Contrast checks: the measured quantity must be at least the bound.
    AtLeast,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub suite: String,
    pub status: Status,
    pub max_abs_error: f64,
    pub tolerance: f64,
    pub scale: f64,
    pub comparison: Comparison,
    pub details: Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct Versions {
    pub emfield_core: &'static str,
    pub emfield_cli: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct Environment {
    pub grid: GridSpec,
    pub seed: u64,
    pub constants: PhysicalConstants,
    pub deterministic: bool,
    pub jobs: Option<usize>,
    pub versions: Versions,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub command: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub results: Value,
    /// Wall-clock seconds per suite; omitted under `--deterministic`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Vec<(String, f64)>>,
    pub environment: Environment,
}

impl VerificationReport {
    pub fn new(command: &str, environment: Environment) -> Self {
        VerificationReport {
            command: command.to_string(),
            passed: true,
            checks: Vec::new(),
            results: Value::Null,
            timings: if environment.deterministic { None } else { Some(Vec::new()) },
            environment,
        }
    }

    pub fn extend(&mut self, checks: Vec<Check>) {
        self.passed &= checks.iter().all(|c| c.status == Status::Pass);
        self.checks.extend(checks);
    }

    pub fn record_timing(&mut self, suite: &str, seconds: f64) {
        if let Some(t) = &mut self.timings {
            t.push((suite.to_string(), seconds));
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Writes JSON to `path`, or to stdout when absent.
    pub fn emit(&self, path: Option<&Path>) -> Result<(), CliError> {
        write_output(path, self.to_json().as_bytes())
    }

    pub fn summary(&self) -> String {
        let failed = self.checks.iter().filter(|c| c.status == Status::Fail).count();
        format!(
            "{}: {} checks, {} failed",
            self.command,
            self.checks.len(),
            failed
        )
    }
}

pub fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

/// Builder for a single check record.
pub struct CheckBuilder {
    suite: String,
}

impl CheckBuilder {
    pub fn new(suite: &str) -> Self {
        CheckBuilder { suite: suite.to_string() }
    }

    /// Passes when `error ≤ tolerance · scale`.
    pub fn at_most(&self, name: &str, error: f64, tolerance: f64, scale: f64, details: Value) -> Check {
        let ok = error.is_finite() && error <= tolerance * scale;
        self.make(name, ok, error, tolerance, scale, Comparison::AtMost, details)
    }

    /// Passes when `value ≥ bound · scale`.
    pub fn at_least(&self, name: &str, value: f64, bound: f64, scale: f64, details: Value) -> Check {
        let ok = value.is_finite() && value >= bound * scale;
        self.make(name, ok, value, bound, scale, Comparison::AtLeast, details)
    }

    pub fn boolean(&self, name: &str, ok: bool, details: Value) -> Check {
        self.make(name, ok, if ok { 0.0 } else { 1.0 }, 0.0, 1.0, Comparison::AtMost, details)
    }

    #[allow(clippy::too_many_arguments)]
    fn make(
        &self,
        name: &str,
        ok: bool,
        error: f64,
        tolerance: f64,
        scale: f64,
        comparison: Comparison,
        details: Value,
    ) -> Check {
        Check {
            name: name.to_string(),
            suite: self.suite.clone(),
            status: if ok { Status::Pass } else { Status::Fail },
            max_abs_error: error,
            tolerance,
            scale,
            comparison,
            details,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn env(deterministic: bool) -> Environment {
        Environment {
            grid: GridSpec::default(),
            seed: 1,
            constants: PhysicalConstants::default(),
            deterministic,
            jobs: None,
            versions: Versions {
                emfield_core: "0",
                emfield_cli: "0",
            },
        }
    }

    #[test]
    fn pass_fail_and_exit_code() {
        let b = CheckBuilder::new("s");
        let mut r = VerificationReport::new("verify", env(true));
        r.extend(vec![b.at_most("a", 1e-14, 1e-13, 1.0, Value::Null)]);
        assert_eq!(r.exit_code(), 0);
        r.extend(vec![b.at_least("b", 1e-4, 1e-3, 1.0, Value::Null)]);
        assert_eq!(r.exit_code(), 1);
        assert_eq!(r.checks[1].status, Status::Fail);
        assert_eq!(b.at_most("nan", f64::NAN, 1.0, 1.0, Value::Null).status, Status::Fail);
    }

    #[test]
    fn json_layout() {
        let mut r = VerificationReport::new("verify", env(true));
        r.extend(vec![CheckBuilder::new("tensor").at_most("x", 0.0, 1e-12, 2.0, json!({"n": 3}))]);
        let v: Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["checks"][0]["status"], "pass");
        assert_eq!(v["checks"][0]["comparison"], "at_most");
        assert_eq!(v["checks"][0]["scale"], 2.0);
        assert_eq!(v["environment"]["grid"]["angular"], "lebedev26");
        assert!(v.get("timings").is_none());
        let r = VerificationReport::new("verify", env(false));
        let v: Value = serde_json::from_str(&r.to_json()).unwrap();
        assert!(v["timings"].is_array());
    }
}
