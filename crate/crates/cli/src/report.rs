use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub check: String,
    /// Name of the identity or property being verified.
    pub paper_ref: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub regime: String,
    pub params: BTreeMap<String, Value>,
}

impl Check {
    pub fn new(check: &str, identity: &str, residual: f64, tolerance: f64, regime: &str) -> Self {
        Self {
            check: check.to_string(),
            paper_ref: identity.to_string(),
            residual,
            tolerance,
            // NaN residuals fail
            pass: residual <= tolerance,
            regime: regime.to_string(),
            params: BTreeMap::new(),
        }
    }

    pub fn param(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), v.into());
        self
    }
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema: u32,
    pub command: String,
    pub config: Value,
    pub checks: Vec<Check>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<Diagnostic>,
}

#[derive(Debug, Serialize)]
pub struct Diagnostic {
    pub kind: String,
    pub message: String,
}

impl Report {
    pub fn new(command: &str, config: Value, checks: Vec<Check>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Self { schema: SCHEMA, command: command.to_string(), config, checks, pass, error: None }
    }

    pub fn failed(command: &str, config: Value, kind: &str, message: String) -> Self {
        Self {
            schema: SCHEMA,
            command: command.to_string(),
            config,
            checks: Vec::new(),
            pass: false,
            error: Some(Diagnostic { kind: kind.to_string(), message }),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("check,regime,residual,tolerance,pass\n");
        for c in &self.checks {
            let _ = writeln!(s, "{},{},{:e},{:e},{}", c.check, c.regime, c.residual, c.tolerance, c.pass);
        }
        s
    }
}
