//! Structured validity verdicts: a named list of checks with residuals, so
//! callers can see which constraint of a conjunction failed.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Verdict {
    pub valid: bool,
    pub checks: Vec<Check>,
}

impl Verdict {
    pub fn new() -> Self {
        Verdict {
            valid: true,
            checks: Vec::new(),
        }
    }

    /// Record a check that passes iff `residual <= tol`.
    pub fn record(&mut self, name: impl Into<String>, residual: f64, tol: f64) -> bool {
        let pass = residual.is_finite() && residual <= tol;
        self.valid &= pass;
        self.checks.push(Check {
            name: name.into(),
            residual,
            pass,
        });
        pass
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}
