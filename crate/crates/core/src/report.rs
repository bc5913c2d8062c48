//! Machine-readable run outputs: the per-check summary map and CSV writers.
//!
//! All output is deterministic for a fixed seed: maps are ordered, floats are
//! serialized by value, and nothing time- or host-dependent is recorded.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::game::GameRealization;

/// Outcome of one configured check.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CheckResult {
    /// Measured quantity (estimate, max residual, ...).
    pub value: f64,
    /// Reference the value is compared against.
    pub reference: f64,
    /// Signed margin in the check's own convention.
    pub margin: f64,
    /// Statistical error of the margin; 0 for deterministic checks.
    pub stderr: f64,
    pub pass: bool,
}

/// Solver-level facts echoed into the summary.
#[derive(Clone, Debug, Serialize)]
pub struct SolverSummary {
    pub mode: String,
    /// Raw game value at `(0, x0)`.
    pub value: f64,
    /// Auxiliary-coordinate value at `(0, x0)`.
    pub qbar0: f64,
    /// Monte Carlo standard error when the mode is `mc`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    /// Absolute risk aversion of the criterion at the computed value.
    pub risk_aversion_at_value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub seed: u64,
    pub solver: SolverSummary,
    pub checks: BTreeMap<String, CheckResult>,
    pub all_passed: bool,
}

impl Summary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serialization cannot fail")
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}

/// Detail document for one check, written next to the summary.
pub fn write_detail<T: Serialize>(dir: &Path, name: &str, detail: &T) -> Result<()> {
    let body = serde_json::to_string_pretty(detail).expect("detail serialization cannot fail");
    std::fs::write(dir.join(format!("{name}.json")), body + "\n")?;
    Ok(())
}

/// Per-path realization rows: `seed,sigma,tau,regime,payoff`.
pub fn write_paths_csv<W: Write>(mut w: W, realizations: &[GameRealization]) -> Result<()> {
    writeln!(w, "seed,sigma,tau,regime,payoff")?;
    for r in realizations {
        let regime = match r.regime {
            crate::game::Regime::Terminal => "terminal",
            crate::game::Regime::LowerStopped => "lower",
            crate::game::Regime::UpperStopped => "upper",
        };
        writeln!(
            w,
            "{},{:.16e},{:.16e},{},{:.16e}",
            r.seed, r.sigma, r.tau, regime, r.payoff
        )?;
    }
    Ok(())
}
