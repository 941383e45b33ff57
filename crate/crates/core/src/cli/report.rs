//! JSON fit report (schema version 1).
//!
//! ```json
//! {
//!   "schema_version": 1, "method": "ss", "n": 500, "N": 5000, "p": 2,
//!   "beta": [..], "se": [..], "ci95": [[lo, hi], ..],
//!   "beta_raw": [..], "se_raw": [..],
//!   "standardization": {"mean": [..], "sd": [..]},
//!   "bandwidth": 0.41, "kfolds": 5, "theta1": [..], "theta0": [..],
//!   "propensity_gamma": [..], "propensity_columns": [1, 2],
//!   "propensity_converged": true, "seed": 7,
//!   "diagnostics": {"bandwidth_rule_flags": {..}, "excluded_rows": 0}
//! }
//! ```
//!
//! `beta`, `se` and `ci95` are on the standardized covariate scale that the
//! decision rule uses together with `standardization`; `beta_raw` and
//! `se_raw` express the same fit on raw covariates. `bandwidth`, `kfolds`,
//! `theta1` and `theta0` are omitted when the method does not use them.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::data::Standardization;
use crate::estimators::{DecisionRule, FitOutcome, Method};
use crate::kernel::BandwidthDiagnostics;

pub const FIT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub bandwidth_rule_flags: Option<BandwidthDiagnostics>,
    pub excluded_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub method: Method,
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub p: usize,
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    pub ci95: Vec<[f64; 2]>,
    pub beta_raw: Vec<f64>,
    pub se_raw: Vec<f64>,
    pub standardization: Standardization,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kfolds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta1: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<Vec<f64>>,
    pub propensity_gamma: Vec<f64>,
    /// One-based covariate columns of the propensity model.
    pub propensity_columns: Vec<usize>,
    pub propensity_converged: bool,
    pub seed: u64,
    pub diagnostics: Diagnostics,
}

impl FitReport {
    pub fn from_outcome(out: &FitOutcome, seed: u64) -> Self {
        let fit = &out.fit;
        FitReport {
            schema_version: FIT_SCHEMA_VERSION,
            method: fit.method,
            n: out.n,
            big_n: out.big_n,
            p: out.p,
            beta: fit.beta.clone(),
            se: fit.se.clone(),
            ci95: fit.ci95.iter().map(|&(lo, hi)| [lo, hi]).collect(),
            beta_raw: fit.beta_raw(),
            se_raw: fit.se_raw(),
            standardization: fit.scale.clone(),
            bandwidth: fit.bandwidth,
            kfolds: fit.kfolds,
            theta1: fit.theta1.clone(),
            theta0: fit.theta0.clone(),
            propensity_gamma: out.propensity.gamma.clone(),
            propensity_columns: out.propensity.columns.iter().map(|c| c + 1).collect(),
            propensity_converged: out.propensity.converged,
            seed,
            diagnostics: Diagnostics {
                bandwidth_rule_flags: out.bandwidth_diagnostics.clone(),
                excluded_rows: 0,
            },
        }
    }

    pub fn rule(&self) -> DecisionRule {
        DecisionRule::new(self.beta.clone(), self.standardization.clone())
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "method {}  n = {}  N = {}  p = {}",
            self.method.as_str().to_uppercase(),
            self.n,
            self.big_n,
            self.p
        );
        if let Some(h) = self.bandwidth {
            let _ = writeln!(out, "bandwidth {h:.4} (standardized scale)");
        }
        let _ = writeln!(
            out,
            "{:<10} {:>10} {:>9} {:>10} {:>10} {:>10} {:>9}",
            "term", "beta", "se", "ci95 lo", "ci95 hi", "beta_raw", "se_raw"
        );
        for j in 0..self.beta.len() {
            let name = crate::linalg::column_name(j);
            let _ = writeln!(
                out,
                "{:<10} {:>10.4} {:>9.4} {:>10.4} {:>10.4} {:>10.4} {:>9.4}",
                name, self.beta[j], self.se[j], self.ci95[j][0], self.ci95[j][1], self.beta_raw[j], self.se_raw[j]
            );
        }
        if let Some(d) = &self.diagnostics.bandwidth_rule_flags {
            if d.bias_warning {
                let _ = writeln!(out, "warning: sqrt(n) h^2 = {:.3} > 1", d.bias_rate);
            }
            if d.variance_warning {
                let _ = writeln!(out, "warning: sqrt(log n / (n h^p)) = {:.3} > 0.5", d.uniform_rate);
            }
        }
        out
    }
}
