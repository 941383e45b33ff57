//! Plain-text summaries laid out like the usual decision and coefficient
//! tables: `V0 | V (SD) PCD (SD)` per method, then
//! `Bias SD SE CP` per method and RE per coefficient.

use std::fmt::Write;

use super::SimReport;

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "  n/a".to_string(), |s| format!("{s:.2}"))
}

/// Decision-quality table, one line per report.
pub fn decision_table(reports: &[SimReport]) -> String {
    let mut out = String::new();
    let methods: Vec<_> = reports.first().map_or_else(Vec::new, |r| r.methods.iter().map(|m| m.method).collect());
    let _ = write!(out, "{:<14} {:<7} {:>6}", "mu(X)", "Model", "V0");
    for m in &methods {
        let _ = write!(out, " | {:>2}: {:<13} {:<13}", m.as_str().to_uppercase(), "V", "PCD");
    }
    out.push('\n');
    for r in reports {
        let _ = write!(
            out,
            "{:<14} {:<7} {:>6.2}",
            r.config.baseline.label(),
            r.config.model.name(),
            r.v0
        );
        for s in &r.methods {
            let _ = write!(
                out,
                " |     {:.2} ({})   {:.2} ({})",
                s.value_mean,
                opt(s.value_sd),
                s.pcd_mean,
                opt(s.pcd_sd)
            );
        }
        out.push('\n');
    }
    out
}

/// Coefficient table for one report.
pub fn coefficient_table(r: &SimReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "mu(X) = {}, model = {}, replications = {} (failed {})",
        r.config.baseline.label(),
        r.config.model.name(),
        r.replications_used,
        r.failures
    );
    let _ = write!(out, "{:>6}", "beta");
    for s in &r.methods {
        let tag = s.method.as_str().to_uppercase();
        let _ = write!(out, " | {tag:>2} {:>7} {:>6} {:>6} {:>5}", "Bias", "SD", "SE", "CP");
    }
    let _ = writeln!(out, " | {:>5}", "RE");
    for j in 0..r.beta_star.len() {
        let _ = write!(out, "{:>6.2}", r.beta_star[j]);
        for s in &r.methods {
            let c = &s.coefficients[j];
            let _ = write!(
                out,
                " |    {:>7.3} {:>6} {:>6.3} {:>5.2}",
                c.bias,
                c.sd.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}")),
                c.se_mean,
                c.cp
            );
        }
        let _ = writeln!(out, " | {:>5.2}", r.relative_efficiency[j]);
    }
    out
}
