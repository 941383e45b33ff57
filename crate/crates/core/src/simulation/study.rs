use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::standardize;
use crate::error::{Error, Result};
use crate::estimators::{fit_np, fit_ss, fit_tr, BandwidthChoice, Method, RegimeFit};
use crate::kernel::{default_grid, fit_folded, select_bandwidth, KernelConfig, QSurface, TrainingSample};
use crate::propensity::{fit_propensity, PropensityOptions};

use super::{compute_truth, generate_replication, pcd, value_of_rule, SimConfig, TruthSet};

pub const SCHEMA_VERSION: u32 = 1;
/// Largest tolerated fraction of failed replications.
const MAX_FAILURE_RATE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: Method,
    /// Coefficients on the raw covariate scale.
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    pub covered: Vec<bool>,
    pub pcd: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub rep: usize,
    pub bandwidth: f64,
    pub methods: Vec<MethodRow>,
}

impl ReplicationRow {
    pub fn method(&self, m: Method) -> Option<&MethodRow> {
        self.methods.iter().find(|r| r.method == m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefSummary {
    pub beta_star: f64,
    pub bias: f64,
    /// Empirical SD of the estimates; `None` with a single replication.
    pub sd: Option<f64>,
    pub se_mean: f64,
    pub se_median: f64,
    pub cp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub value_mean: f64,
    pub value_sd: Option<f64>,
    pub value_mcse: Option<f64>,
    pub pcd_mean: f64,
    pub pcd_sd: Option<f64>,
    pub pcd_mcse: Option<f64>,
    pub coefficients: Vec<CoefSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub schema_version: u32,
    pub config: SimConfig,
    pub v0: f64,
    pub beta_star: Vec<f64>,
    pub beta_star_mcse: Vec<f64>,
    pub replications_used: usize,
    pub failures: usize,
    pub failure_messages: Vec<String>,
    pub methods: Vec<MethodSummary>,
    /// Per-coefficient `sum (b_TR - b*)^2 / sum (b_SS - b*)^2`.
    pub relative_efficiency: Vec<f64>,
    pub rows: Vec<ReplicationRow>,
}

impl SimReport {
    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }
}

fn method_row(fit: &RegimeFit, truth: &TruthSet, eval: &[Vec<f64>]) -> MethodRow {
    let beta = fit.beta_raw();
    let se = fit.se_raw();
    let ci = crate::estimators::wald_ci(&beta, &se, 0.95);
    let covered = ci
        .iter()
        .zip(&truth.beta_star)
        .map(|((lo, hi), b)| lo <= b && b <= hi)
        .collect();
    MethodRow {
        method: fit.method,
        pcd: pcd(&beta, &truth.beta_star, eval.iter().map(Vec::as_slice)),
        value: value_of_rule(&beta, truth),
        beta,
        se,
        covered,
    }
}

fn run_replication(cfg: &SimConfig, truth: &TruthSet, rep: usize) -> Result<ReplicationRow> {
    let raw = generate_replication(cfg, rep)?;
    let eval: Vec<Vec<f64>> = raw.labeled().iter().chain(raw.unlabeled()).map(|o| o.x.clone()).collect();
    let ds = standardize(&raw)?;
    let prop_opts = PropensityOptions {
        clip_eps: cfg.clip_eps,
        ..Default::default()
    };
    let prop = fit_propensity(&ds, &prop_opts)?;
    let seed = cfg.seed.wrapping_add(rep as u64);

    let sample = Arc::new(TrainingSample::from_dataset(&ds));
    let h = match cfg.bandwidth {
        BandwidthChoice::Fixed(h) => h,
        BandwidthChoice::Auto => {
            let grid = cfg.grid.clone().unwrap_or_else(|| default_grid(ds.n(), ds.p()));
            select_bandwidth(&sample, cfg.kfolds, &grid, seed)?.bandwidth
        }
    };
    let config = KernelConfig::new(h)?;

    let mut methods = vec![method_row(&fit_tr(&ds, &prop)?, truth, &eval)];
    if cfg.include_np {
        let surface = QSurface::fit(Arc::clone(&sample), config);
        methods.push(method_row(&fit_np(&ds, &surface, &prop)?, truth, &eval));
    }
    let folded = fit_folded(&sample, config, cfg.kfolds, seed)?;
    methods.push(method_row(&fit_ss(&ds, &folded, &prop)?, truth, &eval));
    Ok(ReplicationRow {
        rep,
        bandwidth: h,
        methods,
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sd(v: &[f64]) -> Option<f64> {
    (v.len() > 1).then(|| {
        let m = mean(v);
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    })
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len();
    if k % 2 == 1 {
        s[k / 2]
    } else {
        0.5 * (s[k / 2 - 1] + s[k / 2])
    }
}

fn summarize(method: Method, rows: &[ReplicationRow], beta_star: &[f64]) -> MethodSummary {
    let picked: Vec<&MethodRow> = rows.iter().filter_map(|r| r.method(method)).collect();
    let values: Vec<f64> = picked.iter().map(|r| r.value).collect();
    let pcds: Vec<f64> = picked.iter().map(|r| r.pcd).collect();
    let reps = picked.len() as f64;
    let coefficients = beta_star
        .iter()
        .enumerate()
        .map(|(j, &b)| {
            let est: Vec<f64> = picked.iter().map(|r| r.beta[j]).collect();
            let se: Vec<f64> = picked.iter().map(|r| r.se[j]).collect();
            CoefSummary {
                beta_star: b,
                bias: mean(&est) - b,
                sd: sd(&est),
                se_mean: mean(&se),
                se_median: median(&se),
                cp: picked.iter().filter(|r| r.covered[j]).count() as f64 / reps,
            }
        })
        .collect();
    MethodSummary {
        method,
        value_mean: mean(&values),
        value_sd: sd(&values),
        value_mcse: sd(&values).map(|s| s / reps.sqrt()),
        pcd_mean: mean(&pcds),
        pcd_sd: sd(&pcds),
        pcd_mcse: sd(&pcds).map(|s| s / reps.sqrt()),
        coefficients,
    }
}

fn relative_efficiency(rows: &[ReplicationRow], beta_star: &[f64]) -> Vec<f64> {
    (0..beta_star.len())
        .map(|j| {
            let sq = |m: Method| -> f64 {
                rows.iter()
                    .filter_map(|r| r.method(m))
                    .map(|r| (r.beta[j] - beta_star[j]).powi(2))
                    .sum()
            };
            sq(Method::Tr) / sq(Method::Ss)
        })
        .collect()
}

/// Runs every replication (in parallel, each on its own random stream) and
/// aggregates the results in replication order.
pub fn run_study(cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    let truth = compute_truth(cfg)?;
    run_study_with_truth(cfg, &truth)
}

pub(crate) fn run_study_with_truth(cfg: &SimConfig, truth: &TruthSet) -> Result<SimReport> {
    let outcomes: Vec<Result<ReplicationRow>> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| run_replication(cfg, truth, rep))
        .collect();

    let mut rows = Vec::with_capacity(outcomes.len());
    let mut failure_messages = Vec::new();
    for (rep, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok(row) => rows.push(row),
            Err(e) => failure_messages.push(format!("replication {rep}: {e}")),
        }
    }
    let failures = failure_messages.len();
    if rows.is_empty() || failures as f64 > MAX_FAILURE_RATE * cfg.replications as f64 {
        return Err(Error::TooManyFailures {
            failed: failures,
            total: cfg.replications,
            first: failure_messages.first().cloned().unwrap_or_default(),
        });
    }

    let mut methods = vec![summarize(Method::Tr, &rows, &truth.beta_star)];
    if cfg.include_np {
        methods.push(summarize(Method::Np, &rows, &truth.beta_star));
    }
    methods.push(summarize(Method::Ss, &rows, &truth.beta_star));

    Ok(SimReport {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        v0: truth.v0,
        beta_star: truth.beta_star.clone(),
        beta_star_mcse: truth.beta_star_mcse.clone(),
        replications_used: rows.len(),
        failures,
        failure_messages,
        methods,
        relative_efficiency: relative_efficiency(&rows, &truth.beta_star),
        rows,
    })
}
