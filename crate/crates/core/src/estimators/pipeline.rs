use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{standardize, Dataset};
use crate::error::{Error, Result};
use crate::kernel::{
    bandwidth_diagnostics, default_grid, fit_folded, select_bandwidth, BandwidthDiagnostics, KernelConfig,
    QSurface, TrainingSample,
};
use crate::propensity::{fit_propensity, PropensityFit, PropensityOptions};

use crate::linalg::{column_name, PivotedQr};

use super::{augmented_design, fit_np, fit_ss, fit_tr, Method, RegimeFit};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandwidthChoice {
    Auto,
    Fixed(f64),
}

impl std::str::FromStr for BandwidthChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(BandwidthChoice::Auto);
        }
        match s.parse::<f64>() {
            Ok(h) if h > 0.0 && h.is_finite() => Ok(BandwidthChoice::Fixed(h)),
            _ => Err(format!("bandwidth must be `auto` or a positive number, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub method: Method,
    pub kfolds: usize,
    pub bandwidth: BandwidthChoice,
    /// Candidate bandwidths for `Auto`; the default log-spaced grid when
    /// `None`.
    pub grid: Option<Vec<f64>>,
    pub propensity: PropensityOptions,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            method: Method::Ss,
            kfolds: 5,
            bandwidth: BandwidthChoice::Auto,
            grid: None,
            propensity: PropensityOptions::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub fit: RegimeFit,
    pub propensity: PropensityFit,
    pub bandwidth_diagnostics: Option<BandwidthDiagnostics>,
    pub n: usize,
    pub big_n: usize,
    pub p: usize,
}

/// Standardizes, fits the propensity model, picks the bandwidth and runs
/// the requested estimator.
pub fn fit_regime(raw: &Dataset, opts: &FitOptions) -> Result<FitOutcome> {
    let ds = standardize(raw)?;
    ds.require_estimable()?;
    if opts.method != Method::Tr && ds.big_n() == 0 {
        return Err(Error::NoUnlabeled);
    }
    // Check identifiability of the regime coefficients first so that a
    // collinear covariate is reported by name rather than as a singular
    // propensity information matrix.
    let design = augmented_design(ds.labeled().iter().map(|o| o.x.as_slice()), ds.p());
    if let Some(j) = PivotedQr::new(&design).dependent_column() {
        return Err(Error::RankDeficient {
            column: column_name(j),
        });
    }
    let propensity = fit_propensity(&ds, &opts.propensity)?;

    let (fit, diagnostics) = match opts.method {
        Method::Tr => (fit_tr(&ds, &propensity)?, None),
        Method::Np | Method::Ss => {
            let sample = Arc::new(TrainingSample::from_dataset(&ds));
            let h = match opts.bandwidth {
                BandwidthChoice::Fixed(h) => h,
                BandwidthChoice::Auto => {
                    let grid = opts.grid.clone().unwrap_or_else(|| default_grid(ds.n(), ds.p()));
                    select_bandwidth(&sample, opts.kfolds, &grid, opts.seed)?.bandwidth
                }
            };
            let config = KernelConfig::new(h)?;
            let fit = if opts.method == Method::Np {
                let mut f = fit_np(&ds, &QSurface::fit(sample, config), &propensity)?;
                f.kfolds = matches!(opts.bandwidth, BandwidthChoice::Auto).then_some(opts.kfolds);
                f
            } else {
                let folded = fit_folded(&sample, config, opts.kfolds, opts.seed)?;
                fit_ss(&ds, &folded, &propensity)?
            };
            (fit, Some(bandwidth_diagnostics(ds.n(), ds.p(), h)))
        }
    };

    Ok(FitOutcome {
        fit,
        propensity,
        bandwidth_diagnostics: diagnostics,
        n: ds.n(),
        big_n: ds.big_n(),
        p: ds.p(),
    })
}
