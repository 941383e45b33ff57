//! Regime estimators and their influence-function inference.
//!
//! Every estimator returns a [`RegimeFit`] whose coefficients live on the
//! covariate scale of the dataset it was fitted on (standardized in the
//! usual pipeline); [`RegimeFit::beta_raw`] and [`RegimeFit::cov_raw`] map
//! them back to raw covariates.

mod imputation;
mod pipeline;
mod rule;
mod transformed;

use serde::{Deserialize, Serialize};

use crate::data::{augment, Standardization};
use crate::linalg::{self, Matrix};

pub use imputation::{fit_np, fit_ss, fit_ss_with_theta, impute_np, impute_ss, refit_theta};
pub use pipeline::{fit_regime, BandwidthChoice, FitOptions, FitOutcome};
pub use rule::DecisionRule;
pub use transformed::{fit_tr, transformed_response};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Transformed-response least squares on labeled data.
    Tr,
    /// Regression of nonparametric contrast imputations over unlabeled data.
    Np,
    /// Cross-fitted, linearly refitted semi-supervised imputation.
    Ss,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Tr => "tr",
            Method::Np => "np",
            Method::Ss => "ss",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct RegimeFit {
    pub method: Method,
    pub beta: Vec<f64>,
    /// Estimated covariance of `beta`, i.e. `V / n`.
    pub cov: Matrix,
    pub se: Vec<f64>,
    pub ci95: Vec<(f64, f64)>,
    /// Per-subject influence values, one row per labeled observation.
    pub influence: Matrix,
    pub theta1: Option<Vec<f64>>,
    pub theta0: Option<Vec<f64>>,
    pub bandwidth: Option<f64>,
    pub kfolds: Option<usize>,
    pub scale: Standardization,
}

impl RegimeFit {
    pub(crate) fn from_influence(method: Method, beta: Vec<f64>, influence: Matrix, scale: Standardization) -> Self {
        let cov = influence_covariance(&influence);
        let se: Vec<f64> = (0..cov.rows()).map(|j| cov[(j, j)].max(0.0).sqrt()).collect();
        let mut fit = RegimeFit {
            method,
            beta,
            cov,
            se,
            ci95: Vec::new(),
            influence,
            theta1: None,
            theta0: None,
            bandwidth: None,
            kfolds: None,
            scale,
        };
        fit.ci95 = fit.wald_ci(0.95);
        fit
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    /// Wald intervals `beta_j +/- z se_j` at the given two-sided level.
    pub fn wald_ci(&self, level: f64) -> Vec<(f64, f64)> {
        wald_ci(&self.beta, &self.se, level)
    }

    pub fn beta_raw(&self) -> Vec<f64> {
        self.scale.beta_to_raw(&self.beta)
    }

    pub fn cov_raw(&self) -> Matrix {
        let t = self.scale.coefficient_map();
        t.matmul(&self.cov).matmul(&t.transpose())
    }

    pub fn se_raw(&self) -> Vec<f64> {
        let c = self.cov_raw();
        (0..c.rows()).map(|j| c[(j, j)].max(0.0).sqrt()).collect()
    }

    pub fn rule(&self) -> DecisionRule {
        DecisionRule::new(self.beta.clone(), self.scale.clone())
    }

    /// Column means of the influence matrix.
    pub fn influence_means(&self) -> Vec<f64> {
        column_sums(&self.influence)
            .into_iter()
            .map(|s| s / self.influence.rows() as f64)
            .collect()
    }
}

fn column_sums(m: &Matrix) -> Vec<f64> {
    let mut s = vec![0.0; m.cols()];
    for i in 0..m.rows() {
        for (acc, v) in s.iter_mut().zip(m.row(i)) {
            *acc += v;
        }
    }
    s
}

/// `n^{-2} sum_i psi_i psi_i'`: the plug-in variance of the influence
/// expansion divided by `n`.
pub fn influence_covariance(influence: &Matrix) -> Matrix {
    let n = influence.rows() as f64;
    let mut v = influence.weighted_gram(None);
    v.scale(1.0 / (n * n));
    v
}

/// Design matrix of augmented covariates `(1, x')`.
pub(crate) fn augmented_design<'a>(xs: impl ExactSizeIterator<Item = &'a [f64]>, p: usize) -> Matrix {
    let n = xs.len();
    let mut data = Vec::with_capacity(n * (p + 1));
    for x in xs {
        data.extend_from_slice(augment(x).as_slice());
    }
    Matrix::from_row_major(n, p + 1, data)
}

/// `Lambda^{-1} x~_i * scalar_i` stacked over rows.
pub(crate) fn influence_rows(design: &Matrix, lambda_inv: &Matrix, scalars: &[f64]) -> Matrix {
    let q = design.cols();
    let mut out = Matrix::zeros(design.rows(), q);
    for i in 0..design.rows() {
        let v = lambda_inv.matvec(design.row(i));
        for (o, vj) in out.row_mut(i).iter_mut().zip(v) {
            *o = vj * scalars[i];
        }
    }
    out
}

/// Inverse of `m^{-1} X'X`.
pub(crate) fn inverse_second_moment(design: &Matrix) -> crate::Result<Matrix> {
    let mut lambda = design.weighted_gram(None);
    lambda.scale(1.0 / design.rows() as f64);
    linalg::inverse(&lambda)
}

/// Standard normal quantile by Acklam's rational approximation (relative
/// error below 1.2e-9 over the open unit interval).
pub fn normal_quantile(prob: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const LOW: f64 = 0.02425;

    if prob <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if prob >= 1.0 {
        return f64::INFINITY;
    }
    if prob < LOW {
        let q = (-2.0 * prob.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if prob <= 1.0 - LOW {
        let q = prob - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -normal_quantile(1.0 - prob)
    }
}

pub fn wald_ci(beta: &[f64], se: &[f64], level: f64) -> Vec<(f64, f64)> {
    let z = normal_quantile(0.5 + level / 2.0);
    beta.iter()
        .zip(se)
        .map(|(b, s)| if *s == 0.0 { (*b, *b) } else { (b - z * s, b + z * s) })
        .collect()
}
