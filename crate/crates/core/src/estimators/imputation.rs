//! Imputation estimators: nonparametric (NP) and cross-fitted
//! semi-supervised (SS).

use rayon::prelude::*;

use crate::data::{augment, Dataset};
use crate::error::{Error, Result};
use crate::kernel::{FoldedSurfaces, QSurface};
use crate::linalg::{self, Matrix};
use crate::propensity::PropensityFit;

use super::{augmented_design, influence_rows, inverse_second_moment, Method, RegimeFit};

fn unlabeled_design(ds: &Dataset) -> Result<Matrix> {
    if ds.big_n() == 0 {
        return Err(Error::NoUnlabeled);
    }
    if ds.big_n() < ds.p() + 2 {
        return Err(Error::InvalidArgument(format!(
            "unlabeled set has {} rows, need at least {}",
            ds.big_n(),
            ds.p() + 2
        )));
    }
    Ok(augmented_design(ds.unlabeled().iter().map(|o| o.x.as_slice()), ds.p()))
}

/// Inverse-propensity contrast weight `a / pi - (1 - a) / (1 - pi)`.
fn ipw_sign(a: u8, pi: f64) -> f64 {
    if a == 1 {
        1.0 / pi
    } else {
        -1.0 / (1.0 - pi)
    }
}

/// Imputed contrast `Q(x, 1) - Q(x, 0)` from a single surface.
pub fn impute_np(surface: &QSurface, x: &[f64]) -> Result<f64> {
    surface.contrast(x)
}

/// Imputed contrast from the fold-averaged surfaces plus the linear
/// corrections `theta_a' x~`.
pub fn impute_ss(folded: &FoldedSurfaces, theta1: &[f64], theta0: &[f64], x: &[f64]) -> Result<f64> {
    let xt = augment(x);
    let q1 = folded.averaged_q(x, 1)? + linalg::dot(theta1, xt.as_slice());
    let q0 = folded.averaged_q(x, 0)? + linalg::dot(theta0, xt.as_slice());
    Ok(q1 - q0)
}

fn impute_all(ds: &Dataset, f: impl Fn(&[f64]) -> Result<f64> + Sync) -> Result<Vec<f64>> {
    ds.unlabeled().par_iter().map(|o| f(&o.x)).collect()
}

/// Regression of single-surface kernel contrasts over the unlabeled
/// covariates.
///
/// Influence values use the clipped propensity and leave-one-out kernel
/// residuals at the labeled points, with `Lambda` estimated on the
/// unlabeled sample.
pub fn fit_np(ds: &Dataset, surface: &QSurface, prop: &PropensityFit) -> Result<RegimeFit> {
    ds.require_estimable()?;
    let u_design = unlabeled_design(ds)?;
    let imputed = impute_all(ds, |x| impute_np(surface, x))?;
    let beta = linalg::least_squares(&u_design, &imputed)?;
    let lambda_inv = inverse_second_moment(&u_design)?;

    let l_design = augmented_design(ds.labeled().iter().map(|o| o.x.as_slice()), ds.p());
    let scalars = ds
        .labeled()
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let l = o.label.expect("labeled row");
            let q = surface.q_leave_one_out(i)?;
            Ok(ipw_sign(l.a, prop.evaluate(&o.x)) * (l.y - q))
        })
        .collect::<Result<Vec<f64>>>()?;
    let influence = influence_rows(&l_design, &lambda_inv, &scalars);
    let mut fit = RegimeFit::from_influence(Method::Np, beta, influence, ds.scale());
    fit.bandwidth = Some(surface.config().bandwidth);
    Ok(fit)
}

/// Held-out residuals `Y_i - Q_{-k(i)}(X_i, A_i)`.
fn held_out_residuals(ds: &Dataset, folded: &FoldedSurfaces) -> Result<Vec<f64>> {
    ds.labeled()
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let l = o.label.expect("labeled row");
            Ok(l.y - folded.held_out_q(i, l.a)?)
        })
        .collect()
}

/// Inverse-propensity weighted least squares of held-out residuals on `x~`
/// within one arm: the linear bias correction `theta_a`.
pub fn refit_theta(ds: &Dataset, folded: &FoldedSurfaces, prop: &PropensityFit, arm: u8) -> Result<Vec<f64>> {
    let resid = held_out_residuals(ds, folded)?;
    refit_from_residuals(ds, &resid, prop, arm)
}

fn refit_from_residuals(ds: &Dataset, resid: &[f64], prop: &PropensityFit, arm: u8) -> Result<Vec<f64>> {
    let design = augmented_design(ds.labeled().iter().map(|o| o.x.as_slice()), ds.p());
    let weights: Vec<f64> = ds
        .labeled()
        .iter()
        .map(|o| {
            let pi = prop.evaluate(&o.x);
            match (arm, o.a()) {
                (1, Some(1)) => 1.0 / pi,
                (0, Some(0)) => 1.0 / (1.0 - pi),
                _ => 0.0,
            }
        })
        .collect();
    linalg::weighted_least_squares(&design, resid, &weights)
}

/// Semi-supervised estimator with refitted corrections.
pub fn fit_ss(ds: &Dataset, folded: &FoldedSurfaces, prop: &PropensityFit) -> Result<RegimeFit> {
    ds.require_estimable()?;
    let resid = held_out_residuals(ds, folded)?;
    let theta1 = refit_from_residuals(ds, &resid, prop, 1)?;
    let theta0 = refit_from_residuals(ds, &resid, prop, 0)?;
    fit_ss_with_theta(ds, folded, prop, theta1, theta0)
}

/// Semi-supervised estimator for given corrections `theta1`, `theta0`.
///
/// Influence values use the held-out surface `Q_{-k(i)}` plus the linear
/// correction at each labeled point.
pub fn fit_ss_with_theta(
    ds: &Dataset,
    folded: &FoldedSurfaces,
    prop: &PropensityFit,
    theta1: Vec<f64>,
    theta0: Vec<f64>,
) -> Result<RegimeFit> {
    let u_design = unlabeled_design(ds)?;
    let imputed = impute_all(ds, |x| impute_ss(folded, &theta1, &theta0, x))?;
    let beta = linalg::least_squares(&u_design, &imputed)?;
    let lambda_inv = inverse_second_moment(&u_design)?;

    let l_design = augmented_design(ds.labeled().iter().map(|o| o.x.as_slice()), ds.p());
    let resid = held_out_residuals(ds, folded)?;
    let scalars: Vec<f64> = ds
        .labeled()
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let a = o.a().expect("labeled row");
            let theta = if a == 1 { &theta1 } else { &theta0 };
            let r = resid[i] - linalg::dot(theta, l_design.row(i));
            ipw_sign(a, prop.evaluate(&o.x)) * r
        })
        .collect();
    let influence = influence_rows(&l_design, &lambda_inv, &scalars);
    let mut fit = RegimeFit::from_influence(Method::Ss, beta, influence, ds.scale());
    fit.theta1 = Some(theta1);
    fit.theta0 = Some(theta0);
    fit.bandwidth = Some(folded.bandwidth());
    fit.kfolds = Some(folded.k());
    Ok(fit)
}
