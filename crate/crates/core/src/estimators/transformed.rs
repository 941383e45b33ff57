use crate::data::Dataset;
use crate::error::Result;
use crate::linalg::{self, Matrix};
use crate::propensity::{self, PropensityFit};

use super::{augmented_design, influence_rows, inverse_second_moment, Method, RegimeFit};

/// `y (a - pi) / (pi (1 - pi))`, whose conditional mean under the true
/// propensity is the contrast `C(x)`.
pub fn transformed_response(y: f64, a: u8, pi_hat: f64) -> f64 {
    y * (a as f64 - pi_hat) / (pi_hat * (1.0 - pi_hat))
}

/// Least squares of the transformed responses on `x~` over labeled data.
///
/// Influence values are `Lambda^{-1} [x~_i (Y~_i - beta' x~_i) + D psi_i]`
/// with `Lambda = n^{-1} sum x~ x~'`. When the propensity coefficients were
/// estimated, `psi_i` is their influence and `D = n^{-1} sum x~ dY~/dgamma'`;
/// for a known propensity the second term is absent.
pub fn fit_tr(ds: &Dataset, prop: &PropensityFit) -> Result<RegimeFit> {
    ds.require_estimable()?;
    let design = augmented_design(ds.labeled().iter().map(|o| o.x.as_slice()), ds.p());
    let ytilde: Vec<f64> = ds
        .labeled()
        .iter()
        .map(|o| {
            let l = o.label.expect("labeled row");
            transformed_response(l.y, l.a, prop.evaluate(&o.x))
        })
        .collect();
    let beta = linalg::least_squares(&design, &ytilde)?;
    let lambda_inv = inverse_second_moment(&design)?;
    let resid: Vec<f64> = (0..design.rows())
        .map(|i| ytilde[i] - linalg::dot(design.row(i), &beta))
        .collect();
    let mut influence = influence_rows(&design, &lambda_inv, &resid);
    if prop.estimated {
        let correction = propensity_correction(ds, prop, &design)?;
        for i in 0..influence.rows() {
            let c = lambda_inv.matvec(correction.row(i));
            for (v, ci) in influence.row_mut(i).iter_mut().zip(c) {
                *v += ci;
            }
        }
    }
    Ok(RegimeFit::from_influence(Method::Tr, beta, influence, ds.scale()))
}

/// Rows `D psi_i`, the first-order effect of propensity estimation on the
/// least-squares score.
fn propensity_correction(ds: &Dataset, prop: &PropensityFit, design: &Matrix) -> Result<Matrix> {
    let psi = propensity::coefficient_influence(ds, prop)?;
    let (q, m) = (design.cols(), prop.gamma.len());
    let n = ds.n();
    let mut d = Matrix::zeros(q, m);
    for (i, o) in ds.labeled().iter().enumerate() {
        if prop.is_clipped(&o.x) {
            continue;
        }
        let l = o.label.expect("labeled row");
        let pi = prop.evaluate(&o.x);
        // dY~/d(gamma' z~) for each arm.
        let dy = if l.a == 1 {
            -l.y * (1.0 - pi) / pi
        } else {
            -l.y * pi / (1.0 - pi)
        };
        let z = prop.features(&o.x);
        for (r, &xr) in design.row(i).iter().enumerate() {
            for c in 0..m {
                d[(r, c)] += xr * dy * z[c] / n as f64;
            }
        }
    }
    let mut out = Matrix::zeros(n, q);
    for i in 0..n {
        out.row_mut(i).copy_from_slice(&d.matvec(psi.row(i)));
    }
    Ok(out)
}
