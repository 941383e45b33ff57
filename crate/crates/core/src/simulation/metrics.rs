use crate::linalg;

use super::TruthSet;

fn index(beta: &[f64], x: &[f64]) -> f64 {
    beta[0] + linalg::dot(&beta[1..], x)
}

/// Fraction of evaluation points where `I(beta_hat' x~ > 0)` agrees with
/// `I(beta_star' x~ > 0)`.
pub fn pcd<'a>(beta_hat: &[f64], beta_star: &[f64], eval_x: impl IntoIterator<Item = &'a [f64]>) -> f64 {
    let (mut disagree, mut total) = (0usize, 0usize);
    for x in eval_x {
        let d_hat = index(beta_hat, x) > 0.0;
        let d_star = index(beta_star, x) > 0.0;
        disagree += (d_hat != d_star) as usize;
        total += 1;
    }
    assert!(total > 0, "empty PCD evaluation sample");
    1.0 - disagree as f64 / total as f64
}

/// Value of the rule `I(beta_hat' x~ > 0)` over the truth sample:
/// mean of `mu(X) + d(X) C(X)`.
///
/// Terms are summed in sample order, so the result never exceeds `V0`.
pub fn value_of_rule(beta_hat: &[f64], truth: &TruthSet) -> f64 {
    let mut total = 0.0;
    for m in 0..truth.len() {
        let treat = index(beta_hat, truth.x(m)) > 0.0;
        total += truth.baseline[m] + if treat { truth.contrast[m] } else { 0.0 };
    }
    total / truth.len() as f64
}
