//! Logistic-regression propensity model `pi(x) = P(A = 1 | X = x)`.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

pub const DEFAULT_CLIP_EPS: f64 = 0.01;
const DIVERGENCE_NORM: f64 = 1e3;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityOptions {
    pub clip_eps: f64,
    pub max_iter: usize,
    /// Convergence when the score sup-norm is at most `tol * n`.
    pub tol: f64,
    /// Zero-based covariate columns entering the model; all when `None`.
    pub columns: Option<Vec<usize>>,
}

impl Default for PropensityOptions {
    fn default() -> Self {
        PropensityOptions {
            clip_eps: DEFAULT_CLIP_EPS,
            max_iter: 100,
            tol: 1e-10,
            columns: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityFit {
    /// Coefficients on `(1, x_cols')'`.
    pub gamma: Vec<f64>,
    pub clip_eps: f64,
    pub columns: Vec<usize>,
    pub converged: bool,
    pub iterations: usize,
    /// True when the coefficients were estimated from the labeled data, in
    /// which case inference accounts for their sampling variability.
    #[serde(default)]
    pub estimated: bool,
}

pub fn expit(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

impl PropensityFit {
    /// Fit with fixed coefficients, e.g. a known propensity model.
    pub fn from_coefficients(gamma: Vec<f64>, columns: Vec<usize>, clip_eps: f64) -> Self {
        assert_eq!(gamma.len(), columns.len() + 1);
        PropensityFit {
            gamma,
            clip_eps,
            columns,
            converged: true,
            iterations: 0,
            estimated: false,
        }
    }

    pub fn linear_index(&self, x: &[f64]) -> f64 {
        self.gamma[0]
            + self
                .columns
                .iter()
                .zip(&self.gamma[1..])
                .map(|(&c, g)| g * x[c])
                .sum::<f64>()
    }

    /// Model features `(1, x_cols')`.
    pub fn features(&self, x: &[f64]) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.gamma.len());
        z.push(1.0);
        z.extend(self.columns.iter().map(|&c| x[c]));
        z
    }

    /// Whether the clamp is active at `x`.
    pub fn is_clipped(&self, x: &[f64]) -> bool {
        let p = expit(self.linear_index(x));
        p < self.clip_eps || p > 1.0 - self.clip_eps
    }

    /// Clipped propensity `min(max(expit(gamma' x~), eps), 1 - eps)`.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        expit(self.linear_index(x)).clamp(self.clip_eps, 1.0 - self.clip_eps)
    }
}

fn design(ds: &Dataset, columns: &[usize]) -> Matrix {
    let q = columns.len() + 1;
    let mut m = Matrix::zeros(ds.n(), q);
    for (i, obs) in ds.labeled().iter().enumerate() {
        let row = m.row_mut(i);
        row[0] = 1.0;
        for (slot, &c) in row[1..].iter_mut().zip(columns) {
            *slot = obs.x[c];
        }
    }
    m
}

fn log_likelihood(x: &Matrix, a: &[f64], gamma: &[f64]) -> f64 {
    (0..x.rows())
        .map(|i| {
            let eta = linalg::dot(x.row(i), gamma);
            a[i] * eta - softplus(eta)
        })
        .sum()
}

/// Maximum-likelihood logistic fit on the labeled rows by damped Newton
/// iterations from `gamma = 0`, halving the step until the log-likelihood
/// does not decrease.
pub fn fit_propensity(ds: &Dataset, opts: &PropensityOptions) -> Result<PropensityFit> {
    if !(opts.clip_eps > 0.0 && opts.clip_eps < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "clip_eps must lie in (0, 0.5), got {}",
            opts.clip_eps
        )));
    }
    let columns: Vec<usize> = opts.columns.clone().unwrap_or_else(|| (0..ds.p()).collect());
    if let Some(&c) = columns.iter().find(|&&c| c >= ds.p()) {
        return Err(Error::InvalidArgument(format!(
            "propensity column x{} does not exist (p = {})",
            c + 1,
            ds.p()
        )));
    }
    let x = design(ds, &columns);
    let a: Vec<f64> = ds.treatments().iter().map(|&v| v as f64).collect();
    let n = ds.n();
    let q = columns.len() + 1;

    let mut gamma = vec![0.0; q];
    let mut ll = log_likelihood(&x, &a, &gamma);
    let mut converged = false;
    let mut iterations = 0;

    while iterations <= opts.max_iter {
        let mut grad = vec![0.0; q];
        let mut w = vec![0.0; n];
        let mut work = vec![0.0; n];
        for i in 0..n {
            let p = expit(linalg::dot(x.row(i), &gamma));
            let r = a[i] - p;
            for (g, xj) in grad.iter_mut().zip(x.row(i)) {
                *g += xj * r;
            }
            w[i] = p * (1.0 - p);
            work[i] = if w[i] > 0.0 { r / w[i] } else { 0.0 };
        }
        // A coefficient vector that puts every point strictly on its own
        // side certifies complete separation: no finite maximizer exists.
        if (0..n).all(|i| (2.0 * a[i] - 1.0) * linalg::dot(x.row(i), &gamma) > 0.0) {
            return Err(Error::Separation);
        }
        let sup = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
        if sup <= opts.tol * n as f64 {
            converged = true;
            break;
        }
        if iterations == opts.max_iter {
            break;
        }
        iterations += 1;

        // Newton direction: (X' W X)^{-1} X'(a - p) as a weighted LS solve.
        let step = linalg::weighted_least_squares(&x, &work, &w).map_err(|_| Error::SingularInformation)?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<f64> = gamma.iter().zip(&step).map(|(g, s)| g + t * s).collect();
            let cand_ll = log_likelihood(&x, &a, &cand);
            if cand_ll >= ll - 1e-12 * ll.abs().max(1.0) {
                gamma = cand;
                ll = cand_ll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if gamma.iter().map(|g| g * g).sum::<f64>().sqrt() > DIVERGENCE_NORM {
            return Err(Error::Separation);
        }
        if !accepted {
            break;
        }
    }

    Ok(PropensityFit {
        gamma,
        clip_eps: opts.clip_eps,
        columns,
        converged,
        iterations,
        estimated: true,
    })
}

/// Score vector `sum_i x~_i (a_i - expit(gamma' x~_i))` at the fitted
/// coefficients.
pub fn score(ds: &Dataset, fit: &PropensityFit) -> Vec<f64> {
    let x = design(ds, &fit.columns);
    let mut g = vec![0.0; fit.gamma.len()];
    for (i, &a) in ds.treatments().iter().enumerate() {
        let r = a as f64 - expit(linalg::dot(x.row(i), &fit.gamma));
        for (gj, xj) in g.iter_mut().zip(x.row(i)) {
            *gj += xj * r;
        }
    }
    g
}

/// Per-row influence of the coefficient estimate,
/// `I^{-1} z~_i (a_i - pi_i)` with `I = n^{-1} sum pi (1 - pi) z~ z~'`.
pub fn coefficient_influence(ds: &Dataset, fit: &PropensityFit) -> Result<Matrix> {
    let z = design(ds, &fit.columns);
    let w: Vec<f64> = (0..z.rows())
        .map(|i| {
            let p = expit(linalg::dot(z.row(i), &fit.gamma));
            p * (1.0 - p)
        })
        .collect();
    let mut info = z.weighted_gram(Some(&w));
    info.scale(1.0 / z.rows() as f64);
    let info_inv = linalg::inverse(&info).map_err(|_| Error::SingularInformation)?;
    let mut out = Matrix::zeros(z.rows(), z.cols());
    for (i, &a) in ds.treatments().iter().enumerate() {
        let r = a as f64 - expit(linalg::dot(z.row(i), &fit.gamma));
        for (o, v) in out.row_mut(i).iter_mut().zip(info_inv.matvec(z.row(i))) {
            *o = v * r;
        }
    }
    Ok(out)
}
