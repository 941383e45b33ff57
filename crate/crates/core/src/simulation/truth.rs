use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::augment;
use crate::error::Result;
use crate::linalg::{self, Matrix};

use super::dgp::draw_covariates;
use super::SimConfig;

/// Large fully observed sample with the true contrast and baseline values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthSet {
    pub beta_star: Vec<f64>,
    /// Monte Carlo standard errors of `beta_star` (sandwich form).
    pub beta_star_mcse: Vec<f64>,
    pub v0: f64,
    #[serde(skip)]
    pub p: usize,
    #[serde(skip)]
    pub x: Vec<f64>,
    #[serde(skip)]
    pub contrast: Vec<f64>,
    #[serde(skip)]
    pub baseline: Vec<f64>,
}

impl TruthSet {
    pub fn len(&self) -> usize {
        self.contrast.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contrast.is_empty()
    }

    pub fn x(&self, m: usize) -> &[f64] {
        &self.x[m * self.p..(m + 1) * self.p]
    }
}

/// `beta*` as the least-squares projection of `C(X)` on `x~` and `V0` as
/// the mean of `mu(X) + I(C(X) > 0) C(X)`, both over a Monte Carlo sample
/// drawn from stream 0 of `cfg.seed`.
pub fn compute_truth(cfg: &SimConfig) -> Result<TruthSet> {
    cfg.validate()?;
    let (m, p) = (cfg.mc_truth_size, cfg.p);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(0);
    let mut x = Vec::with_capacity(m * p);
    let mut contrast = Vec::with_capacity(m);
    let mut baseline = Vec::with_capacity(m);
    let mut design = Vec::with_capacity(m * (p + 1));
    for _ in 0..m {
        let xi = draw_covariates(&mut rng, p);
        contrast.push(cfg.model.contrast(&xi));
        baseline.push(cfg.baseline.mean(&xi));
        design.extend_from_slice(augment(&xi).as_slice());
        x.extend(xi);
    }
    let design = Matrix::from_row_major(m, p + 1, design);
    let beta_star = linalg::least_squares(&design, &contrast)?;

    // Sandwich MC standard errors: (X'X)^{-1} (sum x x' r^2) (X'X)^{-1}.
    let bread = linalg::inverse(&design.weighted_gram(None))?;
    let r2: Vec<f64> = (0..m)
        .map(|i| {
            let r = contrast[i] - linalg::dot(design.row(i), &beta_star);
            r * r
        })
        .collect();
    let meat = design.weighted_gram(Some(&r2));
    let cov = bread.matmul(&meat).matmul(&bread);
    let beta_star_mcse = (0..=p).map(|j| cov[(j, j)].max(0.0).sqrt()).collect();

    let v0 = contrast
        .iter()
        .zip(&baseline)
        .map(|(c, mu)| mu + if *c > 0.0 { *c } else { 0.0 })
        .sum::<f64>()
        / m as f64;

    Ok(TruthSet {
        beta_star,
        beta_star_mcse,
        v0,
        p,
        x,
        contrast,
        baseline,
    })
}
