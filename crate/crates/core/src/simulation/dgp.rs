use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{Dataset, Observation};
use crate::error::Result;
use crate::propensity::expit;

use super::SimConfig;

const TRUNCATION: f64 = 5.0;

/// Random stream for replication `rep` (streams start at 1; stream 0 is
/// reserved for the Monte Carlo truth sample).
pub fn replication_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64 + 1);
    rng
}

/// Standard normal coordinates, each redrawn until it falls in [-5, 5].
pub(crate) fn draw_covariates<R: Rng>(rng: &mut R, p: usize) -> Vec<f64> {
    (0..p)
        .map(|_| loop {
            let z: f64 = rng.sample(StandardNormal);
            if z.abs() <= TRUNCATION {
                break z;
            }
        })
        .collect()
}

/// `P(A = 1 | x) = expit(0.5 x1 - 0.5 x2)`.
pub fn propensity_truth(x: &[f64]) -> f64 {
    expit(0.5 * x[0] - 0.5 * x[1])
}

/// One simulated dataset: `n` labeled rows followed by `N` rows whose
/// treatment and outcome are discarded.
pub fn generate_replication(cfg: &SimConfig, rep: usize) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = replication_rng(cfg.seed, rep);
    let mut labeled = Vec::with_capacity(cfg.n);
    let mut unlabeled = Vec::with_capacity(cfg.big_n);
    for i in 0..cfg.n + cfg.big_n {
        let x = draw_covariates(&mut rng, cfg.p);
        let u: f64 = rng.random();
        let a = (u < propensity_truth(&x)) as u8;
        let eps: f64 = rng.sample(StandardNormal);
        let y = cfg.baseline.mean(&x) + a as f64 * cfg.model.contrast(&x) + eps;
        if i < cfg.n {
            labeled.push(Observation::labeled(x, a, y));
        } else {
            unlabeled.push(Observation::unlabeled(x));
        }
    }
    Dataset::new(labeled, unlabeled)
}
