//! Product-Gaussian Nadaraya-Watson estimates of the arm-specific outcome
//! regressions `Q(x, a) = E(Y | X = x, A = a)`.
//!
//! All covariates are expected on the standardized scale, where a single
//! bandwidth is shared by both arms and every coordinate. The Gaussian
//! kernel has unbounded support; the usual compact-support condition from
//! the kernel-smoothing literature is therefore not met, and the bandwidth
//! diagnostics below only check the rate conditions.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Weight sums below this fall back to the arm's sample mean.
pub const DEFAULT_DENOM_FLOOR: f64 = 1e-8;
/// Kernel order of the product Gaussian.
pub const KERNEL_ORDER: i32 = 2;
pub const DEFAULT_GRID_SIZE: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub bandwidth: f64,
    pub denom_floor: f64,
}

impl KernelConfig {
    pub fn new(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        Ok(KernelConfig {
            bandwidth,
            denom_floor: DEFAULT_DENOM_FLOOR,
        })
    }
}

/// Labeled training sample in flat storage.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    p: usize,
    x: Vec<f64>,
    a: Vec<u8>,
    y: Vec<f64>,
}

impl TrainingSample {
    pub fn new(rows: &[Vec<f64>], a: &[u8], y: &[f64]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.len() != a.len() || rows.len() != y.len() {
            return Err(Error::InvalidArgument("covariate, treatment and outcome lengths differ".into()));
        }
        let mut x = Vec::with_capacity(rows.len() * p);
        for r in rows {
            if r.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: r.len(),
                });
            }
            x.extend_from_slice(r);
        }
        if let Some(&bad) = a.iter().find(|&&v| v > 1) {
            return Err(Error::NonBinaryTreatment {
                row: a.iter().position(|&v| v == bad).unwrap() + 1,
                value: bad.to_string(),
            });
        }
        Ok(TrainingSample {
            p,
            x,
            a: a.to_vec(),
            y: y.to_vec(),
        })
    }

    pub fn from_dataset(ds: &Dataset) -> Self {
        let rows: Vec<Vec<f64>> = ds.labeled().iter().map(|o| o.x.clone()).collect();
        TrainingSample::new(&rows, &ds.treatments(), &ds.outcomes()).expect("validated dataset")
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn a(&self, i: usize) -> u8 {
        self.a[i]
    }

    pub fn y(&self, i: usize) -> f64 {
        self.y[i]
    }

    fn arm_indices(&self, arm: u8, keep: impl Fn(usize) -> bool) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.a[i] == arm && keep(i)).collect()
    }

    /// Kernel-weighted mean of outcomes over `idx`, skipping `skip`.
    fn weighted_mean(&self, idx: &[usize], x: &[f64], cfg: &KernelConfig, skip: Option<usize>) -> Option<f64> {
        let scale = -0.5 / (cfg.bandwidth * cfg.bandwidth);
        let (mut num, mut den, mut ysum, mut count) = (0.0, 0.0, 0.0, 0usize);
        for &i in idx {
            if Some(i) == skip {
                continue;
            }
            let xi = self.x(i);
            let d2: f64 = x.iter().zip(xi).map(|(u, v)| (u - v) * (u - v)).sum();
            let w = (scale * d2).exp();
            let yi = self.y[i];
            num += w * yi;
            den += w;
            ysum += yi;
            count += 1;
        }
        if count == 0 {
            None
        } else if den < cfg.denom_floor {
            Some(ysum / count as f64)
        } else {
            Some(num / den)
        }
    }
}

/// Fitted kernel regression surface for both arms.
#[derive(Debug, Clone)]
pub struct QSurface {
    sample: Arc<TrainingSample>,
    config: KernelConfig,
    active: [Vec<usize>; 2],
    held_out_fold: Option<usize>,
}

impl QSurface {
    /// Surface trained on every labeled point.
    pub fn fit(sample: Arc<TrainingSample>, config: KernelConfig) -> Self {
        let active = [sample.arm_indices(0, |_| true), sample.arm_indices(1, |_| true)];
        QSurface {
            sample,
            config,
            active,
            held_out_fold: None,
        }
    }

    pub fn config(&self) -> &KernelConfig {
        &self.config
    }

    pub fn sample(&self) -> &Arc<TrainingSample> {
        &self.sample
    }

    pub fn training_indices(&self, arm: u8) -> &[usize] {
        &self.active[arm as usize]
    }

    pub fn held_out_fold(&self) -> Option<usize> {
        self.held_out_fold
    }

    /// Nadaraya-Watson estimate of `Q(x, a)`.
    pub fn q(&self, x: &[f64], arm: u8) -> Result<f64> {
        self.sample
            .weighted_mean(&self.active[arm as usize], x, &self.config, None)
            .ok_or(Error::EmptyArm { arm })
    }

    /// Leave-one-out estimate at training point `i` (its own outcome is
    /// excluded from both sums).
    pub fn q_leave_one_out(&self, i: usize) -> Result<f64> {
        let arm = self.sample.a(i);
        self.sample
            .weighted_mean(&self.active[arm as usize], self.sample.x(i), &self.config, Some(i))
            .ok_or(Error::EmptyArm { arm })
    }

    /// `Q(x, 1) - Q(x, 0)`.
    pub fn contrast(&self, x: &[f64]) -> Result<f64> {
        Ok(self.q(x, 1)? - self.q(x, 0)?)
    }
}

/// Seeded random partition of `0..n` into `k` folds whose sizes differ by
/// at most one. Entry `i` is the fold of point `i`.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    perm.shuffle(&mut rng);
    let mut fold_of = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        fold_of[i] = pos % k;
    }
    fold_of
}

/// The `K` surfaces `Q_{-k}`, each trained without fold `k`.
#[derive(Debug, Clone)]
pub struct FoldedSurfaces {
    surfaces: Vec<QSurface>,
    fold_of: Vec<usize>,
}

impl FoldedSurfaces {
    /// Assembles surfaces directly; `surfaces[k]` must exclude exactly the
    /// points with `fold_of[i] == k`.
    pub fn from_parts(surfaces: Vec<QSurface>, fold_of: Vec<usize>) -> Result<Self> {
        if surfaces.is_empty() {
            return Err(Error::InvalidArgument("no surfaces".into()));
        }
        if let Some(&k) = fold_of.iter().find(|&&k| k >= surfaces.len()) {
            return Err(Error::InvalidArgument(format!("fold {k} has no surface")));
        }
        Ok(FoldedSurfaces { surfaces, fold_of })
    }

    pub fn k(&self) -> usize {
        self.surfaces.len()
    }

    pub fn surfaces(&self) -> &[QSurface] {
        &self.surfaces
    }

    pub fn fold_of(&self) -> &[usize] {
        &self.fold_of
    }

    pub fn sample(&self) -> &Arc<TrainingSample> {
        self.surfaces[0].sample()
    }

    pub fn bandwidth(&self) -> f64 {
        self.surfaces[0].config.bandwidth
    }

    /// `Q_{-k(i)}(X_i, a)` for labeled point `i`, from the surface that
    /// never saw it.
    pub fn held_out_q(&self, i: usize, arm: u8) -> Result<f64> {
        let s = &self.surfaces[self.fold_of[i]];
        s.q(s.sample.x(i), arm)
    }

    /// `K^{-1} sum_k Q_{-k}(x, a)`.
    pub fn averaged_q(&self, x: &[f64], arm: u8) -> Result<f64> {
        let mut total = 0.0;
        for s in &self.surfaces {
            total += s.q(x, arm)?;
        }
        Ok(total / self.k() as f64)
    }
}

/// Builds the fold-held-out surfaces on a seeded partition.
pub fn fit_folded(sample: &Arc<TrainingSample>, config: KernelConfig, k: usize, seed: u64) -> Result<FoldedSurfaces> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    if k > sample.len() {
        return Err(Error::InvalidArgument(format!(
            "{k} folds exceed the {} labeled points",
            sample.len()
        )));
    }
    let fold_of = fold_assignment(sample.len(), k, seed);
    let mut surfaces = Vec::with_capacity(k);
    for fold in 0..k {
        let mut active = [Vec::new(), Vec::new()];
        for arm in 0..2u8 {
            active[arm as usize] = sample.arm_indices(arm, |i| fold_of[i] != fold);
            if active[arm as usize].is_empty() {
                return Err(Error::FoldArmEmpty { fold, arm });
            }
        }
        surfaces.push(QSurface {
            sample: Arc::clone(sample),
            config,
            active,
            held_out_fold: Some(fold),
        });
    }
    Ok(FoldedSurfaces { surfaces, fold_of })
}

/// Pilot bandwidth `n^{-1/(p+4)}` on the standardized scale.
pub fn pilot_bandwidth(n: usize, p: usize) -> f64 {
    (n as f64).powf(-1.0 / (p as f64 + 4.0))
}

/// Log-spaced grid over `[h0/4, 4 h0]`.
pub fn default_grid(n: usize, p: usize) -> Vec<f64> {
    let h0 = pilot_bandwidth(n, p);
    let (lo, hi) = ((h0 / 4.0).ln(), (4.0 * h0).ln());
    let m = DEFAULT_GRID_SIZE;
    (0..m)
        .map(|i| (lo + (hi - lo) * i as f64 / (m - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSelection {
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    /// Out-of-fold squared prediction error for each grid value.
    pub cv_error: Vec<f64>,
}

/// K-fold cross-validated choice of the shared bandwidth.
///
/// Each held-out point is predicted from its own arm's surface fitted on the
/// remaining folds. When the remaining folds contain no point of that arm the
/// prediction is the pooled outcome mean of the remaining folds. Exact ties
/// go to the larger bandwidth.
pub fn select_bandwidth(sample: &TrainingSample, folds: usize, grid: &[f64], seed: u64) -> Result<BandwidthSelection> {
    if folds < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {folds}")));
    }
    if grid.is_empty() {
        return Err(Error::InvalidArgument("bandwidth grid is empty".into()));
    }
    if let Some(h) = grid.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
        return Err(Error::InvalidArgument(format!("bandwidth grid value {h} is not positive")));
    }
    if folds > sample.len() {
        return Err(Error::InvalidArgument(format!(
            "{folds} folds exceed the {} labeled points",
            sample.len()
        )));
    }
    if grid.len() == 1 {
        return Ok(BandwidthSelection {
            bandwidth: grid[0],
            grid: grid.to_vec(),
            cv_error: vec![f64::NAN],
        });
    }

    let fold_of = fold_assignment(sample.len(), folds, seed);
    let complements: Vec<[Vec<usize>; 2]> = (0..folds)
        .map(|k| {
            [
                sample.arm_indices(0, |i| fold_of[i] != k),
                sample.arm_indices(1, |i| fold_of[i] != k),
            ]
        })
        .collect();
    let pooled_mean: Vec<f64> = complements
        .iter()
        .map(|c| {
            let idx = c[0].iter().chain(&c[1]);
            let (s, m) = idx.fold((0.0, 0usize), |(s, m), &i| (s + sample.y(i), m + 1));
            if m == 0 {
                0.0
            } else {
                s / m as f64
            }
        })
        .collect();

    let cv_error: Vec<f64> = grid
        .par_iter()
        .map(|&h| {
            let cfg = KernelConfig {
                bandwidth: h,
                denom_floor: DEFAULT_DENOM_FLOOR,
            };
            let mut sse = 0.0;
            for i in 0..sample.len() {
                let k = fold_of[i];
                let arm = sample.a(i) as usize;
                let pred = sample
                    .weighted_mean(&complements[k][arm], sample.x(i), &cfg, None)
                    .unwrap_or(pooled_mean[k]);
                let r = sample.y(i) - pred;
                sse += r * r;
            }
            sse
        })
        .collect();

    let mut best = 0;
    for j in 1..grid.len() {
        let better = cv_error[j] < cv_error[best];
        let tie_larger = cv_error[j] == cv_error[best] && grid[j] > grid[best];
        if better || tie_larger {
            best = j;
        }
    }
    Ok(BandwidthSelection {
        bandwidth: grid[best],
        grid: grid.to_vec(),
        cv_error,
    })
}

/// Rate-condition checks for a chosen bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthDiagnostics {
    /// `sqrt(n) h^r`, which should be small (bias negligible at root-n).
    pub bias_rate: f64,
    /// `sqrt(log n / (n h^p))`, which should be small (uniform consistency).
    pub uniform_rate: f64,
    pub bias_warning: bool,
    pub variance_warning: bool,
}

pub fn bandwidth_diagnostics(n: usize, p: usize, h: f64) -> BandwidthDiagnostics {
    let nf = n as f64;
    let bias_rate = nf.sqrt() * h.powi(KERNEL_ORDER);
    let uniform_rate = (nf.ln() / (nf * h.powi(p as i32))).sqrt();
    BandwidthDiagnostics {
        bias_rate,
        uniform_rate,
        bias_warning: bias_rate > 1.0,
        variance_warning: uniform_rate > 0.5,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(rows: &[(f64, u8, f64)]) -> Arc<TrainingSample> {
        let x: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.0]).collect();
        let a: Vec<u8> = rows.iter().map(|r| r.1).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.2).collect();
        Arc::new(TrainingSample::new(&x, &a, &y).unwrap())
    }

    #[test]
    fn single_point_surface() {
        let s = sample(&[(0.3, 1, 4.0)]);
        let q = QSurface::fit(s, KernelConfig::new(0.5).unwrap());
        assert_eq!(q.q(&[0.3], 1).unwrap(), 4.0);
        assert!(matches!(q.q(&[0.3], 0), Err(Error::EmptyArm { arm: 0 })));
        assert!(q.contrast(&[0.0]).is_err());
    }

    #[test]
    fn constant_outcomes() {
        let s = sample(&[(-1.0, 1, 7.0), (0.2, 1, 7.0), (2.0, 1, 7.0), (0.0, 0, 1.0)]);
        let q = QSurface::fit(s, KernelConfig::new(0.7).unwrap());
        for x in [-3.0, -0.5, 0.0, 1.1, 2.5] {
            assert!((q.q(&[x], 1).unwrap() - 7.0).abs() < 1e-14);
        }
    }

    #[test]
    fn far_query_falls_back_to_arm_mean() {
        let s = sample(&[(0.0, 1, 1.0), (0.1, 1, 3.0), (0.0, 0, 0.0)]);
        let q = QSurface::fit(s, KernelConfig::new(0.1).unwrap());
        assert_eq!(q.q(&[100.0], 1).unwrap(), 2.0);
    }

    #[test]
    fn folds_partition_indices() {
        let f = fold_assignment(10, 5, 3);
        for k in 0..5 {
            assert_eq!(f.iter().filter(|&&v| v == k).count(), 2);
        }
        assert_eq!(f, fold_assignment(10, 5, 3));
        assert_ne!(fold_assignment(100, 5, 3), fold_assignment(100, 5, 4));
        let g = fold_assignment(11, 3, 0);
        let sizes: Vec<usize> = (0..3).map(|k| g.iter().filter(|&&v| v == k).count()).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn folded_surfaces_exclude_their_fold() {
        let rows: Vec<(f64, u8, f64)> = (0..20).map(|i| (i as f64 / 10.0, (i % 2) as u8, i as f64)).collect();
        let s = sample(&rows);
        let folded = fit_folded(&s, KernelConfig::new(0.5).unwrap(), 4, 9).unwrap();
        assert_eq!(folded.k(), 4);
        for (k, surf) in folded.surfaces().iter().enumerate() {
            assert_eq!(surf.held_out_fold(), Some(k));
            for arm in 0..2u8 {
                for &i in surf.training_indices(arm) {
                    assert_ne!(folded.fold_of()[i], k);
                    assert_eq!(s.a(i), arm);
                }
            }
        }
    }

    #[test]
    fn empty_arm_in_complement_is_an_error() {
        let s = sample(&[(0.0, 1, 1.0), (1.0, 1, 1.0), (2.0, 0, 0.0), (3.0, 1, 0.0)]);
        let err = fit_folded(&s, KernelConfig::new(1.0).unwrap(), 4, 0).unwrap_err();
        assert!(matches!(err, Error::FoldArmEmpty { arm: 0, .. }));
        assert!(err.to_string().contains("fewer folds"));
    }

    #[test]
    fn singleton_grid() {
        let s = sample(&[(0.0, 1, 1.0), (1.0, 0, 1.0), (2.0, 1, 0.0), (3.0, 0, 0.0)]);
        assert_eq!(select_bandwidth(&s, 2, &[0.37], 0).unwrap().bandwidth, 0.37);
    }

    #[test]
    fn grid_spans_pilot() {
        let g = default_grid(500, 2);
        let h0 = pilot_bandwidth(500, 2);
        assert_eq!(g.len(), 15);
        assert!((g[0] - h0 / 4.0).abs() < 1e-12 && (g[14] - 4.0 * h0).abs() < 1e-12);
        assert!((g[7] - h0).abs() < 1e-12);
    }

    #[test]
    fn diagnostics_flags() {
        let d = bandwidth_diagnostics(500, 2, 1.0);
        assert!(d.bias_warning);
        let d = bandwidth_diagnostics(500, 2, 0.01);
        assert!(!d.bias_warning && d.variance_warning);
    }

    #[test]
    fn leave_one_out_ignores_own_outcome() {
        let s = sample(&[(0.0, 1, 1.0), (0.5, 1, 3.0), (1.0, 1, 5.0), (0.0, 0, 0.0)]);
        let q = QSurface::fit(s, KernelConfig::new(0.5).unwrap());
        let w = (-0.5f64).exp();
        let expect = (3.0 * w + 5.0 * (-2.0f64).exp()) / (w + (-2.0f64).exp());
        assert!((q.q_leave_one_out(0).unwrap() - expect).abs() < 1e-14);
    }
}
