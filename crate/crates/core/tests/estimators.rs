//! Estimator behaviour on constructed data and small Monte Carlo runs.

mod common;

use std::sync::Arc;

use ssregime::data::{standardize, Dataset, Standardization};
use ssregime::estimators::{
    fit_np, fit_regime, fit_ss, fit_ss_with_theta, fit_tr, refit_theta, BandwidthChoice, DecisionRule, FitOptions,
    Method,
};
use ssregime::kernel::{fit_folded, FoldedSurfaces, KernelConfig, QSurface, TrainingSample};
use ssregime::propensity::{fit_propensity, PropensityFit, PropensityOptions};
use ssregime::simulation::{generate_replication, Baseline, Model, SimConfig};
use ssregime::Error;

fn model1(n: usize, big_n: usize) -> SimConfig {
    let mut cfg = SimConfig::new(Model::Linear, Baseline::B1);
    cfg.n = n;
    cfg.big_n = big_n;
    cfg.mc_truth_size = cfg.mc_truth_size.max(10 * n);
    cfg
}

#[test]
fn propensity_recovers_generating_coefficients() {
    let ds = generate_replication(&model1(5000, 0), 0).unwrap();
    let fit = fit_propensity(&ds, &PropensityOptions::default()).unwrap();
    assert!(fit.converged);
    for (g, t) in fit.gamma.iter().zip([0.0, 0.5, -0.5]) {
        assert!((g - t).abs() < 0.06, "{:?}", fit.gamma);
    }
}

#[test]
fn tr_bias_and_coverage_over_replications() {
    let cfg = model1(500, 0);
    let reps = 500;
    let mut sum = [0.0; 3];
    let mut cover = [0usize; 3];
    for rep in 0..reps {
        let ds = generate_replication(&cfg, rep).unwrap();
        let out = fit_regime(
            &ds,
            &FitOptions {
                method: Method::Tr,
                ..Default::default()
            },
        )
        .unwrap();
        let (b, se) = (out.fit.beta_raw(), out.fit.se_raw());
        for j in 0..3 {
            let truth = if j == 0 { 0.0 } else { 1.0 };
            sum[j] += b[j] - truth;
            if (b[j] - truth).abs() <= 1.959964 * se[j] {
                cover[j] += 1;
            }
        }
    }
    let reference_bias = [-0.010, -0.021, -0.020];
    for j in 0..3 {
        let bias = sum[j] / reps as f64;
        let cp = cover[j] as f64 / reps as f64;
        assert!((bias - reference_bias[j]).abs() < 0.03, "coef {j}: bias {bias}");
        assert!((0.93..=0.99).contains(&cp), "coef {j}: coverage {cp}");
    }
}

/// Mean NP coefficients and bandwidth over replications.
fn np_means(h: BandwidthChoice, reps: usize) -> ([f64; 3], f64) {
    let cfg = model1(500, 5000);
    let mut sum = [0.0; 3];
    let mut hsum = 0.0;
    for rep in 0..reps {
        let ds = generate_replication(&cfg, rep).unwrap();
        let out = fit_regime(
            &ds,
            &FitOptions {
                method: Method::Np,
                bandwidth: h,
                seed: rep as u64,
                ..Default::default()
            },
        )
        .unwrap();
        hsum += out.fit.bandwidth.unwrap();
        for (s, b) in sum.iter_mut().zip(out.fit.beta_raw()) {
            *s += b;
        }
    }
    (sum.map(|s| s / reps as f64), hsum / reps as f64)
}

#[test]
fn np_slope_shrinks_by_the_smoothing_factor_at_cross_validated_bandwidth() {
    // For a linear signal and N(0, I) covariates the Gaussian-kernel local
    // mean of X near x is x / (1 + h^2), so the slopes shrink by that factor.
    let (mean, hbar) = np_means(BandwidthChoice::Auto, 40);
    assert!(mean[0].abs() < 0.05, "intercept {}", mean[0]);
    let factor = 1.0 / (1.0 + hbar * hbar);
    for &m in &mean[1..] {
        assert!((m - factor).abs() < 0.03, "slopes {mean:?}, predicted {factor} at h = {hbar}");
    }
}

#[test]
fn ss_reduces_to_np_with_zero_correction_and_identical_surfaces() {
    let ds = standardize(&common::synthetic(60, 80, 2, 3, |x, a, e| x[0] + a as f64 * x[1] + e)).unwrap();
    let prop = fit_propensity(&ds, &PropensityOptions::default()).unwrap();
    let surface = QSurface::fit(Arc::new(TrainingSample::from_dataset(&ds)), KernelConfig::new(0.6).unwrap());
    let np = fit_np(&ds, &surface, &prop).unwrap();
    let folded = FoldedSurfaces::from_parts(vec![surface.clone(); 4], (0..60).map(|i| i % 4).collect()).unwrap();
    let ss = fit_ss_with_theta(&ds, &folded, &prop, vec![0.0; 3], vec![0.0; 3]).unwrap();
    assert_eq!(ss.beta, np.beta);
}

#[test]
fn theta_with_constant_weights_is_ordinary_least_squares() {
    let ds = common::synthetic(40, 0, 2, 8, |x, a, e| x[0] * x[1] + a as f64 + e);
    let half = PropensityFit::from_coefficients(vec![0.0; 3], vec![0, 1], 0.01);
    let folded = fit_folded(&Arc::new(TrainingSample::from_dataset(&ds)), KernelConfig::new(0.8).unwrap(), 2, 1).unwrap();
    let theta = refit_theta(&ds, &folded, &half, 1).unwrap();

    let rows: Vec<Vec<f64>> = ds
        .labeled()
        .iter()
        .enumerate()
        .filter(|(_, o)| o.a() == Some(1))
        .map(|(_, o)| o.x.clone())
        .collect();
    let resid: Vec<f64> = ds
        .labeled()
        .iter()
        .enumerate()
        .filter(|(_, o)| o.a() == Some(1))
        .map(|(i, o)| o.y().unwrap() - folded.held_out_q(i, 1).unwrap())
        .collect();
    let ols = common::normal_equations3(&rows, &resid);
    for (t, o) in theta.iter().zip(ols) {
        assert!((t - o).abs() < 1e-10);
    }
}

#[test]
fn constant_outcomes_give_zero_correction_and_constant_contrast() {
    // Each arm has a constant outcome, so every held-out prediction is exact.
    let ds = common::synthetic(40, 60, 2, 12, |_, a, _| if a == 1 { 3.5 } else { 1.0 });
    let prop = fit_propensity(&ds, &PropensityOptions::default()).unwrap();
    let folded = fit_folded(&Arc::new(TrainingSample::from_dataset(&ds)), KernelConfig::new(0.5).unwrap(), 2, 0).unwrap();
    for arm in [0, 1] {
        let theta = refit_theta(&ds, &folded, &prop, arm).unwrap();
        assert!(theta.iter().all(|t| t.abs() < 1e-12), "{theta:?}");
    }
    let ss = fit_ss(&ds, &folded, &prop).unwrap();
    for (b, e) in ss.beta.iter().zip([2.5, 0.0, 0.0]) {
        assert!((b - e).abs() < 1e-12, "{:?}", ss.beta);
    }
}

#[test]
fn np_without_unlabeled_points_to_tr() {
    let ds = common::synthetic(30, 0, 2, 1, |x, a, e| x[0] + a as f64 + e);
    let prop = fit_propensity(&ds, &PropensityOptions::default()).unwrap();
    let s = QSurface::fit(Arc::new(TrainingSample::from_dataset(&ds)), KernelConfig::new(0.5).unwrap());
    let err = fit_np(&ds, &s, &prop).unwrap_err();
    assert!(matches!(err, Error::NoUnlabeled));
    assert!(err.to_string().contains("TR"));
}

#[test]
fn duplicated_observation_keeps_tr_finite() {
    let ds = common::synthetic(30, 0, 2, 21, |x, a, e| x[1] + a as f64 * x[0] + e);
    let mut rows = ds.labeled().to_vec();
    rows.push(rows[0].clone());
    let dup = Dataset::new(rows, vec![]).unwrap();
    let prop = fit_propensity(&dup, &PropensityOptions::default()).unwrap();
    let a = fit_tr(&ds, &fit_propensity(&ds, &PropensityOptions::default()).unwrap()).unwrap();
    let b = fit_tr(&dup, &prop).unwrap();
    for ((x, y), s) in a.beta.iter().zip(&b.beta).zip(&b.se) {
        assert!(y.is_finite() && s.is_finite());
        assert!((x - y).abs() < 0.5);
    }
}

#[test]
fn decision_examples() {
    let rule = DecisionRule::new(vec![0.0, 1.0, 1.0], Standardization::identity(2));
    assert_eq!(rule.decide(&[1.0, 1.0]), 1);
    assert_eq!(rule.decide(&[1.0, -1.0]), 0);
}

#[test]
fn ss_slopes_are_several_times_more_efficient_than_tr() {
    // Model 1 with the larger baseline; RE on the two slopes.
    let mut cfg = SimConfig::new(Model::Linear, Baseline::B2);
    cfg.replications = 60;
    let mut se_tr = [0.0; 3];
    let mut se_ss = [0.0; 3];
    for rep in 0..cfg.replications {
        let ds = generate_replication(&cfg, rep).unwrap();
        for (method, acc) in [(Method::Tr, &mut se_tr), (Method::Ss, &mut se_ss)] {
            let out = fit_regime(
                &ds,
                &FitOptions {
                    method,
                    seed: cfg.seed + rep as u64,
                    ..Default::default()
                },
            )
            .unwrap();
            for (j, b) in out.fit.beta_raw().iter().enumerate() {
                let truth = if j == 0 { 0.0 } else { 1.0 };
                acc[j] += (b - truth).powi(2);
            }
        }
    }
    for j in 1..3 {
        let re = se_tr[j] / se_ss[j];
        assert!((3.0..=6.5).contains(&re), "slope {j}: RE {re}");
    }
}
