#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use ssregime::data::{Dataset, Observation};

/// Explicit inverse of a 3x3 matrix by cofactors.
pub fn cofactor_inverse3(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let c = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let cof = [
        [c(1, 2, 1, 2), -c(1, 2, 0, 2), c(1, 2, 0, 1)],
        [-c(0, 2, 1, 2), c(0, 2, 0, 2), -c(0, 2, 0, 1)],
        [c(0, 1, 1, 2), -c(0, 1, 0, 2), c(0, 1, 0, 1)],
    ];
    let det = m[0][0] * cof[0][0] + m[0][1] * cof[0][1] + m[0][2] * cof[0][2];
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            inv[i][j] = cof[j][i] / det;
        }
    }
    inv
}

/// Solves `sum x~ x~' b = sum x~ t` for p = 2 by the cofactor inverse.
pub fn normal_equations3(xs: &[Vec<f64>], t: &[f64]) -> [f64; 3] {
    let mut g = [[0.0; 3]; 3];
    let mut r = [0.0; 3];
    for (x, &ti) in xs.iter().zip(t) {
        let xt = [1.0, x[0], x[1]];
        for i in 0..3 {
            r[i] += xt[i] * ti;
            for j in 0..3 {
                g[i][j] += xt[i] * xt[j];
            }
        }
    }
    let inv = cofactor_inverse3(g);
    let mut b = [0.0; 3];
    for i in 0..3 {
        for j in 0..3 {
            b[i] += inv[i][j] * r[j];
        }
    }
    b
}

/// Nadaraya-Watson value written out directly from its definition.
pub fn nw_by_hand(xs: &[Vec<f64>], a: &[u8], y: &[f64], arm: u8, query: &[f64], h: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..xs.len() {
        if a[i] != arm {
            continue;
        }
        let mut w = 1.0;
        for (u, v) in xs[i].iter().zip(query) {
            let t = (u - v) / h;
            w *= (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        }
        num += w * y[i];
        den += w;
    }
    num / den
}

/// Gaussian covariates with a logistic treatment and a supplied outcome.
pub fn synthetic(n: usize, big_n: usize, p: usize, seed: u64, outcome: impl Fn(&[f64], u8, f64) -> f64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..p).map(|_| rng.sample(StandardNormal)).collect() };
    let labeled = (0..n)
        .map(|_| {
            let x = draw(&mut rng);
            let pi = 1.0 / (1.0 + (-(0.4 * x[0] - 0.3 * x[p - 1])).exp());
            let a = u8::from(rng.random::<f64>() < pi);
            let e: f64 = rng.sample(StandardNormal);
            let y = outcome(&x, a, e);
            Observation::labeled(x, a, y)
        })
        .collect();
    let unlabeled = (0..big_n).map(|_| Observation::unlabeled(draw(&mut rng))).collect();
    Dataset::new(labeled, unlabeled).unwrap()
}
