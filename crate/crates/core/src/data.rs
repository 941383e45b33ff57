//! Observation records, labeled/unlabeled containers, CSV ingestion and
//! covariate standardization.
//!
//! Labeled rows carry `(x, a, y)`; unlabeled rows carry only `x`. The two
//! live in separate files so no sentinel is ever needed for a missing
//! treatment or outcome.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Treatment and outcome of a labeled subject.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Label {
    pub a: u8,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub x: Vec<f64>,
    pub label: Option<Label>,
}

impl Observation {
    pub fn labeled(x: Vec<f64>, a: u8, y: f64) -> Self {
        Observation {
            x,
            label: Some(Label { a, y }),
        }
    }

    pub fn unlabeled(x: Vec<f64>) -> Self {
        Observation { x, label: None }
    }

    pub fn a(&self) -> Option<u8> {
        self.label.map(|l| l.a)
    }

    pub fn y(&self) -> Option<f64> {
        self.label.map(|l| l.y)
    }
}

/// Per-coordinate affine map `z = (x - mean) / sd`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardization {
    pub fn identity(p: usize) -> Self {
        Standardization {
            mean: vec![0.0; p],
            sd: vec![1.0; p],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.sd))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    /// Linear map taking coefficients on the standardized augmented scale to
    /// the raw augmented scale: `beta_raw = T beta_std`.
    pub fn coefficient_map(&self) -> crate::linalg::Matrix {
        let p = self.dim();
        let mut t = crate::linalg::Matrix::zeros(p + 1, p + 1);
        t[(0, 0)] = 1.0;
        for k in 0..p {
            t[(0, k + 1)] = -self.mean[k] / self.sd[k];
            t[(k + 1, k + 1)] = 1.0 / self.sd[k];
        }
        t
    }

    pub fn beta_to_raw(&self, beta: &[f64]) -> Vec<f64> {
        self.coefficient_map().matvec(beta)
    }

    /// Composition: first `self`, then `then`.
    fn compose(&self, then: &Standardization) -> Standardization {
        let mean = self
            .mean
            .iter()
            .zip(&self.sd)
            .zip(&then.mean)
            .map(|((m, s), m2)| m + s * m2)
            .collect();
        let sd = self.sd.iter().zip(&then.sd).map(|(s, s2)| s * s2).collect();
        Standardization { mean, sd }
    }
}

/// `(1, x')'`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedCovariate(Vec<f64>);

impl AugmentedCovariate {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

pub fn augment(x: &[f64]) -> AugmentedCovariate {
    let mut v = Vec::with_capacity(x.len() + 1);
    v.push(1.0);
    v.extend_from_slice(x);
    AugmentedCovariate(v)
}

/// Labeled sample O and unlabeled sample U sharing covariate dimension `p`.
///
/// Immutable once built. `standardization` is `None` while covariates are
/// on their raw scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    labeled: Vec<Observation>,
    unlabeled: Vec<Observation>,
    p: usize,
    standardization: Option<Standardization>,
}

impl Dataset {
    /// Validates dimensions, finiteness, label presence and that both
    /// treatment arms occur among the labeled rows.
    pub fn new(labeled: Vec<Observation>, unlabeled: Vec<Observation>) -> Result<Self> {
        let first = labeled.first().ok_or(Error::EmptyLabeled)?;
        let p = first.x.len();
        let mut treated = 0;
        for (row, obs) in labeled.iter().enumerate() {
            check_row(obs, p)?;
            let label = obs.label.ok_or_else(|| {
                Error::InvalidArgument(format!("labeled row {} has no treatment/outcome", row + 1))
            })?;
            if label.a > 1 {
                return Err(Error::NonBinaryTreatment {
                    row: row + 1,
                    value: label.a.to_string(),
                });
            }
            if !label.y.is_finite() {
                return Err(Error::BadCell {
                    column: "y".into(),
                    row: row + 1,
                });
            }
            treated += label.a as usize;
        }
        for (row, obs) in unlabeled.iter().enumerate() {
            check_row(obs, p)?;
            if obs.label.is_some() {
                return Err(Error::InvalidArgument(format!(
                    "unlabeled row {} carries a treatment/outcome",
                    row + 1
                )));
            }
        }
        let control = labeled.len() - treated;
        if treated == 0 || control == 0 {
            return Err(Error::MissingArm { treated, control });
        }
        Ok(Dataset {
            labeled,
            unlabeled,
            p,
            standardization: None,
        })
    }

    pub fn labeled(&self) -> &[Observation] {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &[Observation] {
        &self.unlabeled
    }

    pub fn n(&self) -> usize {
        self.labeled.len()
    }

    pub fn big_n(&self) -> usize {
        self.unlabeled.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn standardization(&self) -> Option<&Standardization> {
        self.standardization.as_ref()
    }

    /// Standardization in effect, identity when covariates are raw.
    pub fn scale(&self) -> Standardization {
        self.standardization
            .clone()
            .unwrap_or_else(|| Standardization::identity(self.p))
    }

    /// Same covariates with every treatment flipped, `a -> 1 - a`.
    pub fn relabeled(&self) -> Dataset {
        let mut ds = self.clone();
        for obs in &mut ds.labeled {
            if let Some(l) = obs.label.as_mut() {
                l.a = 1 - l.a;
            }
        }
        ds
    }

    /// Fails unless `n >= p + 2`, the minimum for solvable normal equations
    /// with residual degrees of freedom.
    pub fn require_estimable(&self) -> Result<()> {
        let required = self.p + 2;
        if self.n() < required {
            return Err(Error::TooFewLabeled {
                n: self.n(),
                required,
            });
        }
        Ok(())
    }

    pub fn treatments(&self) -> Vec<u8> {
        self.labeled.iter().map(|o| o.a().unwrap_or(0)).collect()
    }

    pub fn outcomes(&self) -> Vec<f64> {
        self.labeled.iter().map(|o| o.y().unwrap_or(0.0)).collect()
    }
}

fn check_row(obs: &Observation, p: usize) -> Result<()> {
    if obs.x.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: obs.x.len(),
        });
    }
    if let Some(k) = obs.x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            column: format!("x{}", k + 1),
        });
    }
    Ok(())
}

/// Rescales every coordinate to pooled (labeled and unlabeled) mean 0 and
/// population sd 1.
///
/// Re-standardizing composes with the recorded map, so the stored
/// `(mean, sd)` always refer to the original raw inputs.
pub fn standardize(ds: &Dataset) -> Result<Dataset> {
    let p = ds.p;
    let total = (ds.n() + ds.big_n()) as f64;
    let pooled = || ds.labeled.iter().chain(&ds.unlabeled);
    let mut mean = vec![0.0; p];
    for obs in pooled() {
        for (m, v) in mean.iter_mut().zip(&obs.x) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= total);
    let mut var = vec![0.0; p];
    for obs in pooled() {
        for ((s, v), m) in var.iter_mut().zip(&obs.x).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let mut sd = Vec::with_capacity(p);
    for (k, s) in var.iter().enumerate() {
        let v = (s / total).sqrt();
        if !(v > 0.0) {
            return Err(Error::ZeroVariance {
                column: format!("x{}", k + 1),
            });
        }
        sd.push(v);
    }
    let step = Standardization { mean, sd };
    let map = |obs: &Observation| Observation {
        x: step.apply(&obs.x),
        label: obs.label,
    };
    let standardization = Some(match &ds.standardization {
        Some(prev) => prev.compose(&step),
        None => step.clone(),
    });
    Ok(Dataset {
        labeled: ds.labeled.iter().map(map).collect(),
        unlabeled: ds.unlabeled.iter().map(map).collect(),
        p,
        standardization,
    })
}

fn covariate_header(p: usize) -> Vec<String> {
    (1..=p).map(|k| format!("x{k}")).collect()
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn parse_cell(rec: &csv::StringRecord, idx: usize, column: &str, row: usize) -> Result<f64> {
    rec.get(idx)
        .filter(|s| !s.is_empty())
        .and_then(|s| s.parse::<f64>().ok())
        .ok_or_else(|| Error::BadCell {
            column: column.to_string(),
            row,
        })
}

/// Reads a covariate-only CSV with header `x1,...,xp`.
pub fn read_covariates(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rdr = open(path)?;
    let headers = rdr.headers()?.clone();
    let p = headers.len();
    let expected = covariate_header(p);
    if headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Header {
            file: path.display().to_string(),
            expected: expected.join(","),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let x = (0..p)
            .map(|k| parse_cell(&rec, k, &expected[k], i + 1))
            .collect::<Result<Vec<_>>>()?;
        rows.push(x);
    }
    Ok(rows)
}

/// Loads a labeled CSV (`x1,...,xp,a,y`) and an optional unlabeled CSV
/// (`x1,...,xp`). Covariates stay on the raw scale.
pub fn load_csv(labeled_path: &Path, unlabeled_path: Option<&Path>) -> Result<Dataset> {
    let mut rdr = open(labeled_path)?;
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 {
        return Err(Error::Header {
            file: labeled_path.display().to_string(),
            expected: "x1,...,xp,a,y".into(),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    let p = headers.len() - 2;
    let mut expected = covariate_header(p);
    expected.push("a".into());
    expected.push("y".into());
    if headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Header {
            file: labeled_path.display().to_string(),
            expected: expected.join(","),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut labeled = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        if rec.len() != p + 2 {
            return Err(Error::DimensionMismatch {
                expected: p + 2,
                found: rec.len(),
            });
        }
        let x = (0..p)
            .map(|k| parse_cell(&rec, k, &expected[k], row))
            .collect::<Result<Vec<_>>>()?;
        let a_raw = parse_cell(&rec, p, "a", row)?;
        let a = if a_raw == 0.0 {
            0
        } else if a_raw == 1.0 {
            1
        } else {
            return Err(Error::NonBinaryTreatment {
                row,
                value: rec[p].to_string(),
            });
        };
        let y = parse_cell(&rec, p + 1, "y", row)?;
        labeled.push(Observation::labeled(x, a, y));
    }
    let unlabeled = match unlabeled_path {
        Some(path) => {
            let rows = read_covariates(path)?;
            if let Some(r) = rows.first() {
                if r.len() != p {
                    return Err(Error::DimensionMismatch {
                        expected: p,
                        found: r.len(),
                    });
                }
            }
            rows.into_iter().map(Observation::unlabeled).collect()
        }
        None => Vec::new(),
    };
    Dataset::new(labeled, unlabeled)
}

/// Writes the labeled rows, and the unlabeled rows when a second path is
/// given, using shortest round-trip float formatting.
pub fn write_csv(ds: &Dataset, labeled_path: &Path, unlabeled_path: Option<&Path>) -> Result<()> {
    let mut out = covariate_header(ds.p).join(",");
    out.push_str(",a,y\n");
    for obs in &ds.labeled {
        for v in &obs.x {
            out.push_str(&format!("{v:?},"));
        }
        let l = obs.label.expect("labeled row");
        out.push_str(&format!("{},{:?}\n", l.a, l.y));
    }
    File::create(labeled_path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|source| Error::Io {
            path: labeled_path.to_path_buf(),
            source,
        })?;

    if let Some(path) = unlabeled_path {
        let rows: Vec<Vec<f64>> = ds.unlabeled.iter().map(|o| o.x.clone()).collect();
        write_covariates(path, &rows, ds.p)?;
    }
    Ok(())
}

pub fn write_covariates(path: &Path, rows: &[Vec<f64>], p: usize) -> Result<()> {
    let mut out = covariate_header(p).join(",");
    out.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}
