//! Optimal linear treatment regimes from partially labeled observational
//! data.
//!
//! Three estimators of the regime coefficients are provided: a
//! transformed-response least-squares fit on labeled data only (TR), an
//! imputation estimator that regresses kernel-estimated contrasts over the
//! unlabeled covariates (NP), and its cross-fitted, linearly refitted
//! semi-supervised variant (SS). Each comes with influence-function
//! standard errors. A simulation harness regenerates the Monte Carlo study
//! used to compare them.

pub mod cli;
pub mod data;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod kernel;
pub mod propensity;
pub mod simulation;

pub use error::{Error, Result};
