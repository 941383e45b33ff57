//! Monte Carlo study: three contrast models crossed with two baseline
//! functions, with TR and SS (optionally NP) fitted in every replication.

mod dgp;
mod metrics;
mod report;
mod study;
mod truth;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::BandwidthChoice;
use crate::propensity::DEFAULT_CLIP_EPS;

pub use dgp::{generate_replication, propensity_truth, replication_rng};
pub use metrics::{pcd, value_of_rule};
pub use report::{coefficient_table, decision_table};
pub use study::{run_study, CoefSummary, MethodRow, MethodSummary, ReplicationRow, SimReport};
pub use truth::{compute_truth, TruthSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// C(x) = x1 + x2
    Linear,
    /// C(x) = (0.3 x1 + 0.6 x2)^3
    Cubic,
    /// C(x) = sin(x1 + x2)
    Sine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    /// mu(x) = (0.5 x1 + 0.5 x2)^3
    B1,
    /// mu(x) = (0.75 x1 + 0.75 x2)(1 + 0.5 x1 + 0.5 x2)
    B2,
}

impl Model {
    pub const ALL: [Model; 3] = [Model::Linear, Model::Cubic, Model::Sine];

    /// Contrast function; only the first two coordinates enter.
    pub fn contrast(self, x: &[f64]) -> f64 {
        match self {
            Model::Linear => x[0] + x[1],
            Model::Cubic => (0.3 * x[0] + 0.6 * x[1]).powi(3),
            Model::Sine => (x[0] + x[1]).sin(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Model::Linear => "linear",
            Model::Cubic => "cubic",
            Model::Sine => "sine",
        }
    }
}

impl Baseline {
    pub const ALL: [Baseline; 2] = [Baseline::B1, Baseline::B2];

    pub fn mean(self, x: &[f64]) -> f64 {
        match self {
            Baseline::B1 => (0.5 * x[0] + 0.5 * x[1]).powi(3),
            Baseline::B2 => (0.75 * x[0] + 0.75 * x[1]) * (1.0 + 0.5 * x[0] + 0.5 * x[1]),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Baseline::B1 => "b1",
            Baseline::B2 => "b2",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Baseline::B1 => "(w'X)^3",
            Baseline::B2 => "(a'X)(1+w'X)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub model: Model,
    pub baseline: Baseline,
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub p: usize,
    pub replications: usize,
    pub mc_truth_size: usize,
    pub seed: u64,
    pub kfolds: usize,
    pub bandwidth: BandwidthChoice,
    pub grid: Option<Vec<f64>>,
    pub clip_eps: f64,
    pub include_np: bool,
}

impl SimConfig {
    pub fn new(model: Model, baseline: Baseline) -> Self {
        SimConfig {
            model,
            baseline,
            n: 500,
            big_n: 5000,
            p: 2,
            replications: 100,
            mc_truth_size: 500_000,
            seed: 1,
            kfolds: 5,
            bandwidth: BandwidthChoice::Auto,
            grid: None,
            clip_eps: DEFAULT_CLIP_EPS,
            include_np: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidArgument(m));
        if self.n < 50 {
            return fail(format!("n must be at least 50, got {}", self.n));
        }
        if self.replications < 1 {
            return fail("at least one replication is required".into());
        }
        if self.mc_truth_size < 10 * self.n {
            return fail(format!(
                "Monte Carlo truth size {} must be at least 10 n = {}",
                self.mc_truth_size,
                10 * self.n
            ));
        }
        if self.p < 2 {
            return fail(format!("the simulation models need p >= 2, got {}", self.p));
        }
        if self.kfolds < 2 {
            return fail(format!("need at least 2 folds, got {}", self.kfolds));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 0.5) {
            return fail(format!("clip_eps must lie in (0, 0.5), got {}", self.clip_eps));
        }
        Ok(())
    }
}
