use serde::{Deserialize, Serialize};

use crate::data::Standardization;

/// Linear treatment rule `d(x) = I(beta' x~ > 0)` with `beta` on the
/// standardized scale; raw covariates are standardized before use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRule {
    pub beta: Vec<f64>,
    pub scale: Standardization,
}

impl DecisionRule {
    pub fn new(beta: Vec<f64>, scale: Standardization) -> Self {
        assert_eq!(beta.len(), scale.dim() + 1, "rule dimension mismatch");
        DecisionRule { beta, scale }
    }

    pub fn p(&self) -> usize {
        self.scale.dim()
    }

    /// Index `beta' x~` at a raw covariate vector.
    pub fn index(&self, x_raw: &[f64]) -> f64 {
        let z = self.scale.apply(x_raw);
        self.beta[0] + self.beta[1..].iter().zip(&z).map(|(b, v)| b * v).sum::<f64>()
    }

    /// 1 when the index is strictly positive; exact ties get treatment 0.
    pub fn decide(&self, x_raw: &[f64]) -> u8 {
        (self.index(x_raw) > 0.0) as u8
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule(beta: Vec<f64>) -> DecisionRule {
        let p = beta.len() - 1;
        DecisionRule::new(beta, Standardization::identity(p))
    }

    #[test]
    fn sign_of_index() {
        let r = rule(vec![0.0, 1.0, 1.0]);
        assert_eq!(r.decide(&[1.0, 1.0]), 1);
        assert_eq!(r.decide(&[1.0, -1.0]), 0);
        assert_eq!(r.decide(&[-1.0, -0.5]), 0);
    }

    #[test]
    fn applies_standardization() {
        let r = DecisionRule::new(
            vec![0.0, 1.0],
            Standardization {
                mean: vec![10.0],
                sd: vec![2.0],
            },
        );
        assert_eq!(r.decide(&[10.5]), 1);
        assert_eq!(r.decide(&[9.5]), 0);
        assert_eq!(r.decide(&[10.0]), 0);
    }
}
