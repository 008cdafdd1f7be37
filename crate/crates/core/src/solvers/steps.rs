use super::{Algorithm, SaddleProblem};
use crate::error::{Error, Result};

/// Safety factor in the primal step: `τ = 0.99 / (γ·max_i ‖A_i‖)`.
const TAU_MARGIN: f64 = 0.99;

#[derive(Clone, Debug, PartialEq)]
pub struct StepSizes {
    pub algorithm: Algorithm,
    /// Ratio between dual and primal steps chosen by grid search.
    pub gamma: f64,
    pub tau: f64,
    /// One dual step per block. PDHG uses the same value for every block.
    pub sigma: Vec<f64>,
}

impl StepSizes {
    /// `√(max_i τσ_i‖A_i‖²/p_i)` for SPDHG, `√(τσ‖A‖²)` for PDHG.
    pub fn contraction(&self, problem: &SaddleProblem) -> f64 {
        match self.algorithm {
            Algorithm::Spdhg => problem
                .block_norms()
                .iter()
                .zip(&self.sigma)
                .zip(problem.probabilities())
                .map(|((n, s), p)| self.tau * s * n * n / p)
                .fold(0.0, f64::max)
                .sqrt(),
            Algorithm::Pdhg => {
                let n = problem.stacked_norm();
                (self.tau * self.sigma[0] * n * n).sqrt()
            }
        }
    }
}

/// A block (or, for PDHG, the stacked operator when `block` is `None`) whose
/// step product `τσ_i‖A_i‖²` is not strictly below its bound.
#[derive(Clone, Debug, PartialEq)]
pub struct StepViolation {
    pub block: Option<usize>,
    pub lhs: f64,
    pub bound: f64,
}

/// SPDHG: `σ_i = γ p_i/‖A_i‖`, `τ = 0.99/(γ max_i ‖A_i‖)`.
/// PDHG: `σ = γ/‖A‖`, `τ = 0.99/(γ‖A‖)` for the stacked operator.
pub fn compute_step_sizes(
    problem: &SaddleProblem,
    gamma: f64,
    algorithm: Algorithm,
) -> Result<StepSizes> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::NonPositiveStep(gamma));
    }
    if let Some(i) = problem.block_norms().iter().position(|&n| n == 0.0) {
        return Err(Error::DegenerateBlock { block: i });
    }
    match algorithm {
        Algorithm::Spdhg => {
            let max_norm = problem.block_norms().iter().copied().fold(0.0, f64::max);
            let sigma = problem
                .block_norms()
                .iter()
                .zip(problem.probabilities())
                .map(|(n, p)| gamma * p / n)
                .collect();
            Ok(StepSizes {
                algorithm,
                gamma,
                tau: TAU_MARGIN / (gamma * max_norm),
                sigma,
            })
        }
        Algorithm::Pdhg => {
            let norm = problem.stacked_norm();
            if norm == 0.0 {
                return Err(Error::DegenerateBlock { block: 0 });
            }
            Ok(StepSizes {
                algorithm,
                gamma,
                tau: TAU_MARGIN / (gamma * norm),
                sigma: vec![gamma / norm; problem.n_blocks()],
            })
        }
    }
}

/// Checks `τσ_i‖A_i‖² < p_i` for every block (SPDHG) or `τσ‖A‖² < 1` (PDHG),
/// using the problem's cached norm bounds. Empty means the condition holds.
pub fn validate_step_sizes(problem: &SaddleProblem, steps: &StepSizes) -> Vec<StepViolation> {
    if steps.sigma.len() != problem.n_blocks() {
        return vec![StepViolation {
            block: None,
            lhs: f64::NAN,
            bound: f64::NAN,
        }];
    }
    let tau = steps.tau;
    match steps.algorithm {
        Algorithm::Spdhg => problem
            .block_norms()
            .iter()
            .zip(&steps.sigma)
            .zip(problem.probabilities())
            .enumerate()
            .filter_map(|(i, ((n, s), &p))| {
                let lhs = tau * s * n * n;
                (!(tau > 0.0 && *s > 0.0 && lhs < p)).then_some(StepViolation {
                    block: Some(i),
                    lhs,
                    bound: p,
                })
            })
            .collect(),
        Algorithm::Pdhg => {
            let n = problem.stacked_norm();
            let s = steps.sigma[0];
            let lhs = tau * s * n * n;
            let uniform = steps.sigma.iter().all(|v| *v == s);
            if tau > 0.0 && s > 0.0 && uniform && lhs < 1.0 {
                Vec::new()
            } else {
                vec![StepViolation {
                    block: None,
                    lhs,
                    bound: 1.0,
                }]
            }
        }
    }
}
