//! Closed-form proximal maps, values and convex conjugates of the functionals
//! used by the solvers.
//!
//! Conventions: `prox_{s h}(v) = argmin_u ‖v − u‖²/2 + s·h(u)`, and the squared
//! distance `‖y − b‖²` carries no factor ½.

use crate::error::{Error, Result};
use crate::image::ComplexImage;

/// Slack allowed when testing membership in the domain of an indicator
/// conjugate.
pub const DOMAIN_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum Functional {
    /// `f(y) = ‖y − data‖²`
    SquaredDistance { data: ComplexImage },
    /// `g(x) = alpha·‖x‖²`
    SquaredNorm { alpha: f64 },
    /// `f(y) = alpha·Σ_groups ‖y_group‖₂`. Groups are `group_size` consecutive
    /// entries of the real view, so `group_size` must be even.
    GroupL1 { alpha: f64, group_size: usize },
    Zero,
}

impl Functional {
    pub fn squared_distance(data: ComplexImage) -> Self {
        Functional::SquaredDistance { data }
    }

    pub fn squared_norm(alpha: f64) -> Result<Self> {
        check_weight(alpha)?;
        Ok(Functional::SquaredNorm { alpha })
    }

    pub fn group_l1(alpha: f64, group_size: usize) -> Result<Self> {
        check_weight(alpha)?;
        if group_size == 0 || !group_size.is_multiple_of(2) {
            return Err(Error::InvalidFunctional(format!(
                "group size must be a positive even number of real entries, got {group_size}"
            )));
        }
        Ok(Functional::GroupL1 { alpha, group_size })
    }

    pub fn family(&self) -> &'static str {
        match self {
            Functional::SquaredDistance { .. } => "squared_distance",
            Functional::SquaredNorm { .. } => "squared_norm",
            Functional::GroupL1 { .. } => "group_l1",
            Functional::Zero => "zero",
        }
    }

    /// `prox_{τ·self}(v)`.
    pub fn prox_primal(&self, tau: f64, v: &ComplexImage) -> Result<ComplexImage> {
        check_step(tau)?;
        match self {
            Functional::Zero => Ok(v.clone()),
            Functional::SquaredNorm { alpha } => Ok(v.scaled(1.0 / (1.0 + 2.0 * tau * alpha))),
            Functional::SquaredDistance { data } => {
                self.check_len(v)?;
                let mut out = v.clone();
                out.axpy(2.0 * tau, data);
                out.scale(1.0 / (1.0 + 2.0 * tau));
                Ok(out)
            }
            Functional::GroupL1 { .. } => Err(Error::UnsupportedProx {
                family: "group_l1",
                which: "primal",
                hint: "dualize the term by adding it as a dual block",
            }),
        }
    }

    /// `prox_{σ·self*}(v)`, the proximal map of the convex conjugate.
    pub fn prox_dual(&self, sigma: f64, v: &ComplexImage) -> Result<ComplexImage> {
        check_step(sigma)?;
        match self {
            Functional::SquaredDistance { data } => {
                self.check_len(v)?;
                let mut out = v.clone();
                out.axpy(-sigma, data);
                out.scale(1.0 / (1.0 + sigma / 2.0));
                Ok(out)
            }
            Functional::GroupL1 { alpha, group_size } => {
                self.check_len(v)?;
                let mut out = v.clone();
                for group in out.data_mut().chunks_exact_mut(group_size / 2) {
                    let norm = group.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                    if norm > *alpha {
                        let s = alpha / norm;
                        group.iter_mut().for_each(|z| *z *= s);
                    }
                }
                Ok(out)
            }
            // conjugate is the indicator of {0}
            Functional::Zero => Ok(ComplexImage::zeros(v.shape())),
            Functional::SquaredNorm { alpha } => {
                if *alpha == 0.0 {
                    Ok(ComplexImage::zeros(v.shape()))
                } else {
                    Ok(v.scaled(1.0 / (1.0 + sigma / (2.0 * alpha))))
                }
            }
        }
    }

    /// Value at `v`; may be `+∞` only for conjugates, never for these families.
    pub fn value(&self, v: &ComplexImage) -> Result<f64> {
        match self {
            Functional::SquaredDistance { data } => {
                self.check_len(v)?;
                Ok(v.data()
                    .iter()
                    .zip(data.data())
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum())
            }
            Functional::SquaredNorm { alpha } => Ok(alpha * v.norm_sqr()),
            Functional::GroupL1 { alpha, group_size } => {
                self.check_len(v)?;
                let total: f64 = v
                    .data()
                    .chunks_exact(group_size / 2)
                    .map(|g| g.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
                    .sum();
                Ok(alpha * total)
            }
            Functional::Zero => Ok(0.0),
        }
    }

    /// Convex conjugate `sup_y ⟨y, z⟩ − self(y)`, with `+∞` outside its domain.
    pub fn conjugate_value(&self, z: &ComplexImage) -> Result<f64> {
        match self {
            Functional::SquaredDistance { data } => {
                self.check_len(z)?;
                Ok(z.norm_sqr() / 4.0 + data.dot(z))
            }
            Functional::GroupL1 { alpha, group_size } => {
                self.check_len(z)?;
                let limit = alpha * (1.0 + DOMAIN_TOLERANCE);
                let inside = z
                    .data()
                    .chunks_exact(group_size / 2)
                    .all(|g| g.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt() <= limit);
                Ok(if inside { 0.0 } else { f64::INFINITY })
            }
            Functional::SquaredNorm { alpha } if *alpha > 0.0 => {
                Ok(z.norm_sqr() / (4.0 * alpha))
            }
            Functional::SquaredNorm { .. } | Functional::Zero => {
                Ok(if z.max_abs() <= DOMAIN_TOLERANCE {
                    0.0
                } else {
                    f64::INFINITY
                })
            }
        }
    }

    fn check_len(&self, v: &ComplexImage) -> Result<()> {
        match self {
            Functional::SquaredDistance { data } if data.len() != v.len() => {
                Err(Error::InvalidFunctional(format!(
                    "squared_distance data has {} samples, argument has {}",
                    data.len(),
                    v.len()
                )))
            }
            Functional::GroupL1 { group_size, .. } if !(2 * v.len()).is_multiple_of(*group_size) => {
                Err(Error::InvalidFunctional(format!(
                    "group size {group_size} does not divide real length {}",
                    2 * v.len()
                )))
            }
            _ => Ok(()),
        }
    }
}

fn check_weight(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidFunctional(format!(
            "weight must be finite and nonnegative, got {alpha}"
        )));
    }
    Ok(())
}

fn check_step(step: f64) -> Result<()> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::NonPositiveStep(step));
    }
    Ok(())
}
