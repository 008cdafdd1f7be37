//! Numerical counterparts of the SPDHG convergence analysis: the quadratic
//! forms `V` and `V^k`, an exact one-step expected-descent check, the fixed-point
//! maps `T_j`, and the Bregman gap.
//!
//! Weighted norms: `‖x‖²_{τ⁻¹} = ⟨x,x⟩/τ` on the primal side and
//! `‖y‖²_{QS⁻¹} = Σ_i ⟨y_i,y_i⟩/(p_i σ_i)` on the dual side, with
//! `Q = diag(1/p_i)` and `S = diag(σ_i)`.

use crate::error::{Error, Result};
use crate::image::{blocks_sub, ComplexImage};
use crate::solvers::{spdhg_step_with_block, SaddleProblem, SolverState, StepSizes};

/// Fixed-point residual above which a supposed saddle point is rejected.
pub const SADDLE_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct TheoryWeights {
    pub tau: f64,
    pub sigma: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl TheoryWeights {
    pub fn new(problem: &SaddleProblem, steps: &StepSizes) -> Self {
        TheoryWeights {
            tau: steps.tau,
            sigma: steps.sigma.clone(),
            probabilities: problem.probabilities().to_vec(),
        }
    }

    pub fn primal_norm_sqr(&self, x: &ComplexImage) -> f64 {
        x.norm_sqr() / self.tau
    }

    pub fn dual_norm_sqr(&self, y: &[ComplexImage]) -> f64 {
        y.iter()
            .zip(&self.sigma)
            .zip(&self.probabilities)
            .map(|((yi, s), p)| yi.norm_sqr() / (p * s))
            .sum()
    }

    /// `⟨QAx, y⟩ = Σ_i ⟨A_i x, y_i⟩/p_i`.
    pub fn coupling(&self, problem: &SaddleProblem, x: &ComplexImage, y: &[ComplexImage]) -> Result<f64> {
        let mut total = 0.0;
        for ((b, yi), p) in problem.blocks().iter().zip(y).zip(&self.probabilities) {
            total += b.op.apply(x)?.dot(yi) / p;
        }
        Ok(total)
    }
}

/// `V(x, y) = ‖x‖²_{τ⁻¹} + 2⟨QAx, y⟩ + ‖y‖²_{QS⁻¹}`.
pub fn v_value(
    problem: &SaddleProblem,
    weights: &TheoryWeights,
    x: &ComplexImage,
    y: &[ComplexImage],
) -> Result<f64> {
    Ok(weights.primal_norm_sqr(x)
        + 2.0 * weights.coupling(problem, x, y)?
        + weights.dual_norm_sqr(y))
}

/// `V^k(x, y) = ‖x‖²_{τ⁻¹} − 2⟨QAx, y^k − y^{k−1}⟩ + ‖y^k − y^{k−1}‖²_{QS⁻¹} + ‖y‖²_{QS⁻¹}`
/// with the dual history taken from `state`.
pub fn vk_value(
    problem: &SaddleProblem,
    weights: &TheoryWeights,
    state: &SolverState,
    x: &ComplexImage,
    y: &[ComplexImage],
) -> Result<f64> {
    let dy = blocks_sub(state.y(), state.y_prev());
    Ok(weights.primal_norm_sqr(x) - 2.0 * weights.coupling(problem, x, &dy)?
        + weights.dual_norm_sqr(&dy)
        + weights.dual_norm_sqr(y))
}

/// `Δ^k = V^k(w^k − ŵ)`.
pub fn lyapunov(
    problem: &SaddleProblem,
    weights: &TheoryWeights,
    state: &SolverState,
    x_hat: &ComplexImage,
    y_hat: &[ComplexImage],
) -> Result<f64> {
    let dx = state.x().sub(x_hat);
    let dy = blocks_sub(state.y(), y_hat);
    vk_value(problem, weights, state, &dx, &dy)
}

/// Both sides of the one-step descent inequality
/// `Δ^k ≥ E^{k+1}[Δ^{k+1}] + V(x^{k+1} − x^k, y^k − y^{k−1})`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DescentCheck {
    /// `Δ^k`
    pub lhs: f64,
    /// `E^{k+1}[Δ^{k+1}] + V(x^{k+1} − x^k, y^k − y^{k−1})`
    pub rhs: f64,
    pub expected_next: f64,
    pub v_term: f64,
}

impl DescentCheck {
    pub fn holds(&self, rel_tol: f64) -> bool {
        self.lhs >= self.rhs - rel_tol * self.lhs.abs().max(1.0)
    }
}

/// Evaluates the descent inequality at `state`, taking the conditional
/// expectation exactly by stepping every block and weighting by `p_j`.
pub fn expected_next_delta(
    problem: &SaddleProblem,
    state: &SolverState,
    steps: &StepSizes,
    x_hat: &ComplexImage,
    y_hat: &[ComplexImage],
) -> Result<DescentCheck> {
    let residual = fixed_point_residual(problem, steps, x_hat, y_hat)?;
    if !(residual <= SADDLE_TOLERANCE) {
        return Err(Error::NotASaddle { residual });
    }
    let weights = TheoryWeights::new(problem, steps);
    let lhs = lyapunov(problem, &weights, state, x_hat, y_hat)?;

    let mut expected_next = 0.0;
    let mut x_next = None;
    for (j, p) in problem.probabilities().iter().enumerate() {
        let mut branch = state.clone();
        spdhg_step_with_block(problem, &mut branch, steps, j)?;
        expected_next += p * lyapunov(problem, &weights, &branch, x_hat, y_hat)?;
        x_next.get_or_insert_with(|| branch.x().clone());
    }
    let x_next = x_next.expect("a problem has at least one block");
    let v_term = v_value(
        problem,
        &weights,
        &x_next.sub(state.x()),
        &blocks_sub(state.y(), state.y_prev()),
    )?;
    Ok(DescentCheck {
        lhs,
        rhs: expected_next + v_term,
        expected_next,
        v_term,
    })
}

/// The map `T_j`: dual coordinate `j` first,
/// `(T_j w)_j = prox_{σ_j f_j*}(y_j + σ_j A_j x)`, other dual blocks copied, then
/// `(T_j w)_0 = prox_{τg}(x − τAᵀy − (1 + 1/p_j) τ A_jᵀ((T_j w)_j − y_j))`.
pub fn apply_t(
    problem: &SaddleProblem,
    steps: &StepSizes,
    j: usize,
    x: &ComplexImage,
    y: &[ComplexImage],
) -> Result<(ComplexImage, Vec<ComplexImage>)> {
    let block = problem.blocks().get(j).ok_or_else(|| {
        Error::InvalidProblem(format!("block {j} out of range for {}", problem.n_blocks()))
    })?;
    let sigma = steps.sigma[j];
    let mut w = block.op.apply(x)?;
    w.scale(sigma);
    w.axpy(1.0, &y[j]);
    let yj = block.f.prox_dual(sigma, &w)?;

    let tau = steps.tau;
    let mut v = x.clone();
    v.axpy(-tau, &problem.adjoint_sum(y)?);
    let correction = block.op.adjoint(&yj.sub(&y[j]))?;
    v.axpy(-(1.0 + 1.0 / problem.probabilities()[j]) * tau, &correction);
    let x_out = problem.regularizer().prox_primal(tau, &v)?;

    let mut y_out = y.to_vec();
    y_out[j] = yj;
    Ok((x_out, y_out))
}

/// `max_j ‖T_j(x, y) − (x, y)‖` in the product-space norm.
pub fn fixed_point_residual(
    problem: &SaddleProblem,
    steps: &StepSizes,
    x: &ComplexImage,
    y: &[ComplexImage],
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for j in 0..problem.n_blocks() {
        let (tx, ty) = apply_t(problem, steps, j, x, y)?;
        let r = (tx.sub(x).norm_sqr() + ty[j].sub(&y[j]).norm_sqr()).sqrt();
        worst = worst.max(r);
    }
    Ok(worst)
}

/// `D_g^{−Aᵀŷ}(x, x̂) + Σ_i D_{f_i*}^{A_i x̂}(y_i, ŷ_i)` with
/// `D_h^q(u, v) = h(u) − h(v) − ⟨q, u − v⟩`. Returns `+∞` when `y` leaves the
/// domain of a conjugate.
pub fn bregman_gap(
    problem: &SaddleProblem,
    x: &ComplexImage,
    y: &[ComplexImage],
    x_hat: &ComplexImage,
    y_hat: &[ComplexImage],
) -> Result<f64> {
    let g = problem.regularizer();
    let at_hat = problem.adjoint_sum(y_hat)?;
    // q = −Aᵀŷ, so −⟨q, x − x̂⟩ = ⟨Aᵀŷ, x − x̂⟩
    let mut gap = g.value(x)? - g.value(x_hat)? + at_hat.dot(&x.sub(x_hat));
    for ((b, yi), yh) in problem.blocks().iter().zip(y).zip(y_hat) {
        let here = b.f.conjugate_value(yi)?;
        let there = b.f.conjugate_value(yh)?;
        if here.is_infinite() || there.is_infinite() {
            return Ok(f64::INFINITY);
        }
        gap += here - there - b.op.apply(x_hat)?.dot(&yi.sub(yh));
    }
    Ok(gap)
}
