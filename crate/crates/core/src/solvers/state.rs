use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{SaddleProblem, StepSizes};
use crate::error::{Error, Result};
use crate::image::ComplexImage;

/// Blocks where `y_prev` and `y` may differ, i.e. those moved by the last step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Changed {
    None,
    One(usize),
    All,
}

/// Iterate of either solver.
///
/// After every step `y_prev` holds the previous dual iterate `y^{k−1}` (with
/// `y^{−1} = y^0`), `z = Aᵀy`, and `z_bar` is the extrapolated point used by
/// the next primal update. Sampling uses ChaCha8 seeded from a `u64`.
#[derive(Clone, Debug)]
pub struct SolverState {
    pub(crate) x: ComplexImage,
    pub(crate) y: Vec<ComplexImage>,
    pub(crate) y_prev: Vec<ComplexImage>,
    pub(crate) z: ComplexImage,
    pub(crate) z_bar: ComplexImage,
    pub(crate) iteration: u64,
    changed: Changed,
    rng: ChaCha8Rng,
}

impl SolverState {
    /// `x⁰ = 0`, `y⁰ = 0`, `z⁰ = z̄⁰ = 0`.
    pub fn new(problem: &SaddleProblem, seed: u64) -> Self {
        Self::with_primal(problem, problem.zero_primal(), seed)
            .expect("zero image matches the problem domain")
    }

    pub fn with_primal(problem: &SaddleProblem, x0: ComplexImage, seed: u64) -> Result<Self> {
        x0.ensure_shape(problem.domain(), "initial primal iterate")?;
        let y = problem.zero_dual();
        Ok(SolverState {
            x: x0,
            y_prev: y.clone(),
            y,
            z: problem.zero_primal(),
            z_bar: problem.zero_primal(),
            iteration: 0,
            changed: Changed::None,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// A state with flat dual history at `(x, y)`: `y_prev = y`, `z = z̄ = Aᵀy`.
    pub fn at_point(
        problem: &SaddleProblem,
        x: ComplexImage,
        y: Vec<ComplexImage>,
        seed: u64,
    ) -> Result<Self> {
        x.ensure_shape(problem.domain(), "primal point")?;
        for (b, yi) in problem.blocks().iter().zip(&y) {
            yi.ensure_shape(b.op.codomain(), "dual point")?;
        }
        let z = problem.adjoint_sum(&y)?;
        Ok(SolverState {
            x,
            y_prev: y.clone(),
            y,
            z_bar: z.clone(),
            z,
            iteration: 0,
            changed: Changed::None,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn x(&self) -> &ComplexImage {
        &self.x
    }

    pub fn y(&self) -> &[ComplexImage] {
        &self.y
    }

    pub fn y_prev(&self) -> &[ComplexImage] {
        &self.y_prev
    }

    pub fn z(&self) -> &ComplexImage {
        &self.z
    }

    pub fn z_bar(&self) -> &ComplexImage {
        &self.z_bar
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// Block drawn in the most recent SPDHG step.
    pub fn last_block(&self) -> Option<usize> {
        match self.changed {
            Changed::One(j) => Some(j),
            _ => None,
        }
    }

    /// Brings `y_prev` up to the current `y`, touching only blocks that moved.
    fn sync_history(&mut self) {
        match self.changed {
            Changed::None => {}
            Changed::One(j) => self.y_prev[j].clone_from(&self.y[j]),
            Changed::All => self.y_prev.clone_from(&self.y),
        }
        self.changed = Changed::None;
    }
}

fn check_steps(problem: &SaddleProblem, steps: &StepSizes) -> Result<()> {
    if steps.sigma.len() != problem.n_blocks() {
        return Err(Error::InvalidProblem(format!(
            "{} dual steps for {} blocks",
            steps.sigma.len(),
            problem.n_blocks()
        )));
    }
    Ok(())
}

/// One SPDHG iteration with a block drawn from the problem's probabilities.
/// Returns the drawn block.
pub fn spdhg_step(
    problem: &SaddleProblem,
    state: &mut SolverState,
    steps: &StepSizes,
) -> Result<usize> {
    let j = problem.sampler.sample(&mut state.rng);
    spdhg_step_with_block(problem, state, steps, j)?;
    Ok(j)
}

/// One SPDHG iteration updating dual block `j`.
pub fn spdhg_step_with_block(
    problem: &SaddleProblem,
    state: &mut SolverState,
    steps: &StepSizes,
    j: usize,
) -> Result<()> {
    check_steps(problem, steps)?;
    let block = problem.blocks().get(j).ok_or_else(|| {
        Error::InvalidProblem(format!("block {j} out of range for {}", problem.n_blocks()))
    })?;
    state.sync_history();

    let mut v = state.x.clone();
    v.axpy(-steps.tau, &state.z_bar);
    let x_next = problem.regularizer().prox_primal(steps.tau, &v)?;

    let sigma = steps.sigma[j];
    let mut w = block.op.apply(&x_next)?;
    w.scale(sigma);
    w.axpy(1.0, &state.y[j]);
    let yj_next = block.f.prox_dual(sigma, &w)?;

    let delta = block.op.adjoint(&yj_next.sub(&state.y[j]))?;
    state.z.axpy(1.0, &delta);
    state.z_bar.clone_from(&state.z);
    state.z_bar.axpy(1.0 / problem.probabilities()[j], &delta);

    state.y_prev[j] = std::mem::replace(&mut state.y[j], yj_next);
    state.x = x_next;
    state.iteration += 1;
    state.changed = Changed::One(j);
    Ok(())
}

/// One PDHG iteration with dual extrapolation `ȳ = 2y^k − y^{k−1}`.
pub fn pdhg_step(problem: &SaddleProblem, state: &mut SolverState, steps: &StepSizes) -> Result<()> {
    check_steps(problem, steps)?;
    // at entry y_prev = y^{k-1} for every block
    let y_bar: Vec<ComplexImage> = state
        .y
        .iter()
        .zip(&state.y_prev)
        .map(|(y, yp)| {
            let mut out = y.scaled(2.0);
            out.axpy(-1.0, yp);
            out
        })
        .collect();
    let mut v = state.x.clone();
    v.axpy(-steps.tau, &problem.adjoint_sum(&y_bar)?);
    let x_next = problem.regularizer().prox_primal(steps.tau, &v)?;

    let mut y_next = Vec::with_capacity(problem.n_blocks());
    for ((block, y), &sigma) in problem.blocks().iter().zip(&state.y).zip(&steps.sigma) {
        let mut w = block.op.apply(&x_next)?;
        w.scale(sigma);
        w.axpy(1.0, y);
        y_next.push(block.f.prox_dual(sigma, &w)?);
    }

    let z_next = problem.adjoint_sum(&y_next)?;
    let mut z_bar = z_next.scaled(2.0);
    z_bar.axpy(-1.0, &state.z);
    state.z_bar = z_bar;
    state.z = z_next;
    state.y_prev = std::mem::replace(&mut state.y, y_next);
    state.x = x_next;
    state.iteration += 1;
    state.changed = Changed::All;
    Ok(())
}
