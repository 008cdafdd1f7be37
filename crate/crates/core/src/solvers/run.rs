use std::time::Instant;

use rayon::prelude::*;

use super::{compute_step_sizes, pdhg_step, spdhg_step, Algorithm, SaddleProblem, SolverState, StepSizes};
use crate::error::{Error, Result};
use crate::image::ComplexImage;
use crate::theory;

/// A run aborts once the objective exceeds this multiple of `Φ(x⁰)`.
pub const DIVERGENCE_FACTOR: f64 = 1e12;

/// Reference point for relative metrics. `saddle` enables the Bregman gap.
#[derive(Clone, Debug)]
pub struct RunTarget {
    pub reference: ComplexImage,
    pub reference_objective: f64,
    pub saddle: Option<(ComplexImage, Vec<ComplexImage>)>,
}

impl RunTarget {
    pub fn new(problem: &SaddleProblem, reference: ComplexImage) -> Result<Self> {
        let reference_objective = problem.objective(&reference)?;
        Ok(RunTarget {
            reference,
            reference_objective,
            saddle: None,
        })
    }

    /// Target at a saddle point `(x̂, ŷ)`; `x̂` doubles as the reference.
    pub fn from_saddle(
        problem: &SaddleProblem,
        x_hat: ComplexImage,
        y_hat: Vec<ComplexImage>,
    ) -> Result<Self> {
        let mut t = Self::new(problem, x_hat.clone())?;
        t.saddle = Some((x_hat, y_hat));
        Ok(t)
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    /// Passes over the data: one epoch is `n` SPDHG steps or one PDHG step.
    pub epochs: f64,
    pub log_every: f64,
    pub seed: u64,
    /// Defaults to the zero image.
    pub x0: Option<ComplexImage>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            epochs: 100.0,
            log_every: 1.0,
            seed: 0,
            x0: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRecord {
    pub epoch: f64,
    pub iteration: u64,
    pub objective: f64,
    pub relative_objective: Option<f64>,
    /// `‖x − x*‖/‖x*‖` (absolute when `x* = 0`).
    pub distance_to_target: Option<f64>,
    pub bregman_gap: Option<f64>,
    pub wall_time_s: f64,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub gamma: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<ConvergenceRecord>,
    pub state: SolverState,
}

impl RunOutput {
    pub fn final_record(&self) -> &ConvergenceRecord {
        self.records.last().expect("a run always logs epoch 0")
    }
}

pub fn iterations_per_epoch(problem: &SaddleProblem, algorithm: Algorithm) -> u64 {
    match algorithm {
        Algorithm::Spdhg => problem.n_blocks() as u64,
        Algorithm::Pdhg => 1,
    }
}

/// Runs the solver selected by `steps.algorithm`, logging a record at epoch 0,
/// every `log_every` epochs and at the end.
pub fn run(
    problem: &SaddleProblem,
    steps: &StepSizes,
    config: &RunConfig,
    target: Option<&RunTarget>,
) -> Result<RunOutput> {
    if !(config.epochs >= 0.0 && config.epochs.is_finite()) {
        return Err(Error::InvalidProblem(format!("epochs must be nonnegative, got {}", config.epochs)));
    }
    if !(config.log_every > 0.0) {
        return Err(Error::InvalidProblem(format!(
            "log_every must be positive, got {}",
            config.log_every
        )));
    }
    let algorithm = steps.algorithm;
    let per_epoch = iterations_per_epoch(problem, algorithm);
    let total = (config.epochs * per_epoch as f64).round() as u64;
    let log_interval = ((config.log_every * per_epoch as f64).round() as u64).max(1);

    let mut state = match &config.x0 {
        Some(x0) => SolverState::with_primal(problem, x0.clone(), config.seed)?,
        None => SolverState::new(problem, config.seed),
    };
    let start = Instant::now();
    let initial_objective = problem.objective(&state.x)?;
    let threshold = if initial_objective > 0.0 {
        DIVERGENCE_FACTOR * initial_objective
    } else {
        DIVERGENCE_FACTOR
    };

    let record = |state: &SolverState, objective: f64| -> Result<ConvergenceRecord> {
        let mut rec = ConvergenceRecord {
            epoch: state.iteration as f64 / per_epoch as f64,
            iteration: state.iteration,
            objective,
            relative_objective: None,
            distance_to_target: None,
            bregman_gap: None,
            wall_time_s: 0.0,
            seed: config.seed,
            algorithm,
            gamma: steps.gamma,
        };
        if let Some(t) = target {
            let denom = initial_objective - t.reference_objective;
            if denom != 0.0 {
                rec.relative_objective = Some((objective - t.reference_objective) / denom);
            }
            let diff = state.x.sub(&t.reference).norm();
            let scale = t.reference.norm();
            rec.distance_to_target = Some(if scale > 0.0 { diff / scale } else { diff });
            if let Some((x_hat, y_hat)) = &t.saddle {
                rec.bregman_gap = Some(theory::bregman_gap(problem, &state.x, &state.y, x_hat, y_hat)?);
            }
        }
        rec.wall_time_s = start.elapsed().as_secs_f64();
        Ok(rec)
    };

    let diverged = |objective: f64, iteration: u64| Error::Divergence {
        gamma: steps.gamma,
        objective,
        epoch: iteration as f64 / per_epoch as f64,
    };

    let mut records = vec![record(&state, initial_objective)?];
    for it in 1..=total {
        match algorithm {
            Algorithm::Spdhg => {
                spdhg_step(problem, &mut state, steps)?;
            }
            Algorithm::Pdhg => pdhg_step(problem, &mut state, steps)?,
        }
        if it % per_epoch == 0 && !state.x.is_finite() {
            return Err(diverged(f64::NAN, it));
        }
        if it % log_interval == 0 || it == total {
            let objective = problem.objective(&state.x)?;
            if !(objective <= threshold) {
                return Err(diverged(objective, it));
            }
            records.push(record(&state, objective)?);
        }
    }
    Ok(RunOutput { records, state })
}

#[derive(Clone, Debug)]
pub struct GammaRun {
    pub gamma: f64,
    pub records: Vec<ConvergenceRecord>,
    /// `None` when the run diverged or failed.
    pub final_objective: Option<f64>,
    pub failure: Option<String>,
}

impl GammaRun {
    pub fn diverged(&self) -> bool {
        self.final_objective.is_none()
    }
}

#[derive(Clone, Debug)]
pub struct GammaSearch {
    pub best_gamma: f64,
    pub runs: Vec<GammaRun>,
}

impl GammaSearch {
    pub fn best_run(&self) -> &GammaRun {
        self.runs
            .iter()
            .find(|r| r.gamma == self.best_gamma)
            .expect("best gamma comes from the runs")
    }
}

/// Runs every `γ` in `grid` from the same seed and picks the one with the
/// lowest final objective. Diverged runs rank last; ties go to the smaller `γ`.
pub fn gamma_search(
    problem: &SaddleProblem,
    algorithm: Algorithm,
    grid: &[f64],
    epochs: f64,
    seed: u64,
) -> Result<GammaSearch> {
    if grid.is_empty() {
        return Err(Error::InvalidProblem("gamma grid is empty".into()));
    }
    let config = RunConfig {
        epochs,
        log_every: 1.0,
        seed,
        x0: None,
    };
    let outcomes: Vec<Result<GammaRun>> = grid
        .par_iter()
        .map(|&gamma| {
            let steps = compute_step_sizes(problem, gamma, algorithm)?;
            Ok(match run(problem, &steps, &config, None) {
                Ok(out) => {
                    let last = out.final_record().objective;
                    GammaRun {
                        gamma,
                        final_objective: last.is_finite().then_some(last),
                        failure: (!last.is_finite()).then(|| "non-finite objective".to_string()),
                        records: out.records,
                    }
                }
                Err(e @ Error::Divergence { .. }) => GammaRun {
                    gamma,
                    records: Vec::new(),
                    final_objective: None,
                    failure: Some(e.to_string()),
                },
                Err(e) => return Err(e),
            })
        })
        .collect();
    let runs = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let best = runs
        .iter()
        .filter_map(|r| r.final_objective.map(|o| (o, r.gamma)))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    match best {
        Some((_, best_gamma)) => Ok(GammaSearch { best_gamma, runs }),
        None => {
            let status = runs
                .iter()
                .map(|r| format!("{:e}: {}", r.gamma, r.failure.as_deref().unwrap_or("ok")))
                .collect::<Vec<_>>()
                .join("; ");
            Err(Error::AllDiverged(status))
        }
    }
}
