//! Experiment driver behind the `run`, `validate` and `oracle` commands.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, TargetMode};
use super::image_io::write_image;
use crate::error::{Error, Result};
use crate::mri::{assemble_problem, MriInstance};
use crate::oracle::solve_quadratic;
use crate::solvers::{
    compute_step_sizes, gamma_search, run, validate_step_sizes, Algorithm, ConvergenceRecord,
    GammaSearch, RunConfig, RunTarget, SaddleProblem, StepSizes, StepViolation,
};
use crate::theory;

/// Exact header of `convergence.csv`.
pub const CSV_HEADER: &str =
    "run_id,algorithm,gamma,epoch,objective,relative_objective,distance_to_target,bregman_gap,wall_time_s,seed";

/// Process exit status for an error: 2 for divergence, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Divergence { .. } | Error::AllDiverged(_) => 2,
        _ => 1,
    }
}

/// SHA-256 of the mask indices, each as a little-endian `u64`.
pub fn mask_hash(mask: &[usize]) -> String {
    let mut h = Sha256::new();
    for &i in mask {
        h.update((i as u64).to_le_bytes());
    }
    hex::encode(h.finalize())
}

#[derive(Clone, Debug)]
pub struct AlgorithmResult {
    pub algorithm: Algorithm,
    pub search: Option<GammaSearch>,
    pub steps: StepSizes,
    pub records: Vec<ConvergenceRecord>,
}

#[derive(Clone, Debug)]
pub struct ExperimentSummary {
    pub results: Vec<AlgorithmResult>,
    pub target_objective: f64,
    pub output_dir: PathBuf,
}

impl ExperimentSummary {
    pub fn result(&self, algorithm: Algorithm) -> Option<&AlgorithmResult> {
        self.results.iter().find(|r| r.algorithm == algorithm)
    }
}

/// Picks `γ` by grid search, or takes the single grid value directly.
fn choose_gamma(
    problem: &SaddleProblem,
    algorithm: Algorithm,
    cfg: &ExperimentConfig,
) -> Result<(f64, Option<GammaSearch>)> {
    if let [gamma] = cfg.gamma_grid[..] {
        return Ok((gamma, None));
    }
    let search = gamma_search(problem, algorithm, &cfg.gamma_grid, cfg.epochs, cfg.mri.seed)?;
    log::info!("{algorithm}: gamma search picked {:e}", search.best_gamma);
    Ok((search.best_gamma, Some(search)))
}

struct Target {
    run_target: RunTarget,
    description: String,
}

fn build_target(
    instance: &MriInstance,
    cfg: &ExperimentConfig,
    searches: &mut Vec<(Algorithm, f64, Option<GammaSearch>)>,
) -> Result<Target> {
    let problem = &instance.problem;
    match cfg.target_mode {
        TargetMode::Oracle => {
            let sol = solve_quadratic(problem)?;
            let description = format!(
                "oracle (fixed-point residual {:e})",
                sol.fixed_point_residual
            );
            Ok(Target {
                run_target: RunTarget::from_saddle(problem, sol.x_hat, sol.y_hat)?,
                description,
            })
        }
        TargetMode::LongRun { epochs } => {
            let gamma = match searches.iter().find(|s| s.0 == Algorithm::Spdhg) {
                Some(s) => s.1,
                None => {
                    let (g, s) = choose_gamma(problem, Algorithm::Spdhg, cfg)?;
                    searches.push((Algorithm::Spdhg, g, s));
                    g
                }
            };
            let steps = compute_step_sizes(problem, gamma, Algorithm::Spdhg)?;
            let seed = cfg.mri.seed.wrapping_add(1);
            let config = RunConfig {
                epochs,
                log_every: epochs,
                seed,
                x0: None,
            };
            log::info!("computing long-run target: spdhg, {epochs} epochs, gamma {gamma:e}");
            let out = run(problem, &steps, &config, None)?;
            Ok(Target {
                run_target: RunTarget::new(problem, out.state.x().clone())?,
                description: format!("long_run spdhg epochs={epochs} gamma={gamma} seed={seed}"),
            })
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_rows(out: &mut String, r: &AlgorithmResult, record_wall_time: bool) {
    for rec in &r.records {
        let wall = if record_wall_time {
            format!("{:.6}", rec.wall_time_s)
        } else {
            String::new()
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.algorithm,
            rec.algorithm,
            rec.gamma,
            rec.epoch,
            rec.objective,
            opt(rec.relative_objective),
            opt(rec.distance_to_target),
            opt(rec.bregman_gap),
            wall,
            rec.seed
        );
    }
}

fn write_text(path: PathBuf, text: &str) -> Result<()> {
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Generates the instance, obtains the target, tunes `γ` and runs every
/// requested solver, writing CSVs, images and a manifest to `output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

    let instance = assemble_problem(&cfg.mri)?;
    let problem = &instance.problem;

    let mut searches = Vec::new();
    for &alg in &cfg.algorithms {
        let (g, s) = choose_gamma(problem, alg, cfg)?;
        searches.push((alg, g, s));
    }
    let target = build_target(&instance, cfg, &mut searches)?;

    let mut results = Vec::new();
    for &alg in &cfg.algorithms {
        let (_, gamma, search) = searches
            .iter()
            .find(|s| s.0 == alg)
            .cloned()
            .expect("searched above");
        let steps = compute_step_sizes(problem, gamma, alg)?;
        let config = RunConfig {
            epochs: cfg.epochs,
            log_every: cfg.log_every,
            seed: cfg.mri.seed,
            x0: None,
        };
        let out = run(problem, &steps, &config, Some(&target.run_target))?;
        write_image(out.state.x(), &dir.join(format!("recon_{alg}")))?;
        results.push(AlgorithmResult {
            algorithm: alg,
            search,
            steps,
            records: out.records,
        });
    }

    let mut csv = format!("{CSV_HEADER}\n");
    for r in &results {
        csv_rows(&mut csv, r, cfg.record_wall_time);
    }
    write_text(dir.join("convergence.csv"), &csv)?;

    let mut gs = String::from("algorithm,gamma,final_objective,status\n");
    for (alg, _, search) in &searches {
        if let Some(s) = search {
            for run in &s.runs {
                let status = run.failure.clone().unwrap_or_else(|| "ok".into());
                let _ = writeln!(gs, "{alg},{},{},\"{}\"", run.gamma, opt(run.final_objective), status.replace('"', "'"));
            }
        }
    }
    write_text(dir.join("gamma_search.csv"), &gs)?;

    write_image(&instance.ground_truth, &dir.join("ground_truth"))?;
    write_image(&target.run_target.reference, &dir.join("target"))?;

    let mut manifest = String::from("# synthetic phantom instance; all values below are resolved settings\n");
    manifest.push_str(&cfg.to_text());
    let _ = writeln!(manifest, "rng = chacha8");
    let _ = writeln!(manifest, "d = {}", problem.domain().len());
    let _ = writeln!(manifest, "mask_count = {}", instance.mask.len());
    let _ = writeln!(manifest, "mask_sha256 = {}", mask_hash(&instance.mask));
    let _ = writeln!(manifest, "n_blocks = {}", problem.n_blocks());
    let _ = writeln!(manifest, "probabilities = {}", join(problem.probabilities()));
    let _ = writeln!(manifest, "block_norms = {}", join(problem.block_norms()));
    let _ = writeln!(manifest, "stacked_norm = {}", problem.stacked_norm());
    let _ = writeln!(manifest, "target = {}", target.description);
    let _ = writeln!(manifest, "target_objective = {}", target.run_target.reference_objective);
    for (alg, gamma, _) in &searches {
        let _ = writeln!(manifest, "gamma_{alg} = {gamma}");
    }
    for r in &results {
        let a = r.algorithm;
        let _ = writeln!(manifest, "tau_{a} = {}", r.steps.tau);
        let _ = writeln!(manifest, "sigma_{a} = {}", join(&r.steps.sigma));
        let _ = writeln!(manifest, "contraction_{a} = {}", r.steps.contraction(problem));
        if let Some(last) = r.records.last() {
            let _ = writeln!(manifest, "final_objective_{a} = {}", last.objective);
            let _ = writeln!(manifest, "final_relative_objective_{a} = {}", opt(last.relative_objective));
        }
    }
    write_text(dir.join("manifest.txt"), &manifest)?;

    Ok(ExperimentSummary {
        results,
        target_objective: target.run_target.reference_objective,
        output_dir: dir,
    })
}

#[derive(Clone, Debug)]
pub struct AlgorithmCheck {
    pub algorithm: Algorithm,
    pub gamma: f64,
    pub contraction: f64,
    pub violations: Vec<StepViolation>,
}

#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub block_norms: Vec<f64>,
    pub stacked_norm: f64,
    pub probabilities: Vec<f64>,
    pub mask_count: usize,
    pub checks: Vec<AlgorithmCheck>,
}

impl ValidationReport {
    /// True when every checked step-size pair meets the convergence bound.
    pub fn satisfied(&self) -> bool {
        self.checks.iter().all(|c| c.violations.is_empty())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "mask_count = {}", self.mask_count);
        let _ = writeln!(out, "probabilities = {}", join(&self.probabilities));
        let _ = writeln!(out, "block_norms = {}", join(&self.block_norms));
        let _ = writeln!(out, "stacked_norm = {}", self.stacked_norm);
        for c in &self.checks {
            let status = if c.violations.is_empty() { "ok" } else { "VIOLATED" };
            let _ = writeln!(
                out,
                "{} gamma={} contraction={} {status}",
                c.algorithm, c.gamma, c.contraction
            );
            for v in &c.violations {
                let _ = writeln!(out, "  block {:?}: {} >= {}", v.block, v.lhs, v.bound);
            }
        }
        let _ = writeln!(
            out,
            "step-size condition: {}",
            if self.satisfied() { "satisfied" } else { "violated" }
        );
        out
    }
}

/// Builds the instance and checks the step-size condition for every
/// algorithm and grid value without running any solver.
pub fn validate(cfg: &ExperimentConfig) -> Result<ValidationReport> {
    cfg.validate()?;
    let instance = assemble_problem(&cfg.mri)?;
    let problem = &instance.problem;
    let mut checks = Vec::new();
    for &algorithm in &cfg.algorithms {
        for &gamma in &cfg.gamma_grid {
            let steps = compute_step_sizes(problem, gamma, algorithm)?;
            checks.push(AlgorithmCheck {
                algorithm,
                gamma,
                contraction: steps.contraction(problem),
                violations: validate_step_sizes(problem, &steps),
            });
        }
    }
    Ok(ValidationReport {
        block_norms: problem.block_norms().to_vec(),
        stacked_norm: problem.stacked_norm(),
        probabilities: problem.probabilities().to_vec(),
        mask_count: instance.mask.len(),
        checks,
    })
}

#[derive(Clone, Debug)]
pub struct OracleReport {
    /// `‖T_j(x̂, ŷ) − (x̂, ŷ)‖` for each block `j`, at `γ = 1`.
    pub residuals: Vec<f64>,
    pub objective: f64,
    /// `‖x̂ − x†‖ / ‖x†‖`
    pub distance_to_truth: f64,
}

impl OracleReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (j, r) in self.residuals.iter().enumerate() {
            let _ = writeln!(out, "block {j}: fixed-point residual {r:e}");
        }
        let _ = writeln!(out, "objective = {}", self.objective);
        let _ = writeln!(out, "relative distance to ground truth = {}", self.distance_to_truth);
        out
    }
}

/// Solves the quadratic model densely and reports per-block residuals.
pub fn oracle_report(cfg: &ExperimentConfig) -> Result<OracleReport> {
    let instance = assemble_problem(&cfg.mri)?;
    let problem = &instance.problem;
    let sol = solve_quadratic(problem)?;
    let steps = compute_step_sizes(problem, 1.0, Algorithm::Spdhg)?;
    let mut residuals = Vec::with_capacity(problem.n_blocks());
    for j in 0..problem.n_blocks() {
        let (tx, ty) = theory::apply_t(problem, &steps, j, &sol.x_hat, &sol.y_hat)?;
        let r = tx.sub(&sol.x_hat).norm_sqr() + ty[j].sub(&sol.y_hat[j]).norm_sqr();
        residuals.push(r.sqrt());
    }
    let truth = &instance.ground_truth;
    Ok(OracleReport {
        residuals,
        objective: problem.objective(&sol.x_hat)?,
        distance_to_truth: sol.x_hat.sub(truth).norm() / truth.norm(),
    })
}
