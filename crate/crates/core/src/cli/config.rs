//! Flat `key = value` experiment configuration with `--key value` overrides.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::mri::{MriConfig, Regularizer};
use crate::solvers::{default_gamma_grid, Algorithm};

/// How the reference point `x*` for relative metrics is obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TargetMode {
    /// Dense solve of the normal equations; small l2 instances only.
    Oracle,
    /// SPDHG run for the given number of epochs.
    LongRun { epochs: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub mri: MriConfig,
    pub algorithms: Vec<Algorithm>,
    pub epochs: f64,
    pub gamma_grid: Vec<f64>,
    pub log_every: f64,
    pub target_mode: TargetMode,
    pub output_dir: PathBuf,
    /// When false the `wall_time_s` column is left empty, making the CSV
    /// byte-for-byte reproducible.
    pub record_wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mri: MriConfig::default(),
            algorithms: vec![Algorithm::Pdhg, Algorithm::Spdhg],
            epochs: 100.0,
            gamma_grid: default_gamma_grid(),
            log_every: 1.0,
            target_mode: TargetMode::LongRun { epochs: 1000.0 },
            output_dir: PathBuf::from("output"),
            record_wall_time: true,
        }
    }
}

/// Keys accepted in config files and as `--key` overrides.
pub const KEYS: &[&str] = &[
    "rows",
    "cols",
    "n_coils",
    "sampling_factor",
    "mask_kind",
    "noise_sigma",
    "regularizer",
    "alpha",
    "seed",
    "algorithms",
    "epochs",
    "gamma_grid",
    "log_every",
    "target_mode",
    "target_epochs",
    "output_dir",
    "record_wall_time",
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse '{value}': {e}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(Error::Config(format!("{key}: expected a boolean, got '{other}'"))),
    }
}

impl ExperimentConfig {
    /// Applies one setting. `target_epochs` is remembered separately so that
    /// `target_mode` and `target_epochs` may appear in either order.
    fn set(&mut self, key: &str, value: &str, target_epochs: &mut Option<f64>) -> Result<()> {
        let m = &mut self.mri;
        match key {
            "rows" => m.rows = parse_num(key, value)?,
            "cols" => m.cols = parse_num(key, value)?,
            "n_coils" => m.n_coils = parse_num(key, value)?,
            "sampling_factor" => m.sampling_factor = parse_num(key, value)?,
            "mask_kind" => m.mask_kind = value.parse()?,
            "noise_sigma" => m.noise_sigma = parse_num(key, value)?,
            "regularizer" => m.regularizer = value.parse()?,
            "alpha" => m.alpha = parse_num(key, value)?,
            "seed" => m.seed = parse_num(key, value)?,
            "algorithms" => self.algorithms = parse_list(key, value)?,
            "epochs" => self.epochs = parse_num(key, value)?,
            "gamma_grid" => self.gamma_grid = parse_list(key, value)?,
            "log_every" => self.log_every = parse_num(key, value)?,
            "target_mode" => {
                self.target_mode = match value.trim() {
                    "oracle" => TargetMode::Oracle,
                    "long_run" => TargetMode::LongRun { epochs: 0.0 },
                    other => {
                        return Err(Error::Config(format!(
                            "target_mode: expected oracle or long_run, got '{other}'"
                        )))
                    }
                }
            }
            "target_epochs" => *target_epochs = Some(parse_num(key, value)?),
            "output_dir" => self.output_dir = PathBuf::from(value.trim()),
            "record_wall_time" => self.record_wall_time = parse_bool(key, value)?,
            other => {
                return Err(Error::Config(format!(
                    "unknown key '{other}' (known keys: {})",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Builds a config from `(key, value)` pairs applied over the defaults.
    /// Without an explicit `target_epochs`, long runs last ten times `epochs`.
    pub fn from_pairs<'a, I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut cfg = ExperimentConfig::default();
        let mut target_epochs = None;
        for (k, v) in pairs {
            cfg.set(k.trim(), v, &mut target_epochs)?;
        }
        if let TargetMode::LongRun { epochs } = &mut cfg.target_mode {
            *epochs = target_epochs.unwrap_or(10.0 * cfg.epochs);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file, then applies `--key value` overrides on top.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        let mut pairs = parse_file(&text)?;
        pairs.extend(parse_overrides(overrides)?);
        Self::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))
    }

    pub fn validate(&self) -> Result<()> {
        self.mri.validate()?;
        if self.algorithms.is_empty() {
            return Err(Error::Config("algorithms must name at least one solver".into()));
        }
        if !(self.epochs > 0.0 && self.epochs.is_finite()) {
            return Err(Error::Config(format!("epochs must be positive, got {}", self.epochs)));
        }
        if !(self.log_every > 0.0 && self.log_every.is_finite()) {
            return Err(Error::Config(format!(
                "log_every must be positive, got {}",
                self.log_every
            )));
        }
        if self.gamma_grid.is_empty() {
            return Err(Error::Config("gamma_grid is empty".into()));
        }
        if let Some(g) = self.gamma_grid.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
            return Err(Error::Config(format!("gamma_grid entries must be positive, got {g}")));
        }
        match self.target_mode {
            TargetMode::LongRun { epochs } if !(epochs > self.epochs && epochs.is_finite()) => {
                Err(Error::Config(format!(
                    "target_epochs ({epochs}) must exceed epochs ({})",
                    self.epochs
                )))
            }
            TargetMode::Oracle if self.mri.regularizer == Regularizer::Tv => Err(Error::Config(
                "the oracle target needs the l2 regularizer; use target_mode = long_run for tv".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Every resolved setting as `key = value` lines, in [`KEYS`] order.
    pub fn to_text(&self) -> String {
        let m = &self.mri;
        let join = |v: Vec<String>| v.join(",");
        let (mode, target_epochs) = match self.target_mode {
            TargetMode::Oracle => ("oracle", None),
            TargetMode::LongRun { epochs } => ("long_run", Some(epochs)),
        };
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("rows", m.rows.to_string());
        line("cols", m.cols.to_string());
        line("n_coils", m.n_coils.to_string());
        line("sampling_factor", m.sampling_factor.to_string());
        line("mask_kind", m.mask_kind.to_string());
        line("noise_sigma", m.noise_sigma.to_string());
        line("regularizer", m.regularizer.to_string());
        line("alpha", m.alpha.to_string());
        line("seed", m.seed.to_string());
        line("algorithms", join(self.algorithms.iter().map(|a| a.to_string()).collect()));
        line("epochs", self.epochs.to_string());
        line("gamma_grid", join(self.gamma_grid.iter().map(|g| g.to_string()).collect()));
        line("log_every", self.log_every.to_string());
        line("target_mode", mode.to_string());
        if let Some(e) = target_epochs {
            line("target_epochs", e.to_string());
        }
        line("output_dir", self.output_dir.display().to_string());
        line("record_wall_time", self.record_wall_time.to_string());
        out
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_file(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected key = value, got '{raw}'", n + 1))
        })?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

/// Parses `--key value` and `--key=value` arguments.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let key = arg
            .strip_prefix("--")
            .ok_or_else(|| Error::Config(format!("expected --key, got '{arg}'")))?;
        if let Some((k, v)) = key.split_once('=') {
            pairs.push((k.to_string(), v.to_string()));
        } else {
            let v = it
                .next()
                .ok_or_else(|| Error::Config(format!("--{key} needs a value")))?;
            pairs.push((key.to_string(), v.clone()));
        }
    }
    Ok(pairs)
}
