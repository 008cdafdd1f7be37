//! Synthetic parallel-MRI instances: phantom, coil sensitivities, k-space
//! masks, noisy data, and their assembly into a [`SaddleProblem`].
//!
//! Each coil contributes a block `A_i = S ∘ F ∘ C_i` with data term
//! `‖A_i x − b_i‖²`. The TV regularizer `α‖∇x‖₁` has no closed-form primal
//! prox, so it is added as an extra dual block `(∇, α·group_l1)` with `g = 0`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::image::{ComplexImage, Shape};
use crate::linops::LinearOperator;
use crate::prox::Functional;
use crate::solvers::{DualBlock, SaddleProblem};

/// Fraction of k-space rows, centred on DC, that cartesian masks always keep.
pub const CENTRAL_BAND_FRACTION: f64 = 0.08;

/// Real entries per TV group: two difference directions times (re, im).
pub const TV_GROUP_SIZE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaskKind {
    CartesianLines,
    UniformRandom,
}

impl fmt::Display for MaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MaskKind::CartesianLines => "cartesian_lines",
            MaskKind::UniformRandom => "uniform_random",
        })
    }
}

impl FromStr for MaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "cartesian_lines" => Ok(MaskKind::CartesianLines),
            "uniform_random" => Ok(MaskKind::UniformRandom),
            other => Err(Error::Config(format!("unknown mask kind '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regularizer {
    /// `α‖x‖²`
    L2,
    /// `α‖∇x‖₁`, isotropic
    Tv,
}

impl fmt::Display for Regularizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regularizer::L2 => "l2",
            Regularizer::Tv => "tv",
        })
    }
}

impl FromStr for Regularizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "l2" => Ok(Regularizer::L2),
            "tv" => Ok(Regularizer::Tv),
            other => Err(Error::Config(format!("unknown regularizer '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MriConfig {
    pub rows: usize,
    pub cols: usize,
    pub n_coils: usize,
    /// Ratio `d/m` of grid samples to measured samples.
    pub sampling_factor: f64,
    pub mask_kind: MaskKind,
    /// Standard deviation of each real component of the noise.
    pub noise_sigma: f64,
    pub regularizer: Regularizer,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for MriConfig {
    fn default() -> Self {
        MriConfig {
            rows: 64,
            cols: 64,
            n_coils: 4,
            sampling_factor: 2.0,
            mask_kind: MaskKind::CartesianLines,
            noise_sigma: 0.05,
            regularizer: Regularizer::L2,
            alpha: 1e-4,
            seed: 0,
        }
    }
}

impl MriConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rows < 8 || self.cols < 8 {
            return Err(Error::Config(format!(
                "grid must be at least 8x8, got {}x{}",
                self.rows, self.cols
            )));
        }
        if self.n_coils == 0 {
            return Err(Error::Config("need at least one coil".into()));
        }
        if !(self.sampling_factor >= 1.0 && self.sampling_factor.is_finite()) {
            return Err(Error::Config(format!(
                "sampling_factor must be >= 1, got {}",
                self.sampling_factor
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Derives an independent stream seed for one generation stage.
fn stage_seed(seed: u64, stage: u64) -> u64 {
    seed ^ stage.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Modified Shepp–Logan head phantom, real-valued in `[0, 1]`.
pub fn make_phantom(rows: usize, cols: usize) -> Result<ComplexImage> {
    if rows < 8 || cols < 8 {
        return Err(Error::Config(format!(
            "phantom needs at least 8x8 pixels, got {rows}x{cols}"
        )));
    }
    // (intensity, semi-axis x, semi-axis y, centre x, centre y, rotation in degrees)
    const ELLIPSES: [(f64, f64, f64, f64, f64, f64); 10] = [
        (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
        (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
        (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
        (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
        (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
        (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
        (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
        (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
        (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
        (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
    ];
    let mut values = vec![0.0; rows * cols];
    for r in 0..rows {
        let y = 1.0 - (2 * r + 1) as f64 / rows as f64;
        for c in 0..cols {
            let x = (2 * c + 1) as f64 / cols as f64 - 1.0;
            let mut v = 0.0;
            for &(intensity, a, b, x0, y0, deg) in &ELLIPSES {
                let (s, co) = deg.to_radians().sin_cos();
                let (dx, dy) = (x - x0, y - y0);
                let u = dx * co + dy * s;
                let w = -dx * s + dy * co;
                if (u / a).powi(2) + (w / b).powi(2) <= 1.0 {
                    v += intensity;
                }
            }
            values[r * cols + c] = v.clamp(0.0, 1.0);
        }
    }
    ComplexImage::from_real(Shape::grid(rows, cols), &values)
}

/// Smooth complex coil sensitivities: Gaussian bumps centred at equally spaced
/// angles just outside the field of view, with random linear phase ramps.
/// Scaled so that `max_p Σ_i |c_i(p)|² = 1`.
pub fn make_coil_maps(rows: usize, cols: usize, n_coils: usize, seed: u64) -> Result<Vec<ComplexImage>> {
    if n_coils == 0 {
        return Err(Error::Config("need at least one coil".into()));
    }
    let shape = Shape::grid(rows, cols);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    const RADIUS: f64 = 1.2;
    const WIDTH: f64 = 1.0;
    let pi = std::f64::consts::PI;

    let mut maps = Vec::with_capacity(n_coils);
    for i in 0..n_coils {
        let theta = 2.0 * pi * i as f64 / n_coils as f64;
        let (cx, cy) = (RADIUS * theta.cos(), RADIUS * theta.sin());
        let kx: f64 = rng.random_range(-pi..pi);
        let ky: f64 = rng.random_range(-pi..pi);
        let phase0: f64 = rng.random_range(0.0..2.0 * pi);
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let y = 1.0 - (2 * r + 1) as f64 / rows as f64;
            for c in 0..cols {
                let x = (2 * c + 1) as f64 / cols as f64 - 1.0;
                let d2 = (x - cx).powi(2) + (y - cy).powi(2);
                let mag = (-d2 / (2.0 * WIDTH * WIDTH)).exp();
                data.push(Complex64::from_polar(mag, kx * x + ky * y + phase0));
            }
        }
        maps.push(ComplexImage::from_vec(shape, data)?);
    }

    let peak = (0..shape.len())
        .map(|p| maps.iter().map(|m| m.data()[p].norm_sqr()).sum::<f64>())
        .fold(0.0, f64::max);
    let scale = 1.0 / peak.sqrt();
    for m in &mut maps {
        m.scale(scale);
    }
    Ok(maps)
}

/// Storage row of the k-space row with centred index `centered` (DC at `rows/2`).
pub fn storage_row(centered: usize, rows: usize) -> usize {
    (centered + rows - rows / 2) % rows
}

/// Inverse of [`storage_row`].
pub fn centered_row(storage: usize, rows: usize) -> usize {
    (storage + rows / 2) % rows
}

/// Flat k-space indices kept by the subsampling operator, sorted, in the
/// natural (unshifted) DFT storage order.
///
/// `cartesian_lines` keeps `floor(m/cols)` whole rows: the central band of
/// `ceil(8% · rows)` rows around DC plus uniformly drawn others.
pub fn make_mask(
    rows: usize,
    cols: usize,
    sampling_factor: f64,
    kind: MaskKind,
    seed: u64,
) -> Result<Vec<usize>> {
    if !(sampling_factor >= 1.0 && sampling_factor.is_finite()) {
        return Err(Error::Config(format!(
            "sampling_factor must be >= 1, got {sampling_factor}"
        )));
    }
    let d = rows * cols;
    let m = (d as f64 / sampling_factor).floor() as usize;
    if m < 1 {
        return Err(Error::Config(format!(
            "sampling_factor {sampling_factor} leaves no samples on a {rows}x{cols} grid"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selected = match kind {
        MaskKind::UniformRandom => index::sample(&mut rng, d, m).into_vec(),
        MaskKind::CartesianLines => {
            let n_lines = (m / cols).clamp(1, rows);
            let band = ((CENTRAL_BAND_FRACTION * rows as f64).ceil() as usize).clamp(1, n_lines);
            let start = rows / 2 - band / 2;
            let mut lines: Vec<usize> = (start..start + band).collect();
            let others: Vec<usize> = (0..rows).filter(|r| !lines.contains(r)).collect();
            let extra = index::sample(&mut rng, others.len(), n_lines - band);
            lines.extend(extra.iter().map(|i| others[i]));
            lines
                .into_iter()
                .flat_map(|rc| {
                    let r = storage_row(rc, rows);
                    r * cols..(r + 1) * cols
                })
                .collect()
        }
    };
    selected.sort_unstable();
    Ok(selected)
}

/// `b_i = A_i x† + η_i` with i.i.d. Gaussian noise of standard deviation
/// `noise_sigma` on each real component.
pub fn synthesize_data(
    truth: &ComplexImage,
    operators: &[LinearOperator],
    noise_sigma: f64,
    seed: u64,
) -> Result<Vec<ComplexImage>> {
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::Config(format!("noise_sigma must be >= 0, got {noise_sigma}")));
    }
    let normal = Normal::new(0.0, noise_sigma)
        .map_err(|e| Error::Config(format!("noise_sigma {noise_sigma}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(operators.len());
    for op in operators {
        let mut b = op.apply(truth)?;
        if noise_sigma > 0.0 {
            for z in b.data_mut() {
                let re = normal.sample(&mut rng);
                let im = normal.sample(&mut rng);
                *z += Complex64::new(re, im);
            }
        }
        out.push(b);
    }
    Ok(out)
}

/// Everything generated for one synthetic instance.
#[derive(Clone, Debug)]
pub struct MriInstance {
    pub config: MriConfig,
    pub problem: SaddleProblem,
    pub ground_truth: ComplexImage,
    pub data: Vec<ComplexImage>,
    pub coil_maps: Vec<ComplexImage>,
    pub mask: Vec<usize>,
}

impl MriInstance {
    /// Coil blocks only (the TV block, when present, comes last).
    pub fn coil_operators(&self) -> Vec<LinearOperator> {
        self.problem.blocks()[..self.config.n_coils]
            .iter()
            .map(|b| b.op.clone())
            .collect()
    }
}

/// `A_i = mask ∘ dft2 ∘ coil_multiply(c_i)` for every coil.
pub fn coil_operators(
    rows: usize,
    cols: usize,
    coil_maps: &[ComplexImage],
    mask: &[usize],
) -> Result<Vec<LinearOperator>> {
    let shape = Shape::grid(rows, cols);
    let s = LinearOperator::mask(shape, mask.to_vec())?;
    let f = LinearOperator::dft2(rows, cols)?;
    coil_maps
        .iter()
        .map(|c| LinearOperator::compose(vec![s.clone(), f.clone(), LinearOperator::coil_multiply(c)?]))
        .collect()
}

pub fn assemble_problem(config: &MriConfig) -> Result<MriInstance> {
    config.validate()?;
    let (rows, cols) = (config.rows, config.cols);
    let ground_truth = make_phantom(rows, cols)?;
    let coil_maps = make_coil_maps(rows, cols, config.n_coils, stage_seed(config.seed, 1))?;
    let mask = make_mask(
        rows,
        cols,
        config.sampling_factor,
        config.mask_kind,
        stage_seed(config.seed, 2),
    )?;
    let ops = coil_operators(rows, cols, &coil_maps, &mask)?;
    let data = synthesize_data(&ground_truth, &ops, config.noise_sigma, stage_seed(config.seed, 3))?;

    let mut blocks: Vec<DualBlock> = ops
        .into_iter()
        .zip(&data)
        .map(|(op, b)| DualBlock::new(op, Functional::squared_distance(b.clone())))
        .collect();
    let g = match config.regularizer {
        Regularizer::L2 => Functional::squared_norm(config.alpha)?,
        Regularizer::Tv => {
            blocks.push(DualBlock::new(
                LinearOperator::gradient(rows, cols)?,
                Functional::group_l1(config.alpha, TV_GROUP_SIZE)?,
            ));
            Functional::Zero
        }
    };
    let problem = SaddleProblem::new(blocks, g, None)?;
    Ok(MriInstance {
        config: config.clone(),
        problem,
        ground_truth,
        data,
        coil_maps,
        mask,
    })
}
