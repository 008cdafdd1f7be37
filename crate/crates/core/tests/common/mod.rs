#![allow(dead_code)]

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spdhg::mri::{assemble_problem, MaskKind, MriConfig, MriInstance, Regularizer};
use spdhg::{ComplexImage, DualBlock, Functional, LinearOperator, SaddleProblem, Shape};

/// 16×16 phantom, 3 coils, half sampling, α = 10⁻².
pub fn small_config() -> MriConfig {
    MriConfig {
        rows: 16,
        cols: 16,
        n_coils: 3,
        sampling_factor: 2.0,
        mask_kind: MaskKind::CartesianLines,
        noise_sigma: 0.05,
        regularizer: Regularizer::L2,
        alpha: 1e-2,
        seed: 0,
    }
}

pub fn small_instance() -> MriInstance {
    assemble_problem(&small_config()).unwrap()
}

/// Writes straight to the process stdout so the line is visible even when
/// the harness captures test output.
pub fn report(criterion: u32, name: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    let line = format!("criterion {criterion:>2} [{status}] {name}: {detail}\n");
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random operator from the basic kinds, optionally composed, on a small grid.
pub fn random_operator(rng: &mut ChaCha8Rng) -> LinearOperator {
    let rows = rng.random_range(2..6);
    let cols = rng.random_range(2..6);
    let shape = Shape::grid(rows, cols);
    let d = rows * cols;
    let coil = ComplexImage::random(shape, 1.0, rng);
    let mut indices: Vec<usize> = (0..d).filter(|_| rng.random_bool(0.6)).collect();
    if indices.is_empty() {
        indices.push(0);
    }
    let mask = LinearOperator::mask(shape, indices).unwrap();
    let dft = LinearOperator::dft2(rows, cols).unwrap();
    let c = LinearOperator::coil_multiply(&coil).unwrap();
    let grad = LinearOperator::gradient(rows, cols).unwrap();
    let s = LinearOperator::scaled_identity(shape, rng.random_range(-3.0..3.0)).unwrap();
    match rng.random_range(0..7) {
        0 => dft,
        1 => c,
        2 => grad,
        3 => LinearOperator::compose(vec![mask, dft, c]).unwrap(),
        4 => LinearOperator::compose(vec![grad, s, c]).unwrap(),
        5 => LinearOperator::block_row(vec![LinearOperator::compose(vec![mask, dft]).unwrap(), grad]).unwrap(),
        _ => LinearOperator::compose(vec![dft.clone(), c, dft]).unwrap(),
    }
}

/// Random quadratic problem with `n` blocks of the form `mask ∘ dft ∘ coil`.
pub fn random_quadratic(rng: &mut ChaCha8Rng, n: usize, alpha: f64) -> SaddleProblem {
    let (rows, cols) = (4, 4);
    let shape = Shape::grid(rows, cols);
    let blocks = (0..n)
        .map(|_| {
            let coil = ComplexImage::random(shape, 1.0, rng);
            let mut idx: Vec<usize> = (0..16).filter(|_| rng.random_bool(0.7)).collect();
            if idx.is_empty() {
                idx.push(3);
            }
            let op = LinearOperator::compose(vec![
                LinearOperator::mask(shape, idx).unwrap(),
                LinearOperator::dft2(rows, cols).unwrap(),
                LinearOperator::coil_multiply(&coil).unwrap(),
            ])
            .unwrap();
            let b = ComplexImage::random(op.codomain(), 1.0, rng);
            DualBlock::new(op, Functional::squared_distance(b))
        })
        .collect();
    SaddleProblem::new(blocks, Functional::squared_norm(alpha).unwrap(), None).unwrap()
}
