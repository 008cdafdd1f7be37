//! Brute-force references for small instances: dense materialization over the
//! real view, exact operator norms, and a direct solve of the quadratic model.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::image::ComplexImage;
use crate::linops::LinearOperator;
use crate::prox::Functional;
use crate::solvers::{compute_step_sizes, Algorithm, SaddleProblem};
use crate::theory;

/// Largest dense matrix the oracle will build, in real entries.
pub const MAX_DENSE_ENTRIES: usize = 1_000_000;

/// Fixed-point residual a solved saddle must meet before it is returned.
pub const SADDLE_RESIDUAL: f64 = 1e-8;

/// Real matrix acting on interleaved `(re, im)` coordinates.
pub type DenseMatrix = DMatrix<f64>;

fn guard(rows: usize, cols: usize) -> Result<()> {
    let entries = rows.saturating_mul(cols);
    if entries > MAX_DENSE_ENTRIES {
        return Err(Error::TooLarge {
            entries,
            limit: MAX_DENSE_ENTRIES,
        });
    }
    Ok(())
}

/// Column `j` is `apply(op, e_j)` for the `j`-th real basis vector.
pub fn materialize(op: &LinearOperator) -> Result<DenseMatrix> {
    let (rows, cols) = (2 * op.codomain().len(), 2 * op.domain().len());
    guard(rows, cols)?;
    let mut m = DenseMatrix::zeros(rows, cols);
    for j in 0..cols {
        let col = op.apply(&ComplexImage::real_basis(op.domain(), j))?;
        m.set_column(j, &DVector::from_vec(col.to_interleaved()));
    }
    Ok(m)
}

/// Column `j` is `adjoint(op, e_j)`; equals the transpose of [`materialize`].
pub fn materialize_adjoint(op: &LinearOperator) -> Result<DenseMatrix> {
    let (rows, cols) = (2 * op.domain().len(), 2 * op.codomain().len());
    guard(rows, cols)?;
    let mut m = DenseMatrix::zeros(rows, cols);
    for j in 0..cols {
        let col = op.adjoint(&ComplexImage::real_basis(op.codomain(), j))?;
        m.set_column(j, &DVector::from_vec(col.to_interleaved()));
    }
    Ok(m)
}

/// Largest singular value of the materialized operator.
pub fn exact_norm(op: &LinearOperator) -> Result<f64> {
    let m = materialize(op)?;
    Ok(m.singular_values().iter().copied().fold(0.0, f64::max))
}

#[derive(Clone, Debug)]
pub struct QuadraticSaddle {
    pub x_hat: ComplexImage,
    pub y_hat: Vec<ComplexImage>,
    /// `max_j ‖T_j(x̂, ŷ) − (x̂, ŷ)‖` at the step sizes used for verification.
    pub fixed_point_residual: f64,
}

/// Solves `(Σ_i A_iᵀA_i + αI) x̂ = Σ_i A_iᵀ b_i` densely and sets
/// `ŷ_i = 2(A_i x̂ − b_i)`, for problems whose data terms are all squared
/// distances and whose regularizer is `α‖x‖²` (or zero).
pub fn solve_quadratic(problem: &SaddleProblem) -> Result<QuadraticSaddle> {
    let alpha = match problem.regularizer() {
        Functional::SquaredNorm { alpha } => *alpha,
        Functional::Zero => 0.0,
        other => {
            return Err(Error::Oracle(format!(
                "regularizer {} has no quadratic normal equations",
                other.family()
            )))
        }
    };
    let dim = 2 * problem.domain().len();
    guard(dim, dim)?;
    let mut normal = DenseMatrix::identity(dim, dim) * alpha;
    let mut rhs = DVector::zeros(dim);
    for (i, block) in problem.blocks().iter().enumerate() {
        let Functional::SquaredDistance { data } = &block.f else {
            return Err(Error::Oracle(format!(
                "block {i} uses {}, only squared_distance is supported",
                block.f.family()
            )));
        };
        let m = materialize(&block.op)?;
        normal += m.transpose() * &m;
        rhs += m.transpose() * DVector::from_vec(data.to_interleaved());
    }

    let chol = Cholesky::new(normal).ok_or_else(singular)?;
    let pivots: Vec<f64> = chol.l_dirty().diagonal().iter().map(|d| d * d).collect();
    let (lo, hi) = pivots
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &p| (lo.min(p), hi.max(p)));
    if !(lo > 1e-12 * hi) {
        return Err(singular());
    }
    let solution = chol.solve(&rhs);
    let x_hat = ComplexImage::from_interleaved(problem.domain(), solution.as_slice())?;

    let mut y_hat = Vec::with_capacity(problem.n_blocks());
    for block in problem.blocks() {
        let Functional::SquaredDistance { data } = &block.f else {
            unreachable!("checked above");
        };
        y_hat.push(block.op.apply(&x_hat)?.sub(data).scaled(2.0));
    }

    let steps = compute_step_sizes(problem, 1.0, Algorithm::Spdhg)?;
    let residual = theory::fixed_point_residual(problem, &steps, &x_hat, &y_hat)?;
    if !(residual < SADDLE_RESIDUAL) {
        return Err(Error::Oracle(format!(
            "solved point fails the fixed-point test (residual {residual:e})"
        )));
    }
    Ok(QuadraticSaddle {
        x_hat,
        y_hat,
        fixed_point_residual: residual,
    })
}

fn singular() -> Error {
    Error::Oracle("normal equations are singular; use a positive regularization weight".into())
}
