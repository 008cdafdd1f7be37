//! Deterministic (PDHG) and stochastic (SPDHG) primal-dual hybrid gradient
//! solvers for problems of the form `min_x Σ_i f_i(A_i x) + g(x)`, together
//! with a synthetic parallel-MRI harness, brute-force reference solvers and
//! numerical checks of the convergence inequalities.

// `!(a > b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod image;
pub mod linops;
pub mod mri;
pub mod oracle;
pub mod prox;
pub mod solvers;
pub mod theory;

pub use error::{Error, Result};
pub use image::{ComplexImage, Shape};
pub use linops::{LinearOperator, NormEstimate, OperatorKind};
pub use prox::Functional;
pub use solvers::{
    Algorithm, ConvergenceRecord, DualBlock, GammaSearch, RunOutput, RunTarget, SaddleProblem,
    SolverState, StepSizes,
};
