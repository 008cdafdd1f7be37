use rand::distr::weighted::WeightedIndex;

use crate::error::{Error, Result};
use crate::image::{ComplexImage, Shape};
use crate::linops::{LinearOperator, DEFAULT_POWER_ITERS, DEFAULT_POWER_TOL};
use crate::prox::Functional;

/// One dual block: the pair `(A_i, f_i)`.
#[derive(Clone, Debug)]
pub struct DualBlock {
    pub op: LinearOperator,
    pub f: Functional,
}

impl DualBlock {
    pub fn new(op: LinearOperator, f: Functional) -> Self {
        DualBlock { op, f }
    }
}

/// `min_x max_y Σ_i ⟨A_i x, y_i⟩ − f_i*(y_i) + g(x)` with sampling
/// probabilities `p_i` for the stochastic solver.
#[derive(Clone, Debug)]
pub struct SaddleProblem {
    blocks: Vec<DualBlock>,
    g: Functional,
    probabilities: Vec<f64>,
    block_norms: Vec<f64>,
    stacked: LinearOperator,
    stacked_norm: f64,
    pub(crate) sampler: WeightedIndex<f64>,
}

impl SaddleProblem {
    /// Builds a problem and estimates every block norm (and the norm of the
    /// stacked operator) by power iteration, unless already cached on the
    /// operators. `probabilities` defaults to uniform.
    pub fn new(
        blocks: Vec<DualBlock>,
        g: Functional,
        probabilities: Option<Vec<f64>>,
    ) -> Result<Self> {
        check_blocks(&blocks)?;
        let mut norms = Vec::with_capacity(blocks.len());
        for (i, b) in blocks.iter().enumerate() {
            norms.push(b.op.norm_bound_or_estimate(i as u64)?);
        }
        let stacked = stack(&blocks)?;
        let stacked_norm = if blocks.len() == 1 {
            norms[0]
        } else {
            stacked.estimate_norm(DEFAULT_POWER_ITERS, DEFAULT_POWER_TOL, blocks.len() as u64)?;
            stacked.norm_bound().unwrap_or(0.0)
        };
        Self::assemble(blocks, g, probabilities, norms, stacked, stacked_norm)
    }

    /// Builds a problem with caller-supplied norm bounds.
    pub fn with_norms(
        blocks: Vec<DualBlock>,
        g: Functional,
        probabilities: Option<Vec<f64>>,
        block_norms: Vec<f64>,
        stacked_norm: f64,
    ) -> Result<Self> {
        check_blocks(&blocks)?;
        if block_norms.len() != blocks.len() {
            return Err(Error::InvalidProblem(format!(
                "{} norms for {} blocks",
                block_norms.len(),
                blocks.len()
            )));
        }
        if block_norms.iter().chain([&stacked_norm]).any(|n| !(*n >= 0.0)) {
            return Err(Error::InvalidProblem("norm bounds must be nonnegative".into()));
        }
        let stacked = stack(&blocks)?;
        Self::assemble(blocks, g, probabilities, block_norms, stacked, stacked_norm)
    }

    fn assemble(
        blocks: Vec<DualBlock>,
        g: Functional,
        probabilities: Option<Vec<f64>>,
        block_norms: Vec<f64>,
        stacked: LinearOperator,
        stacked_norm: f64,
    ) -> Result<Self> {
        let n = blocks.len();
        let probabilities = probabilities.unwrap_or_else(|| vec![1.0 / n as f64; n]);
        if probabilities.len() != n {
            return Err(Error::InvalidProblem(format!(
                "{} probabilities for {n} blocks",
                probabilities.len()
            )));
        }
        if let Some(p) = probabilities.iter().find(|p| !(**p > 0.0)) {
            return Err(Error::InvalidProblem(format!(
                "every block needs a positive probability, got {p}"
            )));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidProblem(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        let sampler = WeightedIndex::new(&probabilities)
            .map_err(|e| Error::InvalidProblem(format!("sampler: {e}")))?;
        Ok(SaddleProblem {
            blocks,
            g,
            probabilities,
            block_norms,
            stacked,
            stacked_norm,
            sampler,
        })
    }

    pub fn blocks(&self) -> &[DualBlock] {
        &self.blocks
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn regularizer(&self) -> &Functional {
        &self.g
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn block_norms(&self) -> &[f64] {
        &self.block_norms
    }

    /// The stacked operator `x ↦ (A_1 x, …, A_n x)`.
    pub fn stacked_operator(&self) -> &LinearOperator {
        &self.stacked
    }

    pub fn stacked_norm(&self) -> f64 {
        self.stacked_norm
    }

    pub fn domain(&self) -> Shape {
        self.blocks[0].op.domain()
    }

    pub fn zero_primal(&self) -> ComplexImage {
        ComplexImage::zeros(self.domain())
    }

    pub fn zero_dual(&self) -> Vec<ComplexImage> {
        self.blocks
            .iter()
            .map(|b| ComplexImage::zeros(b.op.codomain()))
            .collect()
    }

    /// `Φ(x) = Σ_i f_i(A_i x) + g(x)`.
    pub fn objective(&self, x: &ComplexImage) -> Result<f64> {
        let mut total = self.g.value(x)?;
        for b in &self.blocks {
            total += b.f.value(&b.op.apply(x)?)?;
        }
        Ok(total)
    }

    /// `Aᵀy = Σ_i A_iᵀ y_i`, summed block by block.
    pub fn adjoint_sum(&self, y: &[ComplexImage]) -> Result<ComplexImage> {
        if y.len() != self.blocks.len() {
            return Err(Error::InvalidProblem(format!(
                "dual variable has {} blocks, problem has {}",
                y.len(),
                self.blocks.len()
            )));
        }
        let mut out = self.zero_primal();
        for (b, yi) in self.blocks.iter().zip(y) {
            out.axpy(1.0, &b.op.adjoint(yi)?);
        }
        Ok(out)
    }

    /// `(A_1 x, …, A_n x)` as separate blocks.
    pub fn apply_blocks(&self, x: &ComplexImage) -> Result<Vec<ComplexImage>> {
        self.blocks.iter().map(|b| b.op.apply(x)).collect()
    }
}

fn check_blocks(blocks: &[DualBlock]) -> Result<()> {
    let Some(first) = blocks.first() else {
        return Err(Error::InvalidProblem("at least one dual block is required".into()));
    };
    let domain = first.op.domain();
    for (i, b) in blocks.iter().enumerate() {
        if b.op.domain() != domain {
            return Err(Error::ShapeMismatch {
                stage: format!("dual block {i}"),
                expected: domain,
                actual: b.op.domain(),
            });
        }
    }
    Ok(())
}

fn stack(blocks: &[DualBlock]) -> Result<LinearOperator> {
    LinearOperator::block_row(blocks.iter().map(|b| b.op.clone()).collect())
}
