//! Matrix-free linear operators between complex grid arrays.
//!
//! Every operator is immutable once built and cheap to clone; clones share the
//! cached norm bound. Adjoints are taken with respect to the real inner product
//! `Re⟨u, v⟩`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::image::{ComplexImage, Shape};

/// Relative inflation applied to a power-iteration estimate before it is
/// cached as a norm bound.
pub const NORM_SAFETY_FACTOR: f64 = 1.0 + 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    Dft2,
    Mask,
    CoilMultiply,
    Gradient,
    ScaledIdentity,
    Compose,
    BlockRow,
}

impl OperatorKind {
    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::Dft2 => "dft2",
            OperatorKind::Mask => "mask",
            OperatorKind::CoilMultiply => "coil_multiply",
            OperatorKind::Gradient => "gradient",
            OperatorKind::ScaledIdentity => "scaled_identity",
            OperatorKind::Compose => "compose",
            OperatorKind::BlockRow => "block_row",
        }
    }
}

struct FftPlans {
    row_forward: Arc<dyn Fft<f64>>,
    row_inverse: Arc<dyn Fft<f64>>,
    col_forward: Arc<dyn Fft<f64>>,
    col_inverse: Arc<dyn Fft<f64>>,
}

enum Kind {
    Dft2(FftPlans),
    Mask(Vec<usize>),
    CoilMultiply(Vec<Complex64>),
    Gradient,
    ScaledIdentity(f64),
    /// Mathematical order: `ops[0] ∘ ops[1] ∘ ...`, so the last one acts first.
    Compose(Vec<LinearOperator>),
    BlockRow(Vec<LinearOperator>),
}

struct Inner {
    kind: Kind,
    domain: Shape,
    codomain: Shape,
    norm_bound: OnceLock<f64>,
}

#[derive(Clone)]
pub struct LinearOperator {
    inner: Arc<Inner>,
}

/// Result of a power-iteration norm estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormEstimate {
    pub norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl LinearOperator {
    fn from_kind(kind: Kind, domain: Shape, codomain: Shape) -> Self {
        LinearOperator {
            inner: Arc::new(Inner {
                kind,
                domain,
                codomain,
                norm_bound: OnceLock::new(),
            }),
        }
    }

    /// Orthonormal 2-D discrete Fourier transform on a `rows × cols` grid.
    /// Frequencies are stored in natural (unshifted) order.
    pub fn dft2(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidOperator("dft2 on an empty grid".into()));
        }
        let mut planner = FftPlanner::new();
        let plans = FftPlans {
            row_forward: planner.plan_fft_forward(cols),
            row_inverse: planner.plan_fft_inverse(cols),
            col_forward: planner.plan_fft_forward(rows),
            col_inverse: planner.plan_fft_inverse(rows),
        };
        let shape = Shape::grid(rows, cols);
        Ok(Self::from_kind(Kind::Dft2(plans), shape, shape))
    }

    /// Selects the listed flat indices of `domain`, in the given order.
    pub fn mask(domain: Shape, indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidOperator("mask index set is empty".into()));
        }
        let d = domain.len();
        let mut seen = vec![false; d];
        for &i in &indices {
            if i >= d {
                return Err(Error::InvalidOperator(format!(
                    "mask index {i} out of bounds for {domain} ({d} samples)"
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidOperator(format!(
                    "mask index {i} appears twice"
                )));
            }
        }
        let codomain = Shape::vector(indices.len());
        Ok(Self::from_kind(Kind::Mask(indices), domain, codomain))
    }

    /// Pointwise multiplication by `coil`.
    pub fn coil_multiply(coil: &ComplexImage) -> Result<Self> {
        if coil.is_empty() {
            return Err(Error::InvalidOperator("empty coil map".into()));
        }
        let shape = coil.shape();
        Ok(Self::from_kind(
            Kind::CoilMultiply(coil.data().to_vec()),
            shape,
            shape,
        ))
    }

    /// Forward differences with Neumann boundary. The codomain carries two
    /// channels per pixel: vertical then horizontal difference.
    pub fn gradient(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidOperator("gradient on an empty grid".into()));
        }
        Ok(Self::from_kind(
            Kind::Gradient,
            Shape::grid(rows, cols),
            Shape::with_channels(rows, cols, 2),
        ))
    }

    pub fn scaled_identity(shape: Shape, scale: f64) -> Result<Self> {
        if !scale.is_finite() {
            return Err(Error::InvalidOperator(format!("non-finite scale {scale}")));
        }
        Ok(Self::from_kind(Kind::ScaledIdentity(scale), shape, shape))
    }

    pub fn identity(shape: Shape) -> Result<Self> {
        Self::scaled_identity(shape, 1.0)
    }

    /// `ops[0] ∘ ops[1] ∘ … ∘ ops[last]`; the last operator is applied first.
    pub fn compose(ops: Vec<LinearOperator>) -> Result<Self> {
        let (first, last) = match (ops.first(), ops.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(Error::InvalidOperator("empty composition".into())),
        };
        for (stage, pair) in ops.windows(2).enumerate() {
            let (outer, inner) = (&pair[0], &pair[1]);
            if outer.domain() != inner.codomain() {
                return Err(Error::ShapeMismatch {
                    stage: format!(
                        "compose stage {stage} ({} after {})",
                        outer.kind().name(),
                        inner.kind().name()
                    ),
                    expected: outer.domain(),
                    actual: inner.codomain(),
                });
            }
        }
        let (domain, codomain) = (last.domain(), first.codomain());
        Ok(Self::from_kind(Kind::Compose(ops), domain, codomain))
    }

    /// Stacks the outputs of operators sharing one domain: `x ↦ (A_1 x, …, A_n x)`,
    /// flattened into a single vector.
    pub fn block_row(ops: Vec<LinearOperator>) -> Result<Self> {
        let Some(first) = ops.first() else {
            return Err(Error::InvalidOperator("empty block row".into()));
        };
        let domain = first.domain();
        for (i, op) in ops.iter().enumerate() {
            if op.domain() != domain {
                return Err(Error::ShapeMismatch {
                    stage: format!("block_row block {i}"),
                    expected: domain,
                    actual: op.domain(),
                });
            }
        }
        let total = ops.iter().map(|op| op.codomain().len()).sum();
        Ok(Self::from_kind(Kind::BlockRow(ops), domain, Shape::vector(total)))
    }

    pub fn kind(&self) -> OperatorKind {
        match &self.inner.kind {
            Kind::Dft2(_) => OperatorKind::Dft2,
            Kind::Mask(_) => OperatorKind::Mask,
            Kind::CoilMultiply(_) => OperatorKind::CoilMultiply,
            Kind::Gradient => OperatorKind::Gradient,
            Kind::ScaledIdentity(_) => OperatorKind::ScaledIdentity,
            Kind::Compose(_) => OperatorKind::Compose,
            Kind::BlockRow(_) => OperatorKind::BlockRow,
        }
    }

    pub fn domain(&self) -> Shape {
        self.inner.domain
    }

    pub fn codomain(&self) -> Shape {
        self.inner.codomain
    }

    /// Selected indices for a mask operator.
    pub fn mask_indices(&self) -> Option<&[usize]> {
        match &self.inner.kind {
            Kind::Mask(idx) => Some(idx),
            _ => None,
        }
    }

    /// Child operators of a composition or block row.
    pub fn children(&self) -> &[LinearOperator] {
        match &self.inner.kind {
            Kind::Compose(ops) | Kind::BlockRow(ops) => ops,
            _ => &[],
        }
    }

    /// Cached upper bound on the operator norm, if one has been computed.
    pub fn norm_bound(&self) -> Option<f64> {
        self.inner.norm_bound.get().copied()
    }

    pub fn apply(&self, x: &ComplexImage) -> Result<ComplexImage> {
        x.ensure_shape(self.domain(), &format!("{} apply", self.kind().name()))?;
        Ok(self.apply_unchecked(x))
    }

    pub fn adjoint(&self, y: &ComplexImage) -> Result<ComplexImage> {
        y.ensure_shape(self.codomain(), &format!("{} adjoint", self.kind().name()))?;
        Ok(self.adjoint_unchecked(y))
    }

    fn apply_unchecked(&self, x: &ComplexImage) -> ComplexImage {
        let (domain, codomain) = (self.domain(), self.codomain());
        match &self.inner.kind {
            Kind::Dft2(plans) => {
                let mut out = x.clone();
                fft2(
                    out.data_mut(),
                    domain,
                    &plans.row_forward,
                    &plans.col_forward,
                );
                out
            }
            Kind::Mask(idx) => {
                let data = idx.iter().map(|&i| x.data()[i]).collect();
                from_parts(codomain, data)
            }
            Kind::CoilMultiply(coil) => {
                let data = x.data().iter().zip(coil).map(|(v, c)| v * c).collect();
                from_parts(codomain, data)
            }
            Kind::Gradient => gradient_forward(x, domain, codomain),
            Kind::ScaledIdentity(s) => x.scaled(*s),
            Kind::Compose(ops) => {
                let mut v = x.clone();
                for op in ops.iter().rev() {
                    v = op.apply_unchecked(&v);
                }
                v
            }
            Kind::BlockRow(ops) => {
                let mut data = Vec::with_capacity(codomain.len());
                for op in ops {
                    data.extend(op.apply_unchecked(x).into_data());
                }
                from_parts(codomain, data)
            }
        }
    }

    fn adjoint_unchecked(&self, y: &ComplexImage) -> ComplexImage {
        let domain = self.domain();
        match &self.inner.kind {
            Kind::Dft2(plans) => {
                let mut out = y.clone();
                fft2(
                    out.data_mut(),
                    domain,
                    &plans.row_inverse,
                    &plans.col_inverse,
                );
                out
            }
            Kind::Mask(idx) => {
                let mut out = ComplexImage::zeros(domain);
                let data = out.data_mut();
                for (&i, v) in idx.iter().zip(y.data()) {
                    data[i] = *v;
                }
                out
            }
            Kind::CoilMultiply(coil) => {
                let data = y
                    .data()
                    .iter()
                    .zip(coil)
                    .map(|(v, c)| v * c.conj())
                    .collect();
                from_parts(domain, data)
            }
            Kind::Gradient => gradient_adjoint(y, domain),
            Kind::ScaledIdentity(s) => y.scaled(*s),
            Kind::Compose(ops) => {
                let mut v = y.clone();
                for op in ops {
                    v = op.adjoint_unchecked(&v);
                }
                v
            }
            Kind::BlockRow(ops) => {
                let mut out = ComplexImage::zeros(domain);
                let mut offset = 0;
                for op in ops {
                    let cod = op.codomain();
                    let part = from_parts(cod, y.data()[offset..offset + cod.len()].to_vec());
                    out.axpy(1.0, &op.adjoint_unchecked(&part));
                    offset += cod.len();
                }
                out
            }
        }
    }

    /// Power iteration on `AᵀA` from a seeded random start.
    ///
    /// Stops once successive norm estimates agree to `tol` relatively. The
    /// estimate inflated by [`NORM_SAFETY_FACTOR`] is cached as the operator's
    /// norm bound on first call; later calls leave the cache untouched.
    pub fn estimate_norm(&self, max_iters: usize, tol: f64, seed: u64) -> Result<NormEstimate> {
        if max_iters == 0 {
            return Err(Error::InvalidOperator("max_iters must be at least 1".into()));
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidOperator(format!("tol must be positive, got {tol}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = ComplexImage::random(self.domain(), 1.0, &mut rng);
        let n0 = v.norm();
        v.scale(1.0 / n0);

        let mut estimate = 0.0;
        let mut converged = false;
        let mut iterations = 0;
        for it in 1..=max_iters {
            iterations = it;
            let w = self.adjoint_unchecked(&self.apply_unchecked(&v));
            let rayleigh = v.dot(&w).max(0.0);
            let next = rayleigh.sqrt();
            let wn = w.norm();
            if wn == 0.0 {
                estimate = 0.0;
                converged = true;
                break;
            }
            let prev = estimate;
            estimate = next;
            if it > 1 && (estimate - prev).abs() < tol * estimate {
                converged = true;
                break;
            }
            v = w;
            v.scale(1.0 / wn);
        }
        if !converged {
            log::warn!(
                "power iteration for {} did not converge in {max_iters} iterations (estimate {estimate})",
                self.kind().name()
            );
        }
        let _ = self
            .inner
            .norm_bound
            .get_or_init(|| estimate * NORM_SAFETY_FACTOR);
        Ok(NormEstimate {
            norm: estimate,
            iterations,
            converged,
        })
    }

    /// Returns the cached norm bound, estimating it with default settings if
    /// none is cached yet.
    pub fn norm_bound_or_estimate(&self, seed: u64) -> Result<f64> {
        if let Some(b) = self.norm_bound() {
            return Ok(b);
        }
        self.estimate_norm(DEFAULT_POWER_ITERS, DEFAULT_POWER_TOL, seed)?;
        Ok(self.norm_bound().unwrap_or(0.0))
    }
}

pub const DEFAULT_POWER_ITERS: usize = 2000;
pub const DEFAULT_POWER_TOL: f64 = 1e-10;

impl fmt::Debug for LinearOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = f.debug_struct("LinearOperator");
        s.field("kind", &self.kind())
            .field("domain", &self.domain())
            .field("codomain", &self.codomain());
        match &self.inner.kind {
            Kind::Mask(idx) => {
                s.field("selected", &idx.len());
            }
            Kind::ScaledIdentity(a) => {
                s.field("scale", a);
            }
            Kind::Compose(ops) | Kind::BlockRow(ops) => {
                s.field("children", ops);
            }
            _ => {}
        }
        s.field("norm_bound", &self.norm_bound()).finish()
    }
}

fn from_parts(shape: Shape, data: Vec<Complex64>) -> ComplexImage {
    ComplexImage::from_vec(shape, data).expect("operator produced a mis-sized array")
}

fn fft2(
    data: &mut [Complex64],
    shape: Shape,
    row_plan: &Arc<dyn Fft<f64>>,
    col_plan: &Arc<dyn Fft<f64>>,
) {
    let (rows, cols) = (shape.rows, shape.cols);
    // rustfft transforms every consecutive chunk of the plan length
    row_plan.process(data);
    let mut transposed = vec![Complex64::new(0.0, 0.0); data.len()];
    for r in 0..rows {
        for c in 0..cols {
            transposed[c * rows + r] = data[r * cols + c];
        }
    }
    col_plan.process(&mut transposed);
    let scale = 1.0 / ((rows * cols) as f64).sqrt();
    for r in 0..rows {
        for c in 0..cols {
            data[r * cols + c] = transposed[c * rows + r] * scale;
        }
    }
}

fn gradient_forward(x: &ComplexImage, domain: Shape, codomain: Shape) -> ComplexImage {
    let (rows, cols) = (domain.rows, domain.cols);
    let src = x.data();
    let mut out = ComplexImage::zeros(codomain);
    let dst = out.data_mut();
    for r in 0..rows {
        for c in 0..cols {
            let p = r * cols + c;
            if r + 1 < rows {
                dst[2 * p] = src[p + cols] - src[p];
            }
            if c + 1 < cols {
                dst[2 * p + 1] = src[p + 1] - src[p];
            }
        }
    }
    out
}

/// Negative divergence, the adjoint of [`gradient_forward`].
fn gradient_adjoint(y: &ComplexImage, domain: Shape) -> ComplexImage {
    let (rows, cols) = (domain.rows, domain.cols);
    let src = y.data();
    let mut out = ComplexImage::zeros(domain);
    let dst = out.data_mut();
    for r in 0..rows {
        for c in 0..cols {
            let p = r * cols + c;
            let mut acc = Complex64::new(0.0, 0.0);
            if r + 1 < rows {
                acc -= src[2 * p];
            }
            if r > 0 {
                acc += src[2 * (p - cols)];
            }
            if c + 1 < cols {
                acc -= src[2 * p + 1];
            }
            if c > 0 {
                acc += src[2 * (p - 1) + 1];
            }
            dst[p] = acc;
        }
    }
    out
}
