//! Complex-valued arrays on a 2-D grid.
//!
//! All inner products use the real part of the complex inner product, i.e. a
//! complex array of `d` samples is treated as a real vector of length `2d`.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Grid dimensions. `channels` is the fastest-varying index, so the sample at
/// `(r, c, ch)` lives at `(r * cols + c) * channels + ch`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    pub rows: usize,
    pub cols: usize,
    pub channels: usize,
}

impl Shape {
    pub const fn grid(rows: usize, cols: usize) -> Self {
        Shape {
            rows,
            cols,
            channels: 1,
        }
    }

    pub const fn with_channels(rows: usize, cols: usize, channels: usize) -> Self {
        Shape {
            rows,
            cols,
            channels,
        }
    }

    /// A flat vector of `len` samples, stored as a single row.
    pub const fn vector(len: usize) -> Self {
        Shape {
            rows: 1,
            cols: len,
            channels: 1,
        }
    }

    pub const fn len(&self) -> usize {
        self.rows * self.cols * self.channels
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.channels == 1 {
            write!(f, "{}x{}", self.rows, self.cols)
        } else {
            write!(f, "{}x{}x{}", self.rows, self.cols, self.channels)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexImage {
    shape: Shape,
    data: Vec<Complex64>,
}

impl ComplexImage {
    pub fn zeros(shape: Shape) -> Self {
        ComplexImage {
            shape,
            data: vec![Complex64::new(0.0, 0.0); shape.len()],
        }
    }

    pub fn from_vec(shape: Shape, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::InvalidOperator(format!(
                "array of {} samples does not fit shape {shape}",
                data.len()
            )));
        }
        Ok(ComplexImage { shape, data })
    }

    pub fn from_real(shape: Shape, values: &[f64]) -> Result<Self> {
        Self::from_vec(
            shape,
            values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        )
    }

    /// Builds an array from its real view `[re0, im0, re1, im1, ...]`.
    pub fn from_interleaved(shape: Shape, values: &[f64]) -> Result<Self> {
        if values.len() != 2 * shape.len() {
            return Err(Error::InvalidOperator(format!(
                "real view of length {} does not fit shape {shape}",
                values.len()
            )));
        }
        let data = values
            .chunks_exact(2)
            .map(|p| Complex64::new(p[0], p[1]))
            .collect();
        Ok(ComplexImage { shape, data })
    }

    /// Standard complex Gaussian sample: independent `N(0, scale²)` real and
    /// imaginary parts.
    pub fn random<R: Rng + ?Sized>(shape: Shape, scale: f64, rng: &mut R) -> Self {
        let data = (0..shape.len())
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(scale * re, scale * im)
            })
            .collect();
        ComplexImage { shape, data }
    }

    /// Unit vector of the real view: `index / 2` picks the sample, the parity
    /// picks the real or imaginary part.
    pub fn real_basis(shape: Shape, index: usize) -> Self {
        let mut e = Self::zeros(shape);
        e.data[index / 2] = if index.is_multiple_of(2) {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 1.0)
        };
        e
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn to_interleaved(&self) -> Vec<f64> {
        self.data.iter().flat_map(|z| [z.re, z.im]).collect()
    }

    /// Reinterprets the samples under a new shape with the same length.
    pub fn reshaped(mut self, shape: Shape) -> Result<Self> {
        if shape.len() != self.data.len() {
            return Err(Error::ShapeMismatch {
                stage: "reshape".into(),
                expected: self.shape,
                actual: shape,
            });
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn ensure_shape(&self, expected: Shape, stage: &str) -> Result<()> {
        if self.shape != expected {
            return Err(Error::ShapeMismatch {
                stage: stage.to_string(),
                expected,
                actual: self.shape,
            });
        }
        Ok(())
    }

    /// Real inner product `Re Σ u_k conj(v_k)`.
    pub fn dot(&self, other: &ComplexImage) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&mut self, alpha: f64) {
        for z in &mut self.data {
            *z *= alpha;
        }
    }

    pub fn scaled(&self, alpha: f64) -> ComplexImage {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    /// `self += alpha * x`
    pub fn axpy(&mut self, alpha: f64, x: &ComplexImage) {
        debug_assert_eq!(self.len(), x.len());
        for (a, b) in self.data.iter_mut().zip(&x.data) {
            *a += b * alpha;
        }
    }

    pub fn add(&self, other: &ComplexImage) -> ComplexImage {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &ComplexImage) -> ComplexImage {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn set_zero(&mut self) {
        self.data.fill(Complex64::new(0.0, 0.0));
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.norm()).collect()
    }
}

/// Real inner product summed over a list of blocks.
pub fn blocks_dot(a: &[ComplexImage], b: &[ComplexImage]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u.dot(v)).sum()
}

pub fn blocks_norm_sqr(a: &[ComplexImage]) -> f64 {
    a.iter().map(ComplexImage::norm_sqr).sum()
}

pub fn blocks_sub(a: &[ComplexImage], b: &[ComplexImage]) -> Vec<ComplexImage> {
    a.iter().zip(b).map(|(u, v)| u.sub(v)).collect()
}
