use std::fmt::{Debug, Display};

use num_traits::{Float, NumAssign};

use crate::error::{KwsError, Result};

/// Floating-point element type. Training and inference run in `f32`;
/// gradient checking runs the same code paths in `f64`.
pub trait Real: Float + NumAssign + Debug + Display + Default + Send + Sync + 'static {
    fn of(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// Dense row-major array.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<F = f32> {
    shape: Vec<usize>,
    data: Vec<F>,
}

impl<F: Real> Tensor<F> {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![F::zero(); n],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<F>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(KwsError::Shape(format!("zero dimension in shape {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(KwsError::Shape(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<F> {
        self.data
    }

    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    /// Width of a row when the tensor is viewed as `shape[0] × rest`.
    pub fn row_len(&self) -> usize {
        self.shape.iter().skip(1).product()
    }

    pub fn row(&self, i: usize) -> &[F] {
        let w = self.row_len();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [F] {
        let w = self.row_len();
        &mut self.data[i * w..(i + 1) * w]
    }

    pub fn fill(&mut self, v: F) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|x| x.as_f64() * x.as_f64()).sum()
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: F, other: &Tensor<F>) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, k: F) {
        self.data.iter_mut().for_each(|x| *x *= k);
    }

    pub fn check_same_shape(&self, other: &Tensor<F>) -> Result<()> {
        if self.shape != other.shape {
            return Err(KwsError::Shape(format!(
                "shape mismatch: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    pub fn cast<G: Real>(&self) -> Tensor<G> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| G::of(x.as_f64())).collect(),
        }
    }
}

/// `out[j] += Σ_i x[i] * w[i, j]` for a row-major `in × out` matrix.
#[inline]
pub(crate) fn gemv_acc<F: Real>(x: &[F], w: &[F], out: &mut [F]) {
    let n = out.len();
    debug_assert_eq!(w.len(), x.len() * n);
    for (i, &xi) in x.iter().enumerate() {
        if xi == F::zero() {
            continue;
        }
        let row = &w[i * n..(i + 1) * n];
        for (o, &wij) in out.iter_mut().zip(row) {
            *o += xi * wij;
        }
    }
}

/// `dx[i] += Σ_j w[i, j] * dy[j]`.
#[inline]
pub(crate) fn gemv_t_acc<F: Real>(dy: &[F], w: &[F], dx: &mut [F]) {
    let n = dy.len();
    debug_assert_eq!(w.len(), dx.len() * n);
    for (i, d) in dx.iter_mut().enumerate() {
        let row = &w[i * n..(i + 1) * n];
        let mut acc = F::zero();
        for (&wij, &g) in row.iter().zip(dy) {
            acc += wij * g;
        }
        *d += acc;
    }
}

/// `dw[i, j] += x[i] * dy[j]`.
#[inline]
pub(crate) fn outer_acc<F: Real>(x: &[F], dy: &[F], dw: &mut [F]) {
    let n = dy.len();
    for (i, &xi) in x.iter().enumerate() {
        if xi == F::zero() {
            continue;
        }
        let row = &mut dw[i * n..(i + 1) * n];
        for (d, &g) in row.iter_mut().zip(dy) {
            *d += xi * g;
        }
    }
}

#[inline]
pub(crate) fn sigmoid<F: Real>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

/// Numerically stable softmax.
pub fn softmax<F: Real>(logits: &[F]) -> Vec<F> {
    let m = logits
        .iter()
        .copied()
        .fold(F::neg_infinity(), |a, b| if b > a { b } else { a });
    let exps: Vec<F> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s = exps.iter().copied().fold(F::zero(), |a, b| a + b);
    exps.into_iter().map(|e| e / s).collect()
}
