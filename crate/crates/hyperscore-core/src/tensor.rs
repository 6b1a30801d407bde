//! Dense row-major tensor plus the handful of linear-algebra kernels the
//! model needs. Weight matrices are stored `[in, out]` so that a forward
//! pass computes `y_j = sum_i x_i * w[i, j] + b_j`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![T::zero(); len],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::Dimension {
                context: "tensor payload",
                expected: len,
                got: data.len(),
            });
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

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Rows of a rank-2 tensor.
    pub fn rows(&self) -> usize {
        debug_assert_eq!(self.shape.len(), 2);
        self.shape[0]
    }

    /// Columns of a rank-2 tensor.
    pub fn cols(&self) -> usize {
        debug_assert_eq!(self.shape.len(), 2);
        self.shape[1]
    }

    #[inline]
    pub fn at2(&self, r: usize, c: usize) -> T {
        debug_assert_eq!(self.shape.len(), 2);
        self.data[r * self.shape[1] + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        debug_assert_eq!(self.shape.len(), 2);
        let w = self.shape[1];
        &self.data[r * w..(r + 1) * w]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        debug_assert_eq!(self.shape.len(), 2);
        let w = self.shape[1];
        &mut self.data[r * w..(r + 1) * w]
    }

    pub fn fill_gaussian(&mut self, rng: &CounterRng, std: f64) {
        for (i, v) in self.data.iter_mut().enumerate() {
            *v = T::from_f64(rng.gaussian(i as u64) * std);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| U::from_f64(v.to_f64())).collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.shape)
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b) {
        acc = acc + *x * *y;
    }
    acc
}

pub fn norm2<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// `y += alpha * x`.
pub fn axpy<T: Scalar>(y: &mut [T], alpha: T, x: &[T]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * *xi;
    }
}

/// Forward through a `[in, out]` weight: returns `x * W` of length `out`.
pub fn mat_vec<T: Scalar>(w: &Tensor<T>, x: &[T]) -> Vec<T> {
    debug_assert_eq!(w.rows(), x.len());
    let (rows, cols) = (w.rows(), w.cols());
    let mut y = vec![T::zero(); cols];
    for i in 0..rows {
        let xi = x[i];
        if xi == T::zero() {
            continue;
        }
        let row = w.row(i);
        for j in 0..cols {
            y[j] = y[j] + xi * row[j];
        }
    }
    y
}

/// Backward through a `[in, out]` weight: returns `W * g` of length `in`.
pub fn mat_vec_t<T: Scalar>(w: &Tensor<T>, g: &[T]) -> Vec<T> {
    debug_assert_eq!(w.cols(), g.len());
    let rows = w.rows();
    let mut y = vec![T::zero(); rows];
    for i in 0..rows {
        y[i] = dot(w.row(i), g);
    }
    y
}

/// Accumulate the outer product: `gw[i, j] += x[i] * g[j]`.
pub fn outer_add<T: Scalar>(gw: &mut Tensor<T>, x: &[T], g: &[T]) {
    debug_assert_eq!(gw.rows(), x.len());
    debug_assert_eq!(gw.cols(), g.len());
    let cols = gw.cols();
    for (i, &xi) in x.iter().enumerate() {
        if xi == T::zero() {
            continue;
        }
        let row = &mut gw.data_mut()[i * cols..(i + 1) * cols];
        for (rj, &gj) in row.iter_mut().zip(g) {
            *rj = *rj + xi * gj;
        }
    }
}

/// `a * b^T` for row-major `a: [m, d]` and `b: [n, d]`, yielding `[m, n]`.
pub fn matmul_nt<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.cols() != b.cols() {
        return Err(Error::Dimension {
            context: "matmul_nt inner dimension",
            expected: a.cols(),
            got: b.cols(),
        });
    }
    let (m, n) = (a.rows(), b.rows());
    let mut out = Tensor::zeros(&[m, n]);
    for i in 0..m {
        let ai = a.row(i);
        let row = out.row_mut(i);
        for j in 0..n {
            row[j] = dot(ai, b.row(j));
        }
    }
    Ok(out)
}
