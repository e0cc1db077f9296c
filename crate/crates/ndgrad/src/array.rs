//! Dense row-major f64 arrays and the handful of raw kernels the tape builds on.

use serde::{Deserialize, Serialize};

use crate::NdError;

/// Dense array of f64 in row-major order. `data.len()` always equals the
/// product of `shape`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Array {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Array {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Array { shape: shape.to_vec(), data: vec![0.0; n] }
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Array { shape: shape.to_vec(), data: vec![value; n] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self, NdError> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(NdError::BadConstruction { shape: shape.to_vec(), len: data.len() });
        }
        Ok(Array { shape: shape.to_vec(), data })
    }

    pub fn scalar(x: f64) -> Self {
        Array { shape: vec![], data: vec![x] }
    }

    pub fn vector(xs: &[f64]) -> Self {
        Array { shape: vec![xs.len()], data: xs.to_vec() }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NdError> {
        Self::from_vec(&[rows, cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.shape.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Scalar value; panics on non-scalar arrays (internal misuse, not input error).
    pub fn item(&self) -> f64 {
        assert!(self.data.len() == 1, "item() on array of shape {:?}", self.shape);
        self.data[0]
    }

    /// Rows of a 2-D array (or length of a 1-D array).
    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    /// Columns of a 2-D array.
    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    pub fn at2(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    pub fn set2(&mut self, r: usize, c: usize, v: f64) {
        let cols = self.cols();
        self.data[r * cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Array {
        Array { shape: self.shape.clone(), data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn reshaped(&self, shape: &[usize]) -> Result<Array, NdError> {
        Array::from_vec(shape, self.data.clone())
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// c += s * a, elementwise over equal-length buffers.
pub fn axpy(c: &mut [f64], s: f64, a: &[f64]) {
    debug_assert_eq!(c.len(), a.len());
    for (ci, ai) in c.iter_mut().zip(a) {
        *ci += s * ai;
    }
}

/// a[m,k] * b[k,n] -> [m,n]
pub fn matmul(a: &Array, b: &Array) -> Array {
    let (m, k) = (a.rows(), a.cols());
    let n = b.cols();
    debug_assert_eq!(k, b.rows());
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let arow = &a.data[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (l, &av) in arow.iter().enumerate() {
            if av != 0.0 {
                axpy(orow, av, &b.data[l * n..(l + 1) * n]);
            }
        }
    }
    Array { shape: vec![m, n], data: out }
}

/// a[m,n] * b[k,n]^T -> [m,k]
pub fn matmul_nt(a: &Array, b: &Array) -> Array {
    let (m, n) = (a.rows(), a.cols());
    let k = b.rows();
    debug_assert_eq!(n, b.cols());
    let mut out = vec![0.0; m * k];
    for i in 0..m {
        let arow = &a.data[i * n..(i + 1) * n];
        for l in 0..k {
            let brow = &b.data[l * n..(l + 1) * n];
            out[i * k + l] = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
        }
    }
    Array { shape: vec![m, k], data: out }
}

/// a[m,k]^T * b[m,n] -> [k,n]
pub fn matmul_tn(a: &Array, b: &Array) -> Array {
    let (m, k) = (a.rows(), a.cols());
    let n = b.cols();
    debug_assert_eq!(m, b.rows());
    let mut out = vec![0.0; k * n];
    for i in 0..m {
        let arow = &a.data[i * k..(i + 1) * k];
        let brow = &b.data[i * n..(i + 1) * n];
        for (l, &av) in arow.iter().enumerate() {
            if av != 0.0 {
                axpy(&mut out[l * n..(l + 1) * n], av, brow);
            }
        }
    }
    Array { shape: vec![k, n], data: out }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    // ln(1 + e^x), stable for large |x|
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}
