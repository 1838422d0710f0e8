//! Dense row-major matrices and the handful of operations the attention and
//! Conformer code needs.
//!
//! Rows are time steps, columns are features. Everything on the correctness
//! path runs in `f64`; the `f32` instantiation exists for benchmarking.

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::Float;

use crate::error::{Error, Result, Shape};

/// Floating-point element type of a [`Tensor`].
pub trait Scalar: Float + Sum + Default + Debug + Send + Sync + 'static {
    fn from_f64(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

/// A `rows × cols` matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T = f64> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

/// A `T × d` activation matrix in 64-bit precision.
pub type SequenceTensor = Tensor<f64>;

impl<T: Scalar> Tensor<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "tensor dimensions must be positive");
        Tensor {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(n, n);
        for i in 0..n {
            t[(i, i)] = T::one();
        }
        t
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        let mut t = Self::zeros(rows, cols);
        t.data.fill(value);
        t
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::config(format!(
                "tensor dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::shape("from_vec", (rows, cols), (data.len(), 1)));
        }
        Ok(Tensor { rows, cols, data })
    }

    /// Builds a tensor from nested rows. Panics on ragged or empty input;
    /// intended for literals in tests and examples.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Self {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Self::from_vec(rows.len(), cols, data).expect("non-empty rows")
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut t = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                t.data[i * cols + j] = f(i, j);
            }
        }
        t
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> Shape {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, op: &'static str, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::shape(op, self.shape(), other.shape()));
        }
        Ok(Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "mul", |a, b| a * b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|x| x * s)
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &Self, s: T) -> Result<Self> {
        self.zip_map(other, "add_scaled", |a, b| a + s * b)
    }

    /// Adds `bias` to every row.
    pub fn add_row_vector(&self, bias: &[T]) -> Result<Self> {
        if bias.len() != self.cols {
            return Err(Error::shape("add_row_vector", self.shape(), (1, bias.len())));
        }
        let mut out = self.clone();
        for row in out.data.chunks_exact_mut(self.cols) {
            for (x, &b) in row.iter_mut().zip(bias) {
                *x = *x + b;
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Columns `[start, start + width)` as a new tensor.
    pub fn column_slice(&self, start: usize, width: usize) -> Result<Self> {
        if width == 0 || start + width > self.cols {
            return Err(Error::shape(
                "column_slice",
                self.shape(),
                (start, start + width),
            ));
        }
        let mut out = Self::zeros(self.rows, width);
        for i in 0..self.rows {
            out.row_mut(i)
                .copy_from_slice(&self.row(i)[start..start + width]);
        }
        Ok(out)
    }

    /// Concatenates tensors with equal row counts side by side.
    pub fn concat_columns(parts: &[Self]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::config("concat_columns needs at least one part"))?;
        let rows = first.rows;
        let mut cols = 0;
        for p in parts {
            if p.rows != rows {
                return Err(Error::shape("concat_columns", first.shape(), p.shape()));
            }
            cols += p.cols;
        }
        let mut out = Self::zeros(rows, cols);
        for i in 0..rows {
            let dst = out.row_mut(i);
            let mut offset = 0;
            for p in parts {
                dst[offset..offset + p.cols].copy_from_slice(p.row(i));
                offset += p.cols;
            }
        }
        Ok(out)
    }

    /// Rows taken in the order given by `order` (`out[i] = self[order[i]]`).
    pub fn permute_rows(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.rows {
            return Err(Error::shape("permute_rows", self.shape(), (order.len(), 1)));
        }
        let mut out = Self::zeros(self.rows, self.cols);
        for (i, &src) in order.iter().enumerate() {
            if src >= self.rows {
                return Err(Error::config(format!("permutation index {src} out of range")));
            }
            out.row_mut(i).copy_from_slice(self.row(src));
        }
        Ok(out)
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        if self.shape() != other.shape() {
            return Err(Error::shape("max_abs_diff", self.shape(), other.shape()));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs())))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| U::from_f64(x.as_f64())).collect(),
        }
    }
}

impl<T> std::ops::Index<(usize, usize)> for Tensor<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Tensor<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Norm-wise relative error `‖a − b‖∞ / ‖b‖∞`, falling back to the absolute
/// error when `b` is identically zero.
pub fn relative_error(a: &Tensor<f64>, reference: &Tensor<f64>) -> Result<f64> {
    let diff = a.max_abs_diff(reference)?;
    let scale = reference.max_abs();
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

/// Matrix product `a · b`.
pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.cols != b.rows {
        return Err(Error::shape("matmul", a.shape(), b.shape()));
    }
    let mut out = Tensor::zeros(a.rows, b.cols);
    // i-k-j order keeps the inner loop on contiguous rows of `b` and `out`.
    for i in 0..a.rows {
        let a_row = a.row(i);
        let out_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for (k, &aik) in a_row.iter().enumerate() {
            if aik == T::zero() {
                continue;
            }
            let b_row = &b.data[k * b.cols..(k + 1) * b.cols];
            for (o, &bkj) in out_row.iter_mut().zip(b_row) {
                *o = *o + aik * bkj;
            }
        }
    }
    Ok(out)
}

/// `aᵀ · b` without materializing the transpose.
pub fn matmul_transpose_a<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.rows != b.rows {
        return Err(Error::shape("matmul_transpose_a", a.shape(), b.shape()));
    }
    let mut out = Tensor::zeros(a.cols, b.cols);
    for r in 0..a.rows {
        let a_row = a.row(r);
        let b_row = b.row(r);
        for (i, &ari) in a_row.iter().enumerate() {
            let out_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for (o, &brj) in out_row.iter_mut().zip(b_row) {
                *o = *o + ari * brj;
            }
        }
    }
    Ok(out)
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// In-place numerically stable softmax of one row.
pub fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
    let mut total = T::zero();
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        total = total + *x;
    }
    for x in row.iter_mut() {
        *x = *x / total;
    }
}

/// Row-wise softmax with per-row max subtraction.
pub fn softmax_rows<T: Scalar>(m: &Tensor<T>) -> Tensor<T> {
    let mut out = m.clone();
    for row in out.data.chunks_exact_mut(m.cols) {
        softmax_in_place(row);
    }
    out
}

/// Per-row layer normalization followed by the affine map `γ ⊙ x̂ + β`.
pub fn layernorm<T: Scalar>(x: &Tensor<T>, gamma: &[T], beta: &[T], eps: T) -> Result<Tensor<T>> {
    if gamma.len() != x.cols || beta.len() != x.cols {
        return Err(Error::shape(
            "layernorm",
            x.shape(),
            (gamma.len(), beta.len()),
        ));
    }
    if eps.is_nan() || eps <= T::zero() {
        return Err(Error::config("layernorm eps must be positive"));
    }
    let n = T::from_f64(x.cols as f64);
    let mut out = x.clone();
    for row in out.data.chunks_exact_mut(x.cols) {
        let mean = row.iter().copied().sum::<T>() / n;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
        let inv = T::one() / (var + eps).sqrt();
        for ((v, &g), &b) in row.iter_mut().zip(gamma).zip(beta) {
            *v = (*v - mean) * inv * g + b;
        }
    }
    Ok(out)
}

/// Depthwise 1-D convolution along time with same-length output.
///
/// `kernels` is `channels × kernel_size`; row `c` is applied to column `c`
/// of `x` as a cross-correlation with `(kernel_size − 1) / 2` zeros of
/// padding on each side.
pub fn depthwise_conv1d<T: Scalar>(
    x: &Tensor<T>,
    kernels: &Tensor<T>,
    kernel_size: usize,
) -> Result<Tensor<T>> {
    if kernel_size.is_multiple_of(2) {
        return Err(Error::config(format!(
            "depthwise kernel size must be odd, got {kernel_size}"
        )));
    }
    if kernels.shape() != (x.cols, kernel_size) {
        return Err(Error::shape("depthwise_conv1d", x.shape(), kernels.shape()));
    }
    let pad = (kernel_size - 1) / 2;
    let len = x.rows as isize;
    let mut out = Tensor::zeros(x.rows, x.cols);
    for t in 0..x.rows {
        let out_row = &mut out.data[t * x.cols..(t + 1) * x.cols];
        for k in 0..kernel_size {
            let src = t as isize + k as isize - pad as isize;
            if src < 0 || src >= len {
                continue;
            }
            let x_row = x.row(src as usize);
            for c in 0..x.cols {
                out_row[c] = out_row[c] + kernels.data[c * kernel_size + k] * x_row[c];
            }
        }
    }
    Ok(out)
}

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    // Split on sign so exp never sees a large positive argument.
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

#[inline]
pub fn swish<T: Scalar>(x: T) -> T {
    x * sigmoid(x)
}
