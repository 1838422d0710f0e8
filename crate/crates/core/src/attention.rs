//! Reference attention: quadratic softmax attention, multi-head plumbing with
//! a pluggable per-head core, and the explicit-matrix oracle for
//! locality-biased linear attention.

use crate::error::{Error, Result};
use crate::lbla::{cosine_weight, CosineReweight, KernelKind, ROW_SUM_EPS};
use crate::tensor::{dot, matmul, softmax_in_place, Scalar, Tensor};

/// Projection weights of one attention layer.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionParams<T = f64> {
    pub w_q: Tensor<T>,
    pub w_k: Tensor<T>,
    pub w_v: Tensor<T>,
    pub w_o: Tensor<T>,
    pub heads: usize,
}

impl<T: Scalar> AttentionParams<T> {
    pub fn new(
        w_q: Tensor<T>,
        w_k: Tensor<T>,
        w_v: Tensor<T>,
        w_o: Tensor<T>,
        heads: usize,
    ) -> Result<Self> {
        let p = AttentionParams {
            w_q,
            w_k,
            w_v,
            w_o,
            heads,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn d_model(&self) -> usize {
        self.w_q.rows()
    }

    pub fn d_k(&self) -> usize {
        self.d_model() / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.d_model();
        if self.heads == 0 || !d.is_multiple_of(self.heads) {
            return Err(Error::config(format!(
                "model dimension {d} is not divisible by {} heads",
                self.heads
            )));
        }
        for w in [&self.w_q, &self.w_k, &self.w_v, &self.w_o] {
            if w.shape() != (d, d) {
                return Err(Error::shape("attention weights", (d, d), w.shape()));
            }
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> AttentionParams<U> {
        AttentionParams {
            w_q: self.w_q.cast(),
            w_k: self.w_k.cast(),
            w_v: self.w_v.cast(),
            w_o: self.w_o.cast(),
            heads: self.heads,
        }
    }
}

/// Queries, keys and values for one head (or for all heads before slicing).
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedTriple<T = f64> {
    pub q: Tensor<T>,
    pub k: Tensor<T>,
    pub v: Tensor<T>,
}

impl<T: Scalar> ProjectedTriple<T> {
    /// `Q = X W_q`, `K = X W_k`, `V = X W_v`.
    pub fn project(x: &Tensor<T>, p: &AttentionParams<T>) -> Result<Self> {
        Ok(ProjectedTriple {
            q: matmul(x, &p.w_q)?,
            k: matmul(x, &p.w_k)?,
            v: matmul(x, &p.w_v)?,
        })
    }

    /// Columns belonging to head `h` of `heads`.
    pub fn head(&self, h: usize, heads: usize) -> Result<Self> {
        let d_k = self.q.cols() / heads;
        let start = h * d_k;
        Ok(ProjectedTriple {
            q: self.q.column_slice(start, d_k)?,
            k: self.k.column_slice(start, d_k)?,
            v: self.v.column_slice(start, self.v.cols() / heads)?,
        })
    }

    /// Splits into one triple per head.
    pub fn split_heads(&self, heads: usize) -> Result<Vec<Self>> {
        (0..heads).map(|h| self.head(h, heads)).collect()
    }
}

/// A single-head attention mechanism mapping `(q, k, v)` to a `T × d_v`
/// output.
pub trait HeadAttention<T: Scalar> {
    fn attend(&self, q: &Tensor<T>, k: &Tensor<T>, v: &Tensor<T>) -> Result<Tensor<T>>;
}

impl<T, F> HeadAttention<T> for F
where
    T: Scalar,
    F: Fn(&Tensor<T>, &Tensor<T>, &Tensor<T>) -> Result<Tensor<T>>,
{
    fn attend(&self, q: &Tensor<T>, k: &Tensor<T>, v: &Tensor<T>) -> Result<Tensor<T>> {
        self(q, k, v)
    }
}

/// Scaled dot-product softmax attention with scale `1/√d_k`.
#[derive(Clone, Copy, Debug, Default)]
pub struct SoftmaxCore;

impl<T: Scalar> HeadAttention<T> for SoftmaxCore {
    fn attend(&self, q: &Tensor<T>, k: &Tensor<T>, v: &Tensor<T>) -> Result<Tensor<T>> {
        let scale = T::one() / T::from_f64(q.cols() as f64).sqrt();
        softmax_attention(q, k, v, scale)
    }
}

fn check_qkv<T: Scalar>(op: &'static str, q: &Tensor<T>, k: &Tensor<T>, v: &Tensor<T>) -> Result<()> {
    if q.cols() != k.cols() {
        return Err(Error::shape(op, q.shape(), k.shape()));
    }
    if k.rows() != v.rows() {
        return Err(Error::shape(op, k.shape(), v.shape()));
    }
    if q.rows() != k.rows() {
        return Err(Error::shape(op, q.shape(), k.shape()));
    }
    Ok(())
}

/// `softmax(scale · Q Kᵀ) V`.
///
/// Scores are produced one query row at a time, so working memory is O(T)
/// while the arithmetic remains quadratic in T.
pub fn softmax_attention<T: Scalar>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    scale: T,
) -> Result<Tensor<T>> {
    check_qkv("softmax_attention", q, k, v)?;
    let n = k.rows();
    let mut out = Tensor::zeros(q.rows(), v.cols());
    let mut scores = vec![T::zero(); n];
    for i in 0..q.rows() {
        let qi = q.row(i);
        for (j, s) in scores.iter_mut().enumerate() {
            *s = dot(qi, k.row(j)) * scale;
        }
        softmax_in_place(&mut scores);
        let out_row = out.row_mut(i);
        for (j, &p) in scores.iter().enumerate() {
            for (o, &vj) in out_row.iter_mut().zip(v.row(j)) {
                *o = *o + p * vj;
            }
        }
    }
    Ok(out)
}

/// Multi-head attention: project, run `core` per head, concatenate, then
/// apply the output projection.
pub fn multi_head_attention<T: Scalar, C: HeadAttention<T> + ?Sized>(
    x: &Tensor<T>,
    p: &AttentionParams<T>,
    core: &C,
) -> Result<Tensor<T>> {
    p.validate()?;
    if x.cols() != p.d_model() {
        return Err(Error::shape("multi_head_attention", x.shape(), p.w_q.shape()));
    }
    let projected = ProjectedTriple::project(x, p)?;
    let heads = projected
        .split_heads(p.heads)?
        .iter()
        .map(|h| core.attend(&h.q, &h.k, &h.v))
        .collect::<Result<Vec<_>>>()?;
    matmul(&Tensor::concat_columns(&heads)?, &p.w_o)
}

/// The `T × T` locality-biased proximity matrix
/// `P[i][j] = ψ(q_i) · ψ(k_j) · ω(i − j)`, evaluated entry by entry.
///
/// `ω` is taken directly from [`cosine_weight`], not from the factor
/// vectors, so this stays independent of the factored fast path.
pub fn proximity_matrix<T: Scalar>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    kernel: KernelKind,
    reweight: Option<&CosineReweight>,
) -> Result<Tensor<T>> {
    if q.cols() != k.cols() || q.rows() != k.rows() {
        return Err(Error::shape("proximity_matrix", q.shape(), k.shape()));
    }
    let t = q.rows();
    if let Some(rw) = reweight {
        if rw.len() != t {
            return Err(Error::shape("proximity_matrix", q.shape(), (rw.len(), rw.horizon())));
        }
    }
    let phi_q = q.map(|x| kernel.apply_scalar(x));
    let phi_k = k.map(|x| kernel.apply_scalar(x));
    Ok(Tensor::from_fn(t, t, |i, j| {
        let base = dot(phi_q.row(i), phi_k.row(j));
        match reweight {
            Some(rw) => base * T::from_f64(cosine_weight(i, j, rw.horizon())),
            None => base,
        }
    }))
}

/// Row-normalizes a proximity matrix: `A[i][j] = P[i][j] / (Σ_j P[i][j] + eps)`.
pub fn normalize_rows<T: Scalar>(p: &Tensor<T>, eps: T) -> Tensor<T> {
    let mut a = p.clone();
    for i in 0..a.rows() {
        let row = a.row_mut(i);
        let total = row.iter().copied().sum::<T>() + eps;
        for x in row.iter_mut() {
            *x = *x / total;
        }
    }
    a
}

/// The implied attention weights of LBLA without the stabilizing epsilon.
pub fn lbla_attention_weights<T: Scalar>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    kernel: KernelKind,
    reweight: Option<&CosineReweight>,
) -> Result<Tensor<T>> {
    Ok(normalize_rows(&proximity_matrix(q, k, kernel, reweight)?, T::zero()))
}

/// Quadratic reference for locality-biased linear attention: builds the full
/// proximity matrix, normalizes its rows (with the shared epsilon) and
/// multiplies by `v`.
pub fn lbla_oracle<T: Scalar>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    kernel: KernelKind,
    reweight: Option<&CosineReweight>,
) -> Result<Tensor<T>> {
    check_qkv("lbla_oracle", q, k, v)?;
    let p = proximity_matrix(q, k, kernel, reweight)?;
    matmul(&normalize_rows(&p, T::from_f64(ROW_SUM_EPS)), v)
}
