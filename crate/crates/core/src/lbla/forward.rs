use super::{CosineReweight, Factors, KernelKind, ROW_SUM_EPS};
use crate::error::{Error, Result};
use crate::tensor::{dot, Scalar, Tensor};

/// Diagnostics from one linear-attention forward pass.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ForwardStats {
    /// Rows whose normalizer was exactly zero before adding the epsilon.
    pub zero_denominators: usize,
}

/// Kernelized queries and keys scaled by their position factors.
#[derive(Clone, Debug, PartialEq)]
pub struct LblaDecomposition<T = f64> {
    pub q_cos: Tensor<T>,
    pub q_sin: Tensor<T>,
    pub k_cos: Tensor<T>,
    pub k_sin: Tensor<T>,
}

/// Materializes the four position-scaled feature matrices.
///
/// The forward pass never builds these; they exist for inspection and
/// testing of the factorization.
pub fn decompose<T: Scalar>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    kernel: KernelKind,
    rw: &CosineReweight,
) -> Result<LblaDecomposition<T>> {
    if q.shape() != k.shape() {
        return Err(Error::shape("decompose", q.shape(), k.shape()));
    }
    if rw.len() != q.rows() {
        return Err(Error::shape("decompose", q.shape(), (rw.len(), rw.horizon())));
    }
    let scaled = |x: &Tensor<T>, factors: &[f64]| {
        Tensor::from_fn(x.rows(), x.cols(), |i, c| {
            kernel.apply_scalar(x[(i, c)]) * T::from_f64(factors[i])
        })
    };
    Ok(LblaDecomposition {
        q_cos: scaled(q, rw.cos_factors()),
        q_sin: scaled(q, rw.sin_factors()),
        k_cos: scaled(k, rw.cos_factors()),
        k_sin: scaled(k, rw.sin_factors()),
    })
}

pub(super) fn check_inputs<T: Scalar>(
    op: &'static str,
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    rw: Option<&CosineReweight>,
) -> Result<()> {
    if q.cols() != k.cols() || q.rows() != k.rows() {
        return Err(Error::shape(op, q.shape(), k.shape()));
    }
    if k.rows() != v.rows() {
        return Err(Error::shape(op, k.shape(), v.shape()));
    }
    if let Some(rw) = rw {
        if rw.len() != q.rows() {
            return Err(Error::shape(op, q.shape(), (rw.len(), rw.horizon())));
        }
    }
    Ok(())
}

/// Per-term key/value summaries: `Σ_j f(j) ψ(k_j)ᵀ v_j` (`d_k × d_v`) and
/// `Σ_j f(j) ψ(k_j)` (`d_k`), accumulated in ascending `j`.
pub(super) struct KeySummary<T> {
    pub kv: Vec<Tensor<T>>,
    pub k_sum: Vec<Vec<T>>,
}

pub(super) fn summarize_keys<T: Scalar>(
    k: &Tensor<T>,
    v: &Tensor<T>,
    kernel: KernelKind,
    factors: Factors<'_>,
) -> KeySummary<T> {
    let (d_k, d_v) = (k.cols(), v.cols());
    let terms = factors.terms();
    let mut kv = vec![Tensor::zeros(d_k, d_v); terms];
    let mut k_sum = vec![vec![T::zero(); d_k]; terms];
    let mut phi = vec![T::zero(); d_k];
    for j in 0..k.rows() {
        for (p, &x) in phi.iter_mut().zip(k.row(j)) {
            *p = kernel.apply_scalar(x);
        }
        let vj = v.row(j);
        for term in 0..terms {
            let f: T = factors.get(term, j);
            let acc = kv[term].as_mut_slice();
            for (a, &p) in phi.iter().enumerate() {
                let w = f * p;
                k_sum[term][a] = k_sum[term][a] + w;
                for (o, &x) in acc[a * d_v..(a + 1) * d_v].iter_mut().zip(vj) {
                    *o = *o + w * x;
                }
            }
        }
    }
    KeySummary { kv, k_sum }
}

/// Linear-time locality-biased linear attention.
///
/// With `rw = None` this is plain kernelized linear attention. Cost is
/// `O(T · d_k · d_v)`; besides the output only `O(d_k · d_v)` scratch is
/// allocated.
pub fn lbla_forward<T: Scalar>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    kernel: KernelKind,
    rw: Option<&CosineReweight>,
) -> Result<Tensor<T>> {
    lbla_forward_with_stats(q, k, v, kernel, rw).map(|(out, _)| out)
}

pub fn lbla_forward_with_stats<T: Scalar>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    kernel: KernelKind,
    rw: Option<&CosineReweight>,
) -> Result<(Tensor<T>, ForwardStats)> {
    check_inputs("lbla_forward", q, k, v, rw)?;
    let factors = Factors::new(rw);
    let summary = summarize_keys(k, v, kernel, factors);

    let (d_k, d_v) = (q.cols(), v.cols());
    let eps = T::from_f64(ROW_SUM_EPS);
    let mut stats = ForwardStats::default();
    let mut out = Tensor::zeros(q.rows(), d_v);
    let mut phi = vec![T::zero(); d_k];
    for i in 0..q.rows() {
        for (p, &x) in phi.iter_mut().zip(q.row(i)) {
            *p = kernel.apply_scalar(x);
        }
        let out_row = out.row_mut(i);
        let mut den = T::zero();
        for term in 0..factors.terms() {
            let f: T = factors.get(term, i);
            den = den + f * dot(&phi, &summary.k_sum[term]);
            let kv = summary.kv[term].as_slice();
            for (a, &p) in phi.iter().enumerate() {
                let w = f * p;
                for (o, &x) in out_row.iter_mut().zip(&kv[a * d_v..(a + 1) * d_v]) {
                    *o = *o + w * x;
                }
            }
        }
        if den == T::zero() {
            stats.zero_denominators += 1;
        }
        let den = den + eps;
        for o in out_row.iter_mut() {
            *o = *o / den;
        }
    }
    Ok((out, stats))
}
