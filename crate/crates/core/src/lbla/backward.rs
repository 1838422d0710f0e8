use super::forward::{check_inputs, summarize_keys};
use super::{CosineReweight, Factors, KernelKind, ROW_SUM_EPS};
use crate::error::{Error, Result};
use crate::tensor::{dot, Tensor};

/// Gradients of `⟨upstream, lbla_forward(q, k, v)⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct LblaGradients {
    pub q: Tensor<f64>,
    pub k: Tensor<f64>,
    pub v: Tensor<f64>,
}

/// Analytic gradient of the linear-time forward pass, in `O(T · d_k · d_v)`.
///
/// With `A = P / (rowsum(P) + ε)` the implied weights, `G` the upstream
/// gradient and `s_i = G_i · O_i`:
///
/// * `∂/∂V = Aᵀ G`
/// * `∂/∂P_ij = (G_i · V_j − s_i) / den_i`
///
/// and `P` is a sum of separable terms, so both contractions reduce to
/// `d_k × d_v` accumulators. The ReLU derivative at 0 is 0.
pub fn lbla_backward(
    q: &Tensor<f64>,
    k: &Tensor<f64>,
    v: &Tensor<f64>,
    kernel: KernelKind,
    rw: Option<&CosineReweight>,
    upstream: &Tensor<f64>,
) -> Result<LblaGradients> {
    check_inputs("lbla_backward", q, k, v, rw)?;
    if upstream.shape() != (q.rows(), v.cols()) {
        return Err(Error::shape("lbla_backward", (q.rows(), v.cols()), upstream.shape()));
    }
    let factors = Factors::new(rw);
    let terms = factors.terms();
    let summary = summarize_keys(k, v, kernel, factors);
    let (t, d_k, d_v) = (q.rows(), q.cols(), v.cols());

    let mut grad_q = Tensor::zeros(t, d_k);
    // m[c] = Σ_i f_c(i) ψ(q_i)ᵀ G_i / den_i,  r[c] = Σ_i f_c(i) (s_i / den_i) ψ(q_i)
    let mut m = vec![Tensor::<f64>::zeros(d_k, d_v); terms];
    let mut r = vec![vec![0.0; d_k]; terms];

    let mut phi = vec![0.0; d_k];
    let mut out = vec![0.0; d_v];
    for i in 0..t {
        for (p, &x) in phi.iter_mut().zip(q.row(i)) {
            *p = kernel.apply_scalar(x);
        }
        out.fill(0.0);
        let mut den = 0.0;
        for term in 0..terms {
            let f: f64 = factors.get(term, i);
            den += f * dot(&phi, &summary.k_sum[term]);
            let kv = summary.kv[term].as_slice();
            for (a, &p) in phi.iter().enumerate() {
                for (o, &x) in out.iter_mut().zip(&kv[a * d_v..(a + 1) * d_v]) {
                    *o += f * p * x;
                }
            }
        }
        if den == 0.0 && kernel == KernelKind::Identity {
            return Err(Error::ZeroDenominator {
                op: "lbla_backward",
                row: i,
            });
        }
        let den = den + ROW_SUM_EPS;
        out.iter_mut().for_each(|o| *o /= den);

        let g = upstream.row(i);
        let s = dot(g, &out);
        let gq = grad_q.row_mut(i);
        for term in 0..terms {
            let f: f64 = factors.get(term, i);
            let kv = summary.kv[term].as_slice();
            let acc = m[term].as_mut_slice();
            for a in 0..d_k {
                let kv_g = dot(&kv[a * d_v..(a + 1) * d_v], g);
                gq[a] += f / den * (kv_g - s * summary.k_sum[term][a]);
                r[term][a] += f * s / den * phi[a];
                let w = f * phi[a] / den;
                for (o, &x) in acc[a * d_v..(a + 1) * d_v].iter_mut().zip(g) {
                    *o += w * x;
                }
            }
        }
        for (gq, &x) in gq.iter_mut().zip(q.row(i)) {
            *gq *= kernel.derivative(x);
        }
    }

    let mut grad_k = Tensor::zeros(t, d_k);
    let mut grad_v = Tensor::zeros(t, d_v);
    for j in 0..t {
        for (p, &x) in phi.iter_mut().zip(k.row(j)) {
            *p = kernel.apply_scalar(x);
        }
        let vj = v.row(j);
        for term in 0..terms {
            let f: f64 = factors.get(term, j);
            let acc = m[term].as_slice();
            let gv = grad_v.row_mut(j);
            for (a, &p) in phi.iter().enumerate() {
                let row = &acc[a * d_v..(a + 1) * d_v];
                for (o, &x) in gv.iter_mut().zip(row) {
                    *o += f * p * x;
                }
            }
            let gk = grad_k.row_mut(j);
            for a in 0..d_k {
                gk[a] += f * (dot(&acc[a * d_v..(a + 1) * d_v], vj) - r[term][a]);
            }
        }
        for (gk, &x) in grad_k.row_mut(j).iter_mut().zip(k.row(j)) {
            *gk *= kernel.derivative(x);
        }
    }

    Ok(LblaGradients {
        q: grad_q,
        k: grad_k,
        v: grad_v,
    })
}
