//! Locality-biased linear attention.
//!
//! Proximity between query `i` and key `j` is
//! `ψ(q_i) · ψ(k_j) · cos(π (i − j) / 2M)`, with `ψ` an elementwise kernel
//! and `M ≥ T` the re-weighting horizon. Splitting the cosine into its two
//! angle-sum terms lets the output be computed as
//!
//! ```text
//! O_i = (Qcos_i · (Kcosᵀ V) + Qsin_i · (Ksinᵀ V)) / (Qcos_i · Σ Kcos + Qsin_i · Σ Ksin + ε)
//! ```
//!
//! which touches each position a constant number of times and only keeps
//! `d_k × d_v` accumulators.

mod backward;
mod forward;
mod kernel;
mod reweight;

pub use backward::{lbla_backward, LblaGradients};
pub use forward::{
    decompose, lbla_forward, lbla_forward_with_stats, ForwardStats, LblaDecomposition,
};
pub use kernel::{apply_kernel, KernelKind};
pub use reweight::{build_reweight, cosine_weight, CosineReweight};

use crate::attention::{lbla_oracle, HeadAttention};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Added to every row normalizer, in both the linear path and the oracle.
pub const ROW_SUM_EPS: f64 = 1e-9;

/// How the re-weighting horizon `M` is chosen for a sequence of length `T`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Horizon {
    /// `M = T`.
    #[default]
    SeqLen,
    /// A fixed `M`; sequences longer than `M` are rejected.
    Fixed(usize),
}

impl Horizon {
    pub fn resolve(self, t: usize) -> Result<usize> {
        match self {
            Horizon::SeqLen => Ok(t),
            Horizon::Fixed(m) if m >= t => Ok(m),
            Horizon::Fixed(m) => Err(Error::config(format!(
                "sequence length {t} exceeds the re-weighting horizon {m}"
            ))),
        }
    }

    pub fn reweight_for(self, t: usize) -> Result<CosineReweight> {
        build_reweight(t, self.resolve(t)?)
    }
}

/// Head-level LBLA computed by the linear-time path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LblaCore {
    pub kernel: KernelKind,
    /// `None` disables the cosine re-weighting.
    pub reweight: Option<Horizon>,
}

impl LblaCore {
    pub fn new(kernel: KernelKind, reweight: Option<Horizon>) -> Self {
        LblaCore { kernel, reweight }
    }

    fn reweight_for(&self, t: usize) -> Result<Option<CosineReweight>> {
        self.reweight.map(|h| h.reweight_for(t)).transpose()
    }
}

impl<T: Scalar> HeadAttention<T> for LblaCore {
    fn attend(&self, q: &Tensor<T>, k: &Tensor<T>, v: &Tensor<T>) -> Result<Tensor<T>> {
        let rw = self.reweight_for(q.rows())?;
        lbla_forward(q, k, v, self.kernel, rw.as_ref())
    }
}

/// The same mechanism as [`LblaCore`], evaluated through the explicit
/// `T × T` oracle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LblaOracleCore(pub LblaCore);

impl<T: Scalar> HeadAttention<T> for LblaOracleCore {
    fn attend(&self, q: &Tensor<T>, k: &Tensor<T>, v: &Tensor<T>) -> Result<Tensor<T>> {
        let rw = self.0.reweight_for(q.rows())?;
        lbla_oracle(q, k, v, self.0.kernel, rw.as_ref())
    }
}

/// Position factors for the (one or two) separable terms of `ω`.
#[derive(Clone, Copy)]
pub(crate) enum Factors<'a> {
    Plain,
    Cosine(&'a CosineReweight),
}

impl<'a> Factors<'a> {
    pub(crate) fn new(rw: Option<&'a CosineReweight>) -> Self {
        rw.map_or(Factors::Plain, Factors::Cosine)
    }

    pub(crate) fn terms(&self) -> usize {
        match self {
            Factors::Plain => 1,
            Factors::Cosine(_) => 2,
        }
    }

    #[inline]
    pub(crate) fn get<T: Scalar>(&self, term: usize, pos: usize) -> T {
        match self {
            Factors::Plain => T::one(),
            Factors::Cosine(rw) if term == 0 => T::from_f64(rw.cos_factors()[pos]),
            Factors::Cosine(rw) => T::from_f64(rw.sin_factors()[pos]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizon_resolution() {
        assert_eq!(Horizon::SeqLen.resolve(17).unwrap(), 17);
        assert_eq!(Horizon::Fixed(20).resolve(17).unwrap(), 20);
        assert!(Horizon::Fixed(16).resolve(17).is_err());
    }
}
