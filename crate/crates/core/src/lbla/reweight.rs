use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

/// `cos(π (i − j) / 2m)`: 1 on the diagonal, 0 at distance `m`.
pub fn cosine_weight(i: usize, j: usize, m: usize) -> f64 {
    let dist = i as f64 - j as f64;
    (FRAC_PI_2 * dist / m as f64).cos()
}

/// Locality weights `ω(i − j)` in factored form.
///
/// By the angle-difference identity,
/// `cos(a_i − a_j) = cos a_i · cos a_j + sin a_i · sin a_j` with
/// `a_i = π i / 2m`, so the weight matrix is the sum of two rank-one terms
/// and can be folded into queries and keys row by row.
#[derive(Clone, Debug, PartialEq)]
pub struct CosineReweight {
    horizon: usize,
    cos_factors: Vec<f64>,
    sin_factors: Vec<f64>,
}

impl CosineReweight {
    pub fn len(&self) -> usize {
        self.cos_factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cos_factors.is_empty()
    }

    /// The distance `m` at which the weight reaches zero.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn cos_factors(&self) -> &[f64] {
        &self.cos_factors
    }

    pub fn sin_factors(&self) -> &[f64] {
        &self.sin_factors
    }

    /// `ω(i − j)` rebuilt from the two factor vectors.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.cos_factors[i] * self.cos_factors[j] + self.sin_factors[i] * self.sin_factors[j]
    }
}

/// Factor vectors for a sequence of `t` positions with horizon `m ≥ t`.
pub fn build_reweight(t: usize, m: usize) -> Result<CosineReweight> {
    if t == 0 {
        return Err(Error::config("re-weighting needs at least one position"));
    }
    if m < t {
        return Err(Error::config(format!(
            "re-weighting horizon {m} is shorter than the sequence length {t}"
        )));
    }
    let (cos_factors, sin_factors) = (0..t)
        .map(|i| {
            let angle = FRAC_PI_2 * i as f64 / m as f64;
            (angle.cos(), angle.sin())
        })
        .unzip();
    Ok(CosineReweight {
        horizon: m,
        cos_factors,
        sin_factors,
    })
}
