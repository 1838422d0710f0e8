use crate::bench::BenchRecord;
use crate::error::{BenchError, Result};

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_slope_points(points: &[(f64, f64)]) -> Result<f64> {
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < 3 {
        return Err(BenchError::TooFewPoints(xs.len()));
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(x, y) in &logs {
        sxy += (x - mean_x) * (y - mean_y);
        sxx += (x - mean_x) * (x - mean_x);
    }
    Ok(sxy / sxx)
}

/// Scaling exponent of `median_ns` in `T` for records of a single kind.
pub fn fit_slope(records: &[BenchRecord]) -> Result<f64> {
    if let Some(first) = records.first() {
        if let Some(other) = records.iter().find(|r| r.attn_kind != first.attn_kind) {
            return Err(BenchError::MixedKinds {
                first: format!("{:?}", first.attn_kind),
                other: format!("{:?}", other.attn_kind),
            });
        }
    }
    let points: Vec<(f64, f64)> = records
        .iter()
        .map(|r| (r.t as f64, r.median_ns as f64))
        .collect();
    fit_slope_points(&points)
}
