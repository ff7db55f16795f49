//! Log-log slope fitting of convergence curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricsRow;

/// Values at or below this are treated as converged and skipped.
pub const NOISE_FLOOR: f64 = 1e-12;
pub const MIN_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
    pub points: usize,
}

/// `[T/4, T]`, the default tail window for a run of `T` rounds.
pub fn tail_window(rounds: usize) -> (usize, usize) {
    ((rounds / 4).max(1), rounds)
}

/// Least-squares slope of `log(column)` against `log(t)` for rows with
/// `t` in `window` (inclusive) and a value above [`NOISE_FLOOR`].
pub fn fit_rate(rows: &[MetricsRow], column: &str, window: (usize, usize)) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.t >= window.0.max(1) && r.t <= window.1)
        .filter_map(|r| {
            r.column(column)
                .filter(|v| *v > NOISE_FLOOR && v.is_finite())
                .map(|v| ((r.t as f64).ln(), v.ln()))
        })
        .collect();
    fit_points(&pts)
}

/// Least squares on explicit `(log t, log value)` pairs.
pub fn fit_points(pts: &[(f64, f64)]) -> Result<RateFit> {
    if pts.len() < MIN_POINTS {
        return Err(Error::InsufficientData {
            usable: pts.len(),
            needed: MIN_POINTS,
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData {
            usable: 1,
            needed: MIN_POINTS,
        });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Ok(RateFit {
        slope,
        intercept,
        residual: (sse / n).sqrt(),
        points: pts.len(),
    })
}
