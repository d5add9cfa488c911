//! Least-squares convergence-order fits on log-log axes.

use serde::{Deserialize, Serialize};

/// Straight-line fit of `ln y = intercept + slope * ln x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Fits `ln y` against `ln x`. Returns `None` with fewer than two points, a
/// degenerate abscissa, or any non-positive (or non-finite) value.
pub fn log_log_fit(xs: &[f64], ys: &[f64]) -> Option<LogLogFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let valid = |v: &f64| v.is_finite() && *v > 0.0;
    if !xs.iter().all(valid) || !ys.iter().all(valid) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some(LogLogFit {
        slope,
        intercept: my - slope * mx,
        points: xs.len(),
    })
}
