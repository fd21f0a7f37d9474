use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Least-squares line through `(log x, log y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points_used: usize,
}

/// Fits `log y = slope · log x + intercept`. Points with `y ≤ 0` are
/// dropped with a warning; fewer than three survivors is an error.
pub fn fit_exponent(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(Error::InvalidInput(format!("need at least 3 points, got {}", points.len())));
    }
    if points.windows(2).any(|w| !(w[0].0 < w[1].0)) {
        return Err(Error::InvalidInput("x must be strictly increasing".into()));
    }
    if points.iter().any(|&(x, _)| !(x > 0.0)) {
        return Err(Error::InvalidInput("x must be positive".into()));
    }
    let kept: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(x, y)| {
            if y > 0.0 && y.is_finite() {
                true
            } else {
                log::warn!("dropping point ({x}, {y}) from the fit");
                false
            }
        })
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    if kept.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "only {} points with y > 0 remain",
            kept.len()
        )));
    }
    let k = kept.len() as f64;
    let mx = kept.iter().map(|p| p.0).sum::<f64>() / k;
    let my = kept.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = kept.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = kept.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = kept.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy <= 1e-24 {
        1.0
    } else {
        let ss_res: f64 = kept.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(FitResult {
        slope,
        intercept,
        r2,
        points_used: kept.len(),
    })
}
