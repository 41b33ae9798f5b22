use serde::Serialize;

use crate::error::{input, Error, Result};

/// Closed-form weighted straight-line fit y = intercept + slope·x.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr_slope: f64,
    pub stderr_intercept: f64,
    pub chi2: f64,
    /// χ²/(n − 2); zero when n = 2.
    pub reduced_chi2: f64,
    /// (y − fit)/σ.
    pub residuals: Vec<f64>,
}

/// Minimizes Σ((y − a − b·x)/σ)².
///
/// Standard errors are scaled by the reduced χ² when there are spare
/// degrees of freedom, so exact data gives zero uncertainty; with exactly
/// two points they are the unscaled σ-propagated values.
pub fn weighted_linear_fit(x: &[f64], y: &[f64], sigma: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n < 2 {
        return Err(input(format!(
            "linear fit needs at least 2 points, got {n}"
        )));
    }
    if y.len() != n || sigma.len() != n {
        return Err(input(format!(
            "length mismatch: x={}, y={}, sigma={}",
            n,
            y.len(),
            sigma.len()
        )));
    }
    if let Some(i) = sigma.iter().position(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(input(format!("sigma[{i}] must be > 0")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(input("non-finite value in linear fit input"));
    }

    let w: Vec<f64> = sigma.iter().map(|s| 1.0 / (s * s)).collect();
    let sw: f64 = w.iter().sum();
    let x_mean = w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() / sw;
    let y_mean = w.iter().zip(y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..n {
        let dx = x[i] - x_mean;
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * (y[i] - y_mean);
    }
    let spread = x.iter().map(|v| (v - x_mean).abs()).fold(0.0, f64::max);
    if !(sxx > 0.0) || spread <= 1e-13 * x_mean.abs() {
        return Err(Error::Singular("all x values are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;

    let residuals: Vec<f64> = (0..n)
        .map(|i| (y[i] - intercept - slope * x[i]) / sigma[i])
        .collect();
    let chi2: f64 = residuals.iter().map(|r| r * r).sum();
    let dof = n - 2;
    let reduced_chi2 = if dof > 0 { chi2 / dof as f64 } else { 0.0 };
    let scale = if dof > 0 { reduced_chi2 } else { 1.0 };

    let var_slope = scale / sxx;
    let var_intercept = scale * (1.0 / sw + x_mean * x_mean / sxx);
    Ok(LinearFit {
        slope,
        intercept,
        stderr_slope: var_slope.sqrt(),
        stderr_intercept: var_intercept.sqrt(),
        chi2,
        reduced_chi2,
        residuals,
    })
}
