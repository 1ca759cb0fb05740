//! Rate fits for asymptotic integral estimates.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpikeError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSample {
    /// δ, or (δ1, δ2) for two-spike quantities.
    pub deltas: Vec<f64>,
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFitReport {
    pub name: String,
    pub model: String,
    pub samples: Vec<FitSample>,
    pub fitted_coefficients: Vec<f64>,
    pub residual: f64,
    /// The fitted quantity compared against the prediction.
    pub observed: f64,
    pub predicted: f64,
    /// Relative tolerance, or an absolute window when `window` is set.
    pub tolerance: f64,
    pub window: Option<(f64, f64)>,
    pub pass: bool,
}

impl AsymptoticFitReport {
    /// Verdict |observed − predicted| ≤ tolerance·|predicted|.
    pub fn relative(name: &str, model: &str, samples: Vec<FitSample>, fit: (Vec<f64>, f64), observed: f64, predicted: f64, tolerance: f64) -> Self {
        let pass = observed.is_finite() && (observed - predicted).abs() <= tolerance * predicted.abs();
        Self {
            name: name.into(),
            model: model.into(),
            samples,
            fitted_coefficients: fit.0,
            residual: fit.1,
            observed,
            predicted,
            tolerance,
            window: None,
            pass,
        }
    }

    /// Verdict observed ∈ [lo, hi].
    pub fn windowed(name: &str, model: &str, samples: Vec<FitSample>, fit: (Vec<f64>, f64), observed: f64, predicted: f64, window: (f64, f64)) -> Self {
        let pass = observed >= window.0 && observed <= window.1;
        Self {
            name: name.into(),
            model: model.into(),
            samples,
            fitted_coefficients: fit.0,
            residual: fit.1,
            observed,
            predicted,
            tolerance: 0.0,
            window: Some(window),
            pass,
        }
    }
}

/// Least squares y ≈ X c; returns (c, rms residual).
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(Vec<f64>, f64)> {
    if x.nrows() < x.ncols() {
        return Err(SpikeError::InsufficientData(format!("{} samples for {} coefficients", x.nrows(), x.ncols())));
    }
    let svd = x.clone().svd(true, true);
    let c = svd.solve(y, 1e-14).map_err(|e| SpikeError::InsufficientData(e.to_string()))?;
    let r = y - x * &c;
    Ok((c.iter().cloned().collect(), (r.norm_squared() / y.len() as f64).sqrt()))
}

/// Fits v ≈ a·δ²|ln δ| + b·δ² by regressing v/δ² on |ln δ|; returns ([a, b], rms residual of v/δ²).
pub fn fit_delta2_log(deltas: &[f64], values: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = deltas.len();
    let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { deltas[i].ln().abs() } else { 1.0 });
    let y = DVector::from_fn(n, |i, _| values[i] / (deltas[i] * deltas[i]));
    least_squares(&x, &y)
}

/// Log-log slope of v against δ; returns ([slope, intercept], rms residual).
pub fn loglog_slope(deltas: &[f64], values: &[f64]) -> Result<(Vec<f64>, f64)> {
    if values.iter().any(|v| !(*v > 0.0)) {
        return Err(SpikeError::InsufficientData("log-log fit needs positive values".into()));
    }
    let n = deltas.len();
    let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { deltas[i].ln() } else { 1.0 });
    let y = DVector::from_fn(n, |i, _| values[i].ln());
    least_squares(&x, &y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_two_term_model() {
        let d: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];
        let v: Vec<f64> = d.iter().map(|x| 3.0 * x * x * x.ln().abs() - 2.0 * x * x).collect();
        let (c, r) = fit_delta2_log(&d, &v).unwrap();
        assert!((c[0] - 3.0).abs() < 1e-10 && (c[1] + 2.0).abs() < 1e-9 && r < 1e-9);
    }

    #[test]
    fn slope_of_power_law() {
        let d = [3e-2, 1e-2, 3e-3];
        let v: Vec<f64> = d.iter().map(|x: &f64| 5.0 * x.powf(2.0)).collect();
        let (c, _) = loglog_slope(&d, &v).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-12);
        assert!(loglog_slope(&d, &[1.0, 0.0, 1.0]).is_err());
    }
}
