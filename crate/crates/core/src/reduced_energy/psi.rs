//! The reduced functional Ψ_λ(d, ξ) = Σ e^{-2d_i/λ_i}(8√2·A²τ(ξ_i) − 4ω3·d_i)/μ_i.
//!
//! For small λ the factor e^{-2d/λ} underflows, so values are also available as a
//! mantissa times e^{scale}.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::constants::{A, C4, OMEGA3};
use crate::error::{Result, SpikeError};
use crate::geometry::Point4;
use crate::green_robin::RobinEvaluator;

/// Coefficient of τ(ξ)δ²/μ in the second-order energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondOrder {
    /// (c4³/2)·A² = 8√2·A², as printed in the expansion.
    #[default]
    Printed,
    /// A²/2, from ∫U³ = δA applied to both factors of the cross term.
    BubbleMass,
}

impl SecondOrder {
    pub fn coefficient(&self) -> f64 {
        match self {
            SecondOrder::Printed => 0.5 * C4.powi(3) * A * A,
            SecondOrder::BubbleMass => 0.5 * A * A,
        }
    }
}

/// Coefficient of d·e^{-2d/λ}/μ: 4ω3 = (c4²/2)·ω3.
pub fn d_coefficient() -> f64 {
    0.5 * C4 * C4 * OMEGA3
}

/// λ/2 + (2√2A²/ω3)·τ, the stationary d of one summand.
pub fn critical_d(lambda: f64, tau: f64) -> f64 {
    critical_d_with(SecondOrder::Printed, lambda, tau)
}

pub fn critical_d_with(coef: SecondOrder, lambda: f64, tau: f64) -> f64 {
    0.5 * lambda + coef.coefficient() / d_coefficient() * tau
}

/// The λ→0 limit (c4/ω3)·A²·τ of the concentration rate.
pub fn concentration_rate(tau: f64) -> f64 {
    C4 / OMEGA3 * A * A * tau
}

/// value = mantissa · e^{scale}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledValue {
    pub scale: f64,
    pub mantissa: f64,
}

impl ScaledValue {
    pub fn new(scale: f64, mantissa: f64) -> Self {
        Self { scale, mantissa }
    }

    /// Sum of c_k·e^{s_k}, referenced to the largest exponent.
    pub fn sum(terms: &[(f64, f64)]) -> Self {
        let scale = terms.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
        if !scale.is_finite() {
            return Self { scale: 0.0, mantissa: 0.0 };
        }
        let mantissa = terms.iter().map(|(s, c)| c * (s - scale).exp()).sum();
        Self { scale, mantissa }
    }

    /// The plain value; may underflow to zero or overflow.
    pub fn value(&self) -> f64 {
        self.mantissa * self.scale.exp()
    }

    /// Sign, then log magnitude; exact for values far outside the f64 range.
    pub fn compare(&self, other: &Self) -> Ordering {
        let sa = self.mantissa.signum() * (self.mantissa != 0.0) as i32 as f64;
        let sb = other.mantissa.signum() * (other.mantissa != 0.0) as i32 as f64;
        if sa != sb {
            return sa.total_cmp(&sb);
        }
        if sa == 0.0 {
            return Ordering::Equal;
        }
        let la = self.scale + self.mantissa.abs().ln();
        let lb = other.scale + other.mantissa.abs().ln();
        if sa > 0.0 {
            la.total_cmp(&lb)
        } else {
            lb.total_cmp(&la)
        }
    }
}

/// One summand e^{-2d/λ}(kτ − bd)/μ as (exponent, coefficient).
pub fn summand(coef: SecondOrder, lambda: f64, mu: f64, d: f64, tau: f64) -> (f64, f64) {
    (-2.0 * d / lambda, (coef.coefficient() * tau - d_coefficient() * d) / mu)
}

fn check_inputs(lambdas: &[f64], d: &[f64], xis: &[Point4], mus: &[f64]) -> Result<()> {
    let m = lambdas.len();
    if d.len() != m || xis.len() != m || mus.len() != m {
        return Err(SpikeError::Precondition("psi arguments have mismatched lengths".into()));
    }
    if let Some(v) = d.iter().find(|v| !(**v >= 0.0)) {
        return Err(SpikeError::Precondition(format!("d must be nonnegative, got {v}")));
    }
    if let Some(v) = lambdas.iter().find(|v| !(**v > 0.0)) {
        return Err(SpikeError::Precondition(format!("lambda must be positive, got {v}")));
    }
    if let Some(v) = mus.iter().find(|v| !(**v > 0.0)) {
        return Err(SpikeError::Precondition(format!("mu must be positive, got {v}")));
    }
    Ok(())
}

/// Ψ_λ(d, ξ) in scaled form.
pub fn psi_scaled(lambdas: &[f64], d: &[f64], xis: &[Point4], mus: &[f64], ev: &RobinEvaluator) -> Result<ScaledValue> {
    check_inputs(lambdas, d, xis, mus)?;
    let mut terms = Vec::with_capacity(d.len());
    for i in 0..d.len() {
        let tau = ev.robin(&xis[i])?;
        terms.push(summand(SecondOrder::Printed, lambdas[i], mus[i], d[i], tau));
    }
    Ok(ScaledValue::sum(&terms))
}

pub fn psi(lambdas: &[f64], d: &[f64], xis: &[Point4], mus: &[f64], ev: &RobinEvaluator) -> Result<f64> {
    Ok(psi_scaled(lambdas, d, xis, mus, ev)?.value())
}

/// ∇Ψ ordered as (∂d_1..∂d_m, ∂ξ_1 (4 entries), .., ∂ξ_m), all sharing one scale.
/// The d-derivatives are analytic; the ξ-derivatives use ∇τ by differences.
pub fn psi_grad_scaled(lambdas: &[f64], d: &[f64], xis: &[Point4], mus: &[f64], ev: &RobinEvaluator) -> Result<(f64, Vec<f64>)> {
    check_inputs(lambdas, d, xis, mus)?;
    let m = d.len();
    let k = SecondOrder::Printed.coefficient();
    let b = d_coefficient();
    let exps: Vec<f64> = (0..m).map(|i| -2.0 * d[i] / lambdas[i]).collect();
    let scale = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut g = vec![0.0; 5 * m];
    for i in 0..m {
        let tau = ev.robin(&xis[i])?;
        let grad = ev.robin_grad(&xis[i])?;
        let e = (exps[i] - scale).exp() / mus[i];
        g[i] = e * (-2.0 / lambdas[i] * (k * tau - b * d[i]) - b);
        for c in 0..4 {
            g[m + 4 * i + c] = e * k * grad[c];
        }
    }
    Ok((scale, g))
}

pub fn psi_grad(lambdas: &[f64], d: &[f64], xis: &[Point4], mus: &[f64], ev: &RobinEvaluator) -> Result<Vec<f64>> {
    let (scale, g) = psi_grad_scaled(lambdas, d, xis, mus, ev)?;
    let f = scale.exp();
    Ok(g.into_iter().map(|v| v * f).collect())
}
