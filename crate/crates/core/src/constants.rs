//! Universal constants of the four-dimensional critical problem.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpikeError};
use crate::quadrature::adaptive::{integrate_to_infinity, Estimate, Tolerance};

/// Bubble normalization 2√2.
pub const C4: f64 = 2.0 * SQRT_2;
/// |S³| = 2π².
pub const OMEGA3: f64 = 2.0 * PI * PI;
/// Newtonian kernel constant 1/(2|S³|) = 1/(4π²).
pub const ALPHA4: f64 = 1.0 / (4.0 * PI * PI);
/// A = ∫_{R⁴} U_{1,0}³ = c4/α4 = 8√2π².
pub const A: f64 = C4 / ALPHA4;

/// ∫_{R⁴} (1+|y|²)^{-p} = |S³| / (2(p-1)(p-2)).
pub fn radial_integral(p: f64) -> Result<f64> {
    if !(p > 2.0) || !p.is_finite() {
        return Err(SpikeError::Domain(format!(
            "radial integral of (1+|y|^2)^(-p) diverges for p = {p}"
        )));
    }
    Ok(OMEGA3 / (2.0 * (p - 1.0) * (p - 2.0)))
}

/// The same integral by adaptive radial quadrature.
pub fn radial_integral_quadrature(p: f64) -> Result<Estimate> {
    radial_integral(p)?;
    let e = integrate_to_infinity(
        |t| t.powi(3) * (1.0 + t * t).powf(-p),
        0.0,
        Tolerance { abs: 1e-16, rel: 1e-13, max_intervals: 4000 },
    );
    Ok(e * OMEGA3)
}

/// ∫ U_{1,0}³ over R⁴, as c4/α4.
pub fn bubble_cube_mass() -> f64 {
    C4 / ALPHA4
}

/// Normalization integrals σ_jk = ∫ U² ψ^j ψ^k for the unit bubble.
///
/// Diagonal entries share the value 32π²/15; the off-diagonal ones vanish by parity.
pub fn sigma_entry(j: usize, k: usize) -> f64 {
    assert!(j < 5 && k < 5, "sigma indices run over 0..=4");
    if j == k {
        32.0 * PI * PI / 15.0
    } else {
        0.0
    }
}

/// J₁ by its power series; accurate for |x| ≲ 10.
pub fn bessel_j1(x: f64) -> f64 {
    let h = 0.5 * x;
    let mut term = h;
    let mut sum = term;
    for k in 1..60 {
        term *= -h * h / (k as f64 * (k + 1) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// First positive zero of J₁ by bisection on [3, 4.5].
pub fn first_zero_j1() -> f64 {
    let (mut a, mut b) = (3.0_f64, 4.5_f64);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if bessel_j1(a) * bessel_j1(m) <= 0.0 {
            b = m;
        } else {
            a = m;
        }
        if b - a < 1e-15 {
            break;
        }
    }
    0.5 * (a + b)
}

/// First Dirichlet eigenvalue of the Laplacian on a ball of radius `r` in R⁴.
pub fn lambda1_ball(r: f64) -> f64 {
    let j = first_zero_j1();
    j * j / (r * r)
}

/// Exponents tabulated in [`ConstantsTable::radial`].
pub const TABULATED_EXPONENTS: [f64; 5] = [2.5, 8.0 / 3.0, 3.0, 10.0 / 3.0, 4.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialEntry {
    pub p: f64,
    pub value: f64,
}

/// Frozen table of constants; built once, read everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsTable {
    pub c4: f64,
    pub omega3: f64,
    pub alpha4: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "I_3")]
    pub i3: f64,
    #[serde(rename = "I_4")]
    pub i4: f64,
    pub radial: Vec<RadialEntry>,
    pub sigma: [[f64; 5]; 5],
    /// (c4⁴/4)·I_4: energy of one unit bubble.
    pub leading_level: f64,
    pub lambda1_unit_ball: f64,
}

impl ConstantsTable {
    pub fn new() -> Self {
        let rad = |p: f64| radial_integral(p).expect("tabulated exponents exceed 2");
        let mut sigma = [[0.0; 5]; 5];
        for (j, row) in sigma.iter_mut().enumerate() {
            for (k, s) in row.iter_mut().enumerate() {
                *s = sigma_entry(j, k);
            }
        }
        let i4 = rad(4.0);
        Self {
            c4: C4,
            omega3: OMEGA3,
            alpha4: ALPHA4,
            a: bubble_cube_mass(),
            i3: rad(3.0),
            i4,
            radial: TABULATED_EXPONENTS.iter().map(|&p| RadialEntry { p, value: rad(p) }).collect(),
            sigma,
            leading_level: C4.powi(4) / 4.0 * i4,
            lambda1_unit_ball: lambda1_ball(1.0),
        }
    }
}

impl Default for ConstantsTable {
    fn default() -> Self {
        Self::new()
    }
}
