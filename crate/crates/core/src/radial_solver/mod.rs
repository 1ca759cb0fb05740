//! Positive radial solutions of −Δu = μu³ + λu on the unit ball of R⁴.
//!
//! With w0 = √μ·u0 the substitution v = u/u0, s = w0·r turns the radial equation
//! into v'' + (3/s)v' + v³ + εv = 0 with ε = λ/w0², whose solution is O(1)
//! however concentrated u is. The energy density is integrated alongside.

pub mod ode;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{C4, OMEGA3};
use crate::error::{Result, SpikeError};
use crate::quadrature::fit::least_squares;
use crate::reduced_energy::{critical_d_with, SecondOrder};

use ode::{integrate, OdeTolerance, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialSettings {
    /// Series start in the scaled variable s.
    pub s0: f64,
    /// Integration stops at r = r_cap when u has not vanished.
    pub r_cap: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Geometric bracket sweep for u0.
    pub u0_min: f64,
    pub u0_max: f64,
    pub sweep_factor: f64,
    /// Points with |u(1)| above this fraction of u0 are left out of the fit.
    pub residual_fraction: f64,
}

impl Default for RadialSettings {
    fn default() -> Self {
        Self {
            s0: 1e-8,
            r_cap: 100.0,
            rtol: 1e-12,
            atol: 1e-14,
            u0_min: 1e-2,
            u0_max: 1e9,
            sweep_factor: 2.0,
            residual_fraction: 1e-6,
        }
    }
}

impl RadialSettings {
    fn tolerance(&self) -> OdeTolerance {
        OdeTolerance { rtol: self.rtol, atol: self.atol, controlled: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub lambda: f64,
    pub mu: f64,
    pub u0: f64,
    /// (r, u(r), u'(r)) at the accepted integration steps, ending at the zero.
    pub grid: Vec<(f64, f64, f64)>,
    pub first_zero: f64,
    pub delta_effective: f64,
    /// ½∫|∇u|² − (λ/2)∫u² − (μ/4)∫u⁴ over the ball of radius first_zero.
    pub energy: f64,
    /// |u(1)|, filled in by `solve_ball`.
    pub residual: Option<f64>,
}

struct Scaled {
    w0: f64,
    eps: f64,
}

impl Scaled {
    fn new(lambda: f64, mu: f64, u0: f64) -> Result<Self> {
        if !(u0 > 0.0) || !u0.is_finite() {
            return Err(SpikeError::Precondition(format!("u0 must be positive, got {u0}")));
        }
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(SpikeError::Precondition(format!("mu must be positive, got {mu}")));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(SpikeError::Precondition(format!("lambda must be non-negative, got {lambda}")));
        }
        let w0 = mu.sqrt() * u0;
        Ok(Self { w0, eps: lambda / (w0 * w0) })
    }

    fn run(&self, settings: &RadialSettings, s_end: f64, stop_at_zero: bool, record: bool) -> Result<Trajectory<3>> {
        let eps = self.eps;
        let rhs = move |s: f64, y: &[f64; 3]| {
            let (v, w) = (y[0], y[1]);
            let v2 = v * v;
            [w, -3.0 * w / s - v2 * v - eps * v, s * s * s * (0.5 * w * w - 0.5 * eps * v2 - 0.25 * v2 * v2)]
        };
        let s0 = settings.s0;
        let k = 1.0 + eps;
        let y0 = [1.0 - k * s0 * s0 / 8.0, -k * s0 / 4.0, -(0.5 * eps + 0.25) * s0.powi(4) / 4.0];
        integrate(rhs, s0, y0, s_end, 1e-3, settings.tolerance(), record, stop_at_zero)
    }
}

/// Integrates the radial equation from the center until u vanishes.
pub fn shoot(lambda: f64, mu: f64, u0: f64) -> Result<(f64, RadialProfile)> {
    shoot_with(lambda, mu, u0, &RadialSettings::default())
}

pub fn shoot_with(lambda: f64, mu: f64, u0: f64, settings: &RadialSettings) -> Result<(f64, RadialProfile)> {
    let sc = Scaled::new(lambda, mu, u0)?;
    let tr = sc.run(settings, settings.r_cap * sc.w0, true, true)?;
    let ev = tr.event.ok_or(SpikeError::NoCrossing { cap: settings.r_cap })?;
    let d = u0 * sc.w0;
    let grid = tr.samples.iter().map(|p| (p.t / sc.w0, u0 * p.y[0], d * p.y[1])).collect();
    let first_zero = ev.t / sc.w0;
    let profile = RadialProfile {
        lambda,
        mu,
        u0,
        grid,
        first_zero,
        delta_effective: C4 / sc.w0,
        energy: OMEGA3 / mu * ev.y[2],
        residual: None,
    };
    Ok((first_zero, profile))
}

/// u(1)/u0, integrating through any zero.
fn scaled_value_at_one(lambda: f64, mu: f64, u0: f64, settings: &RadialSettings) -> Result<f64> {
    let sc = Scaled::new(lambda, mu, u0)?;
    let tr = sc.run(settings, sc.w0, false, false)?;
    Ok(tr.last.y[0])
}

/// Finds u0 with first zero at r = 1 by a geometric sweep followed by Illinois
/// refinement in ln u0. Stops when |u(1)| ≤ tol·u0.
pub fn solve_ball(lambda: f64, mu: f64, tol: f64) -> Result<RadialProfile> {
    solve_ball_with(lambda, mu, tol, &RadialSettings::default())
}

pub fn solve_ball_with(lambda: f64, mu: f64, tol: f64, settings: &RadialSettings) -> Result<RadialProfile> {
    if !(lambda > 0.0) {
        return Err(SpikeError::Precondition(format!("lambda must be positive, got {lambda}")));
    }
    if !(tol > 0.0) {
        return Err(SpikeError::Precondition("tol must be positive".into()));
    }
    let g = |ln_u0: f64| scaled_value_at_one(lambda, mu, ln_u0.exp(), settings);
    let bracket_err = SpikeError::Bracket { lo: settings.u0_min, hi: settings.u0_max };
    let mut a = settings.u0_min.ln();
    let mut fa = g(a)?;
    if !(fa > 0.0) {
        return Err(bracket_err);
    }
    let step = settings.sweep_factor.ln();
    let ln_max = settings.u0_max.ln();
    let (mut b, mut fb) = loop {
        let b = a + step;
        if b > ln_max + 1e-12 {
            return Err(bracket_err);
        }
        let fb = g(b)?;
        if fb <= 0.0 {
            break (b, fb);
        }
        a = b;
        fa = fb;
    };
    let mut side = 0;
    let mut best = if fa.abs() < fb.abs() { (a, fa) } else { (b, fb) };
    for _ in 0..200 {
        if best.1.abs() <= tol || b - a <= 4.0 * f64::EPSILON * b.abs().max(1.0) {
            break;
        }
        let c = (a * fb - b * fa) / (fb - fa);
        let c = if c > a && c < b { c } else { 0.5 * (a + b) };
        let fc = g(c)?;
        if fc.abs() < best.1.abs() {
            best = (c, fc);
        }
        if fc > 0.0 {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    let u0 = best.0.exp();
    let (_, mut profile) = shoot_with(lambda, mu, u0, settings)?;
    profile.residual = Some(best.1.abs() * u0);
    Ok(profile)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyPoint {
    pub lambda: f64,
    pub u0: Option<f64>,
    pub delta_eff: Option<f64>,
    /// λ·ln(1/δ_eff).
    pub d_lambda: Option<f64>,
    pub energy: Option<f64>,
    pub residual: Option<f64>,
    pub included: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub mu: f64,
    pub tol: f64,
    pub points: Vec<StudyPoint>,
    /// Fit d(λ) = d0 + s·λ.
    pub d0: f64,
    pub slope: f64,
    pub fit_residual: f64,
    /// Ball-center limit with the printed second-order coefficient.
    pub d_theory: f64,
    /// Same limit with the coefficient implied by the bubble mass.
    pub d_theory_bubble_mass: f64,
    pub s_theory: f64,
    pub intercept_relative_error: f64,
    pub intercept_tolerance: f64,
    pub intercept_within_tolerance: bool,
    pub d_positive: bool,
    pub delta_strictly_decreasing: bool,
    /// ln(1/δ_eff) against 1/λ is increasing and convex.
    pub log_scale_convex_increasing: bool,
    pub energy_level: f64,
    pub energy_relative_error: f64,
    pub energy_tolerance: f64,
    pub energy_within_tolerance: bool,
    /// Monotone exponential concentration.
    pub hard_property: bool,
    pub quantitative_miss: bool,
}

impl ConcentrationReport {
    /// CSV with columns lambda,u0,delta_eff,d_lambda,energy for the solved points.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lambda,u0,delta_eff,d_lambda,energy\n");
        for p in &self.points {
            if let (Some(u0), Some(de), Some(d), Some(e)) = (p.u0, p.delta_eff, p.d_lambda, p.energy) {
                s.push_str(&format!("{},{},{},{},{}\n", p.lambda, u0, de, d, e));
            }
        }
        s
    }
}

pub const INTERCEPT_TOLERANCE: f64 = 0.5;
pub const ENERGY_TOLERANCE: f64 = 0.15;

/// Solves every λ of a strictly decreasing grid, fits d(λ) = d0 + s·λ and compares
/// with the ball-center limit of the critical d.
pub fn concentration_study(lambdas: &[f64], mu: f64, tol: f64) -> Result<ConcentrationReport> {
    concentration_study_with(lambdas, mu, tol, &RadialSettings::default())
}

pub fn concentration_study_with(lambdas: &[f64], mu: f64, tol: f64, settings: &RadialSettings) -> Result<ConcentrationReport> {
    if lambdas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(SpikeError::Precondition("lambda grid must be strictly decreasing".into()));
    }
    let points: Vec<StudyPoint> = lambdas
        .par_iter()
        .map(|&lambda| match solve_ball_with(lambda, mu, tol, settings) {
            Ok(p) => {
                let residual = p.residual.unwrap_or(f64::INFINITY);
                StudyPoint {
                    lambda,
                    u0: Some(p.u0),
                    delta_eff: Some(p.delta_effective),
                    d_lambda: Some(lambda * (1.0 / p.delta_effective).ln()),
                    energy: Some(p.energy),
                    residual: Some(residual),
                    included: residual <= settings.residual_fraction * p.u0,
                    error: None,
                }
            }
            Err(e) => StudyPoint {
                lambda,
                u0: None,
                delta_eff: None,
                d_lambda: None,
                energy: None,
                residual: None,
                included: false,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let used: Vec<&StudyPoint> = points.iter().filter(|p| p.included).collect();
    if used.len() < 3 {
        return Err(SpikeError::InsufficientData(format!("{} solvable lambda values, need 3", used.len())));
    }
    let x = nalgebra::DMatrix::from_fn(used.len(), 2, |i, j| if j == 0 { 1.0 } else { used[i].lambda });
    let y = nalgebra::DVector::from_fn(used.len(), |i, _| used[i].d_lambda.unwrap());
    let (c, fit_residual) = least_squares(&x, &y)?;
    let tau0 = crate::constants::ALPHA4;
    let d_theory = critical_d_with(SecondOrder::Printed, 0.0, tau0);
    let d_theory_bubble_mass = critical_d_with(SecondOrder::BubbleMass, 0.0, tau0);
    let intercept_relative_error = (c[0] - d_theory).abs() / d_theory;
    let intercept_within_tolerance = intercept_relative_error <= INTERCEPT_TOLERANCE;

    let d_positive = used.iter().all(|p| p.d_lambda.unwrap() > 0.0);
    let deltas: Vec<f64> = used.iter().map(|p| p.delta_eff.unwrap()).collect();
    let delta_strictly_decreasing = deltas.windows(2).all(|w| w[1] < w[0]);
    let xs: Vec<f64> = used.iter().map(|p| 1.0 / p.lambda).collect();
    let ys: Vec<f64> = deltas.iter().map(|d| -d.ln()).collect();
    let slopes: Vec<f64> = (1..xs.len()).map(|i| (ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1])).collect();
    let log_scale_convex_increasing = slopes.iter().all(|s| *s > 0.0) && slopes.windows(2).all(|w| w[1] >= w[0]);

    let energy_level = 8.0 * std::f64::consts::PI.powi(2) / 3.0 / mu;
    let e_last = used.last().unwrap().energy.unwrap();
    let energy_relative_error = (e_last - energy_level).abs() / energy_level;
    let energy_within_tolerance = energy_relative_error <= ENERGY_TOLERANCE;
    let hard_property = d_positive && delta_strictly_decreasing && log_scale_convex_increasing;
    Ok(ConcentrationReport {
        mu,
        tol,
        points,
        d0: c[0],
        slope: c[1],
        fit_residual,
        d_theory,
        d_theory_bubble_mass,
        s_theory: 0.5,
        intercept_relative_error,
        intercept_tolerance: INTERCEPT_TOLERANCE,
        intercept_within_tolerance,
        d_positive,
        delta_strictly_decreasing,
        log_scale_convex_increasing,
        energy_level,
        energy_relative_error,
        energy_tolerance: ENERGY_TOLERANCE,
        energy_within_tolerance,
        hard_property,
        quantitative_miss: !intercept_within_tolerance,
    })
}
