//! Integral and pointwise estimates used by the energy expansion, checked numerically.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bubble::{bubble_value, BubbleParams};
use crate::constants::{C4, OMEGA3};
use crate::domain::DomainDescriptor;
use crate::error::{Result, SpikeError};
use crate::geometry::{to_array, Point4};
use crate::projection::{ProjectionMode, Projector};

use super::adaptive::Estimate;
use super::engine::{integrate, integrate_vec, QuadResult, QuadratureSpec};
use super::fit::{fit_delta2_log, loglog_slope, AsymptoticFitReport, FitSample};

fn spec_for(spec: &QuadratureSpec, spikes: &[(Point4, f64)]) -> QuadratureSpec {
    let mut s = spec.clone();
    s.spike_centers = spikes.iter().map(|(x, d)| (to_array(x), *d)).collect();
    s
}

/// ∫_Ω U^p.
pub fn integrate_bubble_power(domain: &DomainDescriptor, b: &BubbleParams, p: f64, spec: &QuadratureSpec) -> Result<QuadResult> {
    if !(p > 0.0 && p < 4.0) {
        return Err(SpikeError::Precondition(format!("exponent {p} is outside (0, 4)")));
    }
    let s = spec_for(spec, &[(b.xi, b.delta)]);
    integrate(domain, &s, &|x| bubble_value(b, x).powf(p))
}

fn check_separation(domain: &DomainDescriptor, b1: &BubbleParams, b2: &BubbleParams, spec: &QuadratureSpec) -> Result<QuadratureSpec> {
    let s = spec_for(spec, &[(b1.xi, b1.delta), (b2.xi, b2.delta)]);
    let r = s.resolve_split(domain)?;
    if (b1.xi - b2.xi).norm() < 2.0 * r {
        return Err(SpikeError::Precondition("spike centers closer than twice the split radius".into()));
    }
    Ok(s)
}

/// ∫_Ω U₁^p U₂^q with one split ball per center.
pub fn interaction_integral(domain: &DomainDescriptor, b1: &BubbleParams, b2: &BubbleParams, p: f64, q: f64, spec: &QuadratureSpec) -> Result<QuadResult> {
    let s = check_separation(domain, b1, b2, spec)?;
    integrate(domain, &s, &|x| bubble_value(b1, x).powf(p) * bubble_value(b2, x).powf(q))
}

/// L^{4/3} norms of (PU₂)²·Pψ₁^j and PU₁·PU₂·Pψ₁^j with exact projections.
pub fn interaction_norms(proj: &Projector, b1: &BubbleParams, b2: &BubbleParams, j: usize, spec: &QuadratureSpec) -> Result<(Estimate, Estimate)> {
    let domain = proj.domain().clone();
    let s = check_separation(&domain, b1, b2, spec)?;
    let pu1 = proj.project_bubble(b1, ProjectionMode::Exact)?;
    let pu2 = proj.project_bubble(b2, ProjectionMode::Exact)?;
    let psi = proj.project_derivative(b1, j, ProjectionMode::Exact)?;
    let f = |x: &Point4, out: &mut [f64]| {
        let (u1, u2, w) = (pu1.value(x).unwrap_or(f64::NAN), pu2.value(x).unwrap_or(f64::NAN), psi.value(x).unwrap_or(f64::NAN));
        out[0] = (u2 * u2 * w).abs().powf(4.0 / 3.0);
        out[1] = (u1 * u2 * w).abs().powf(4.0 / 3.0);
    };
    let r = integrate_vec(&domain, &s, 2, &f)?;
    let norm = |q: &QuadResult| {
        let v = q.value.max(0.0);
        Estimate::new(v.powf(0.75), 0.75 * v.powf(-0.25) * q.error)
    };
    if r.iter().any(|q| !q.value.is_finite()) {
        return Err(SpikeError::Accuracy { what: "interaction norm integrand".into(), defect: f64::NAN, threshold: 0.0 });
    }
    Ok((norm(&r[0]), norm(&r[1])))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaylorKind {
    /// |F(a+b) − F(a) − F'(a)b| ≤ c(a²b² + b⁴)
    Quartic,
    /// |F'(a+b) − F'(a) − F''(a)b| ≤ c(|a|b² + |b|³)
    Cubic,
    /// |F''(a+b) − F''(a)| ≤ c(|a||b| + b²)
    Quadratic,
    /// ||a+b|^p − |a|^p| ≤ C(|a|^{p−1}|b| + |b|^p)
    Power(f64),
}

impl TaylorKind {
    pub fn all(p: f64) -> [TaylorKind; 4] {
        [TaylorKind::Quartic, TaylorKind::Cubic, TaylorKind::Quadratic, TaylorKind::Power(p)]
    }

    pub fn label(&self) -> String {
        match self {
            TaylorKind::Quartic => "quartic".into(),
            TaylorKind::Cubic => "cubic".into(),
            TaylorKind::Quadratic => "quadratic".into(),
            TaylorKind::Power(p) => format!("power(p={p})"),
        }
    }

    /// (LHS, RHS), with F(s) = (s⁺)⁴/4 expanded so that no cancellation occurs.
    pub fn sides(&self, a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let pos = |v: f64| v.max(0.0);
        match *self {
            TaylorKind::Quartic => {
                let lhs = if a > 0.0 && s > 0.0 {
                    (6.0 * a * a * b * b + 4.0 * a * b.powi(3) + b.powi(4)) / 4.0
                } else if a > 0.0 {
                    -a.powi(4) / 4.0 - a.powi(3) * b
                } else {
                    pos(s).powi(4) / 4.0
                };
                (lhs.abs(), a * a * b * b + b.powi(4))
            }
            TaylorKind::Cubic => {
                let lhs = if a > 0.0 && s > 0.0 {
                    3.0 * a * b * b + b.powi(3)
                } else if a > 0.0 {
                    -a.powi(3) - 3.0 * a * a * b
                } else {
                    pos(s).powi(3)
                };
                (lhs.abs(), a.abs() * b * b + b.abs().powi(3))
            }
            TaylorKind::Quadratic => {
                let lhs = if a > 0.0 && s > 0.0 {
                    3.0 * (2.0 * a * b + b * b)
                } else if a > 0.0 {
                    -3.0 * a * a
                } else {
                    3.0 * pos(s).powi(2)
                };
                (lhs.abs(), a.abs() * b.abs() + b * b)
            }
            TaylorKind::Power(p) => {
                let lhs = if a == 0.0 {
                    b.abs().powf(p)
                } else {
                    let t = b / a;
                    let l = if t > -1.0 { t.ln_1p() } else { (1.0 + t).abs().ln() };
                    a.abs().powf(p) * (p * l).exp_m1().abs()
                };
                (lhs, a.abs().powf(p - 1.0) * b.abs() + b.abs().powf(p))
            }
        }
    }

    /// LHS/RHS, defined as 0 when both sides vanish.
    pub fn ratio(&self, a: f64, b: f64) -> f64 {
        let (l, r) = self.sides(a, b);
        if r == 0.0 {
            if l == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            l / r
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorReport {
    pub kind: TaylorKind,
    pub samples: usize,
    pub amplitude: f64,
    pub seed: u64,
    pub empirical_c: f64,
    pub worst_pair: (f64, f64),
}

/// Samples (a, b) uniformly, with |b| ≪ |a|, with |b| ≫ |a|, and near a = −b.
pub fn taylor_bound_check(kind: TaylorKind, samples: usize, amplitude: f64, seed: u64) -> TaylorReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = (0.0, (0.0, 0.0));
    for i in 0..samples {
        let sign = |r: &mut ChaCha8Rng| if r.random::<bool>() { 1.0 } else { -1.0 };
        let u: f64 = rng.random_range(-amplitude..=amplitude);
        let (a, b) = match i % 4 {
            0 | 1 => (u, rng.random_range(-amplitude..=amplitude)),
            2 => {
                let scale = 10f64.powf(rng.random_range(-6.0..6.0));
                let b = (u * scale).clamp(-amplitude, amplitude) * sign(&mut rng);
                if rng.random::<bool>() {
                    (u, b)
                } else {
                    (b, u)
                }
            }
            _ => {
                let eps = 10f64.powf(rng.random_range(-8.0..0.0)) * sign(&mut rng);
                (-u * (1.0 + eps), u)
            }
        };
        let r = kind.ratio(a, b);
        if r > best.0 {
            best = (r, (a, b));
        }
    }
    TaylorReport { kind, samples, amplitude, seed, empirical_c: best.0, worst_pair: best.1 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorStability {
    pub kind: TaylorKind,
    pub reports: Vec<TaylorReport>,
    /// max |c_k / mean − 1| over seeds.
    pub spread: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn taylor_stability(kind: TaylorKind, samples: usize, amplitude: f64, seeds: &[u64], tolerance: f64) -> TaylorStability {
    let reports: Vec<TaylorReport> = seeds.iter().map(|&s| taylor_bound_check(kind, samples, amplitude, s)).collect();
    let mean = reports.iter().map(|r| r.empirical_c).sum::<f64>() / reports.len().max(1) as f64;
    let spread = reports.iter().map(|r| (r.empirical_c / mean - 1.0).abs()).fold(0.0, f64::max);
    let pass = reports.iter().all(|r| r.empirical_c.is_finite()) && spread <= tolerance;
    TaylorStability { kind, reports, spread, tolerance, pass }
}

fn samples(deltas: &[f64], est: &[QuadResult]) -> Vec<FitSample> {
    deltas.iter().zip(est).map(|(d, e)| FitSample { deltas: vec![*d], value: e.value, error: e.error }).collect()
}

/// ∫U² leading coefficient and the p = 4/3 and p = 3 rates.
pub fn lemma_a2(domain: &DomainDescriptor, xi: Point4, deltas: &[f64], spec: &QuadratureSpec) -> Result<Vec<AsymptoticFitReport>> {
    let mut out = Vec::new();
    let run = |p: f64| -> Result<Vec<QuadResult>> {
        deltas.iter().map(|&d| integrate_bubble_power(domain, &BubbleParams::unit(d, xi)?, p, spec)).collect()
    };
    let two = run(2.0)?;
    let vals: Vec<f64> = two.iter().map(|q| q.value).collect();
    let fit = fit_delta2_log(deltas, &vals)?;
    let a = fit.0[0];
    out.push(AsymptoticFitReport::relative(
        "bubble_power_p2_coefficient",
        "a*delta^2*|ln delta| + b*delta^2",
        samples(deltas, &two),
        fit,
        a,
        C4 * C4 * OMEGA3,
        0.02,
    ));
    for (p, predicted, name) in [(4.0 / 3.0, 4.0 / 3.0, "bubble_power_p4/3_slope"), (3.0, 1.0, "bubble_power_p3_slope")] {
        let q = run(p)?;
        let vals: Vec<f64> = q.iter().map(|q| q.value).collect();
        let fit = loglog_slope(deltas, &vals)?;
        let slope = fit.0[0];
        out.push(AsymptoticFitReport::relative(name, "c*delta^s", samples(deltas, &q), fit, slope, predicted, 0.05));
    }
    Ok(out)
}

/// Interaction integrals of two separated bubbles with δ1 = δ2 = δ.
pub fn lemma_a4(domain: &DomainDescriptor, xi1: Point4, xi2: Point4, deltas: &[f64], spec: &QuadratureSpec) -> Result<Vec<AsymptoticFitReport>> {
    let pair = |d: f64| -> Result<(BubbleParams, BubbleParams)> { Ok((BubbleParams::unit(d, xi1)?, BubbleParams::unit(d, xi2)?)) };
    let mut out = Vec::new();
    let q22: Vec<QuadResult> = deltas
        .iter()
        .map(|&d| {
            let (b1, b2) = pair(d)?;
            interaction_integral(domain, &b1, &b2, 2.0, 2.0, spec)
        })
        .collect::<Result<_>>()?;
    let ratios: Vec<f64> = deltas.iter().zip(&q22).map(|(d, q)| q.value / (d.powi(4) * (d * d).ln().abs())).collect();
    let rmax = ratios.iter().cloned().fold(0.0, f64::max);
    let rmin = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = rmax / rmin;
    out.push(AsymptoticFitReport::windowed(
        "interaction_p2_q2_bounded",
        "value/(delta^4*|ln delta^2|), max/min across deltas",
        samples(deltas, &q22),
        (ratios, 0.0),
        spread,
        1.0,
        (1.0, 10.0),
    ));
    let q = deltas
        .iter()
        .map(|&d| {
            let (b1, b2) = pair(d)?;
            interaction_integral(domain, &b1, &b2, 8.0 / 3.0, 4.0 / 3.0, spec)
        })
        .collect::<Result<Vec<_>>>()?;
    let vals: Vec<f64> = q.iter().map(|q| q.value).collect();
    let fit = loglog_slope(deltas, &vals)?;
    let slope = fit.0[0];
    out.push(AsymptoticFitReport::relative("interaction_p8/3_q4/3_slope", "c*delta^s", samples(deltas, &q), fit, slope, 8.0 / 3.0, 0.15));
    Ok(out)
}

/// Both L^{4/3} interaction norms against δ1 = δ2 = δ; slope 2 expected.
pub fn lemma_a5(proj: &Projector, xi1: Point4, xi2: Point4, deltas: &[f64], j: usize, spec: &QuadratureSpec, window: (f64, f64)) -> Result<Vec<AsymptoticFitReport>> {
    let mut first = Vec::new();
    let mut second = Vec::new();
    for &d in deltas {
        let (n1, n2) = interaction_norms(proj, &BubbleParams::unit(d, xi1)?, &BubbleParams::unit(d, xi2)?, j, spec)?;
        first.push(FitSample { deltas: vec![d, d], value: n1.value, error: n1.error });
        second.push(FitSample { deltas: vec![d, d], value: n2.value, error: n2.error });
    }
    let mut out = Vec::new();
    for (name, s) in [("norm_PU2^2_Ppsi1", first), ("norm_PU1_PU2_Ppsi1", second)] {
        let vals: Vec<f64> = s.iter().map(|x| x.value).collect();
        let fit = loglog_slope(deltas, &vals)?;
        let slope = fit.0[0];
        out.push(AsymptoticFitReport::windowed(&format!("{name}_j{j}_slope"), "c*delta^s", s, fit, slope, 2.0, window));
    }
    Ok(out)
}

/// Largest ratio over a uniform angle grid; the ratios are homogeneous, so this is the supremum up to grid resolution.
pub fn taylor_angle_scan(kind: TaylorKind, points: usize) -> (f64, f64) {
    (0..points)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / points as f64;
            (kind.ratio(t.cos(), t.sin()), t)
        })
        .fold((0.0, 0.0), |a, v| if v.0 > a.0 { v } else { a })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::radial_integral;
    use crate::quadrature::adaptive::{integrate as integrate_1d, Tolerance};

    #[test]
    fn trivial_taylor_cases() {
        assert_eq!(TaylorKind::Quartic.ratio(1.0, 0.0), 0.0);
        for kind in TaylorKind::all(3.0) {
            assert_eq!(kind.ratio(0.0, 0.0), 0.0);
        }
        // a = −b: LHS = |a|^p, RHS = 2|a|^p.
        assert!((TaylorKind::Power(3.0).ratio(2.0, -2.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn expanded_sides_match_direct_formula() {
        let f = |s: f64| s.max(0.0).powi(4) / 4.0;
        let f1 = |s: f64| s.max(0.0).powi(3);
        let f2 = |s: f64| 3.0 * s.max(0.0).powi(2);
        for &(a, b) in &[(1.3, 0.4), (1.3, -2.0), (-0.5, 2.0), (-0.5, 0.2), (2.0, -0.7)] {
            let q = (f(a + b) - f(a) - f1(a) * b).abs();
            let c = (f1(a + b) - f1(a) - f2(a) * b).abs();
            let d = (f2(a + b) - f2(a)).abs();
            assert!((TaylorKind::Quartic.sides(a, b).0 - q).abs() < 1e-12);
            assert!((TaylorKind::Cubic.sides(a, b).0 - c).abs() < 1e-12);
            assert!((TaylorKind::Quadratic.sides(a, b).0 - d).abs() < 1e-12);
            let p = ((a + b).abs().powf(2.5) - a.abs().powf(2.5)).abs();
            assert!((TaylorKind::Power(2.5).sides(a, b).0 - p).abs() < 1e-12);
        }
    }

    #[test]
    fn sampled_constant_matches_angle_scan() {
        for kind in TaylorKind::all(3.0) {
            let r = taylor_bound_check(kind, 200_000, 10.0, 1);
            // Some suprema are approached only as b/a → 0.
            let limit = [(1.0, 1e-12), (1.0, -1e-12), (-1.0, 1e-12), (-1.0, -1e-12)]
                .iter()
                .map(|&(a, b)| kind.ratio(a, b))
                .fold(0.0, f64::max);
            let sup = taylor_angle_scan(kind, 2_000_000).0.max(limit);
            assert!(r.empirical_c.is_finite() && r.empirical_c <= sup * (1.0 + 1e-9), "{kind:?}: {} {:?} vs {sup}", r.empirical_c, r.worst_pair);
            assert!(r.empirical_c > 0.99 * sup, "{kind:?}: {} vs {sup}", r.empirical_c);
        }
    }

    #[test]
    fn radial_integrand_matches_one_dimensional_quadrature() {
        let d = DomainDescriptor::unit_ball();
        let b = BubbleParams::unit(1e-3, Point4::zeros()).unwrap();
        let q = integrate_bubble_power(&d, &b, 3.0, &QuadratureSpec::default()).unwrap();
        let delta = b.delta;
        let oracle = integrate_1d(
            |t| OMEGA3 * t.powi(3) * (C4 * delta / (delta * delta + t * t)).powi(3),
            0.0,
            1.0,
            Tolerance { abs: 1e-18, rel: 1e-13, max_intervals: 5000 },
        );
        assert!(((q.value - oracle.value) / oracle.value).abs() < 1e-6, "{} vs {}", q.value, oracle.value);
        let ratio = q.value / (delta * crate::constants::A);
        assert!(ratio > 0.5 && ratio < 1.0);
        let _ = radial_integral(3.0);
    }

    #[test]
    fn p2_closed_form_for_ball() {
        // ∫_{B_1} U² = (c4²/2)δ²ω3[ln(1+t²) + 1/(1+t²)] from 0 to 1/δ.
        let d = DomainDescriptor::unit_ball();
        for delta in [1e-2, 1e-4] {
            let b = BubbleParams::unit(delta, Point4::zeros()).unwrap();
            let q = integrate_bubble_power(&d, &b, 2.0, &QuadratureSpec::default()).unwrap();
            let t2 = 1.0 / (delta * delta);
            let exact = 0.5 * C4 * C4 * delta * delta * OMEGA3 * (t2.ln_1p() + 1.0 / (1.0 + t2) - 1.0);
            assert!(((q.value - exact) / exact).abs() < 1e-8, "{} vs {exact}", q.value);
        }
    }

    #[test]
    fn interaction_decays_with_second_delta() {
        let d = DomainDescriptor::unit_ball();
        let xi1 = crate::geometry::point([0.4, 0.0, 0.0, 0.0]);
        let b1 = BubbleParams::unit(1e-2, xi1).unwrap();
        let mut prev = f64::INFINITY;
        for d2 in [1e-2, 3e-3, 1e-3] {
            let b2 = BubbleParams::unit(d2, -xi1).unwrap();
            let spec = QuadratureSpec { outer_samples: 1 << 13, ..QuadratureSpec::default() };
            let v = interaction_integral(&d, &b1, &b2, 2.0, 2.0, &spec).unwrap().value;
            assert!(v < prev);
            prev = v;
        }
        let close = BubbleParams::unit(1e-3, crate::geometry::point([0.3, 0.0, 0.0, 0.0])).unwrap();
        assert!(interaction_integral(&d, &b1, &close, 2.0, 2.0, &QuadratureSpec::default()).is_err());
    }
}
