//! The verify-all suite: module checks composed into one deterministic report.
//!
//! Every check is run on the given domain with points placed relative to its
//! origin and inradius. Nothing here adds mathematics; each verdict is the one
//! defined by the module that computes it.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bubble::BubbleParams;
use crate::constants::{bubble_cube_mass, radial_integral, radial_integral_quadrature, A, C4};
use crate::domain::DomainDescriptor;
use crate::error::Result;
use crate::geometry::{point, Box4, Point4};
use crate::green_robin::degree::{brouwer_degree, DegreeSettings};
use crate::projection::Projector;
use crate::quadrature::lemmas::{lemma_a2, lemma_a4, lemma_a5, taylor_stability, TaylorKind};
use crate::quadrature::{AsymptoticFitReport, QuadratureSpec};
use crate::reduced_energy::{critical_d, solve_reduced_system, SolveMode, SolveSettings, SpikeBox};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifySettings {
    pub seed: u64,
    pub taylor_samples: usize,
    pub taylor_seeds: usize,
    pub taylor_amplitude: f64,
    pub taylor_tolerance: f64,
    /// Exponent of the power-type Taylor inequality.
    pub taylor_power: f64,
    pub a5_window: (f64, f64),
    pub psi_lambda: f64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            seed: 0,
            taylor_samples: 1_000_000,
            taylor_seeds: 5,
            taylor_amplitude: 10.0,
            taylor_tolerance: 0.05,
            taylor_power: 3.0,
            a5_window: (1.7, 2.3),
            psi_lambda: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub details: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub domain: DomainDescriptor,
    pub settings: VerifySettings,
    pub checks: Vec<CheckResult>,
    pub all_pass: bool,
}

fn check(name: &str, r: Result<(bool, Value)>) -> CheckResult {
    match r {
        Ok((pass, details)) => CheckResult { name: name.into(), pass, details },
        Err(e) => CheckResult { name: name.into(), pass: false, details: json!({ "error": e.to_string() }) },
    }
}

fn fits(reports: Vec<AsymptoticFitReport>) -> (bool, Value) {
    (reports.iter().all(|r| r.pass), json!(reports))
}

fn offset(o: &Point4, r: f64, dir: [f64; 4]) -> Point4 {
    o + point(dir) * r
}

fn constants_closure() -> Result<(bool, Value)> {
    let i3q = radial_integral_quadrature(3.0)?;
    let i4q = radial_integral_quadrature(4.0)?;
    let i4 = radial_integral(4.0)?;
    let a_ways = [A, bubble_cube_mass(), C4.powi(3) * radial_integral(3.0)?, C4.powi(3) * i3q.value];
    let rel_a = a_ways.iter().map(|v| (v - A).abs() / A).fold(0.0, f64::max);
    let rel_i4 = (i4q.value - i4).abs() / i4;
    Ok((rel_a < 1e-8 && rel_i4 < 1e-8, json!({ "A": a_ways, "max_rel_A": rel_a, "I_4": i4, "I_4_quadrature": i4q.value, "rel_I_4": rel_i4 })))
}

fn projection_expansion(proj: &Projector, center: &Point4) -> Result<(bool, Value)> {
    let reports = [1e-1, 1e-2, 1e-3]
        .iter()
        .map(|&d| proj.projection_defect(&BubbleParams::unit(d, *center)?))
        .collect::<Result<Vec<_>>>()?;
    let decreasing = reports.windows(2).all(|w| w[1].defect_over_delta < w[0].defect_over_delta);
    Ok((decreasing, json!({ "defects": reports, "defect_over_delta_decreasing": decreasing })))
}

fn psi_stationarity(proj: &Projector, center: &Point4, r: f64, lambda: f64) -> Result<(bool, Value)> {
    let ev = proj.evaluator();
    let dc = critical_d(lambda, ev.robin(center)?);
    let xi = Box4::cube(crate::geometry::to_array(center), 0.5 * r);
    let sb = SpikeBox { d_lo: 0.8 * dc, d_hi: 1.25 * dc, xi };
    let rep = solve_reduced_system(ev, &[lambda], &[1.0], &[sb], SolveMode::Minimization, &SolveSettings::default())?;
    let tau = ev.robin(&point(rep.xi_star[0]))?;
    let d_err = (rep.d_star[0] - critical_d(lambda, tau)).abs();
    let residual = rep.residuals.iter().cloned().fold(0.0, f64::max);
    Ok((d_err < 1e-6 && residual < 1e-6, json!({ "report": rep, "d_error": d_err, "max_residual": residual })))
}

fn degree_center(proj: &Projector, center: &Point4, r: f64) -> Result<(bool, Value)> {
    let bx = Box4::cube(crate::geometry::to_array(center), 0.5 * r);
    let cert = brouwer_degree(proj.evaluator(), &bx, &DegreeSettings::default())?;
    Ok((cert.degree != 0, json!(cert)))
}

/// Runs every check. Identical inputs give identical reports.
pub fn verify_all(domain: &DomainDescriptor, st: &VerifySettings) -> Result<VerifyReport> {
    let proj = Projector::new(domain.clone())?;
    let o = point(domain.origin);
    let r = domain.inradius();
    let spec = QuadratureSpec { seed: st.seed, ..QuadratureSpec::default() };
    let (x1, x2) = (offset(&o, r, [0.4, 0.0, 0.0, 0.0]), offset(&o, r, [-0.4, 0.0, 0.0, 0.0]));
    let mut checks = vec![
        check("constants_closure", constants_closure()),
        check("projection_expansion", projection_expansion(&proj, &o)),
        check("bubble_power_rates", lemma_a2(domain, o, &[1e-2, 1e-3, 1e-4, 1e-5], &spec).map(fits)),
    ];
    let seeds: Vec<u64> = (0..st.taylor_seeds as u64).map(|k| st.seed.wrapping_add(k)).collect();
    let taylor: Vec<_> = TaylorKind::all(st.taylor_power)
        .iter()
        .map(|&k| taylor_stability(k, st.taylor_samples, st.taylor_amplitude, &seeds, st.taylor_tolerance))
        .collect();
    checks.push(CheckResult { name: "taylor_constants".into(), pass: taylor.iter().all(|t| t.pass), details: json!(taylor) });
    checks.push(check("interaction_rates", lemma_a4(domain, x1, x2, &[3e-2, 1e-2, 3e-3], &spec).map(fits)));
    checks.push(check("interaction_norm_rates", lemma_a5(&proj, x1, x2, &[3e-2, 1e-2, 3e-3], 0, &spec, st.a5_window).map(fits)));
    checks.push(check("psi_stationarity", psi_stationarity(&proj, &o, r, st.psi_lambda)));
    checks.push(check("degree_center_box", degree_center(&proj, &o, r)));
    let all_pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport { domain: domain.clone(), settings: *st, checks, all_pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_closure_passes() {
        let (pass, v) = constants_closure().unwrap();
        assert!(pass, "{v}");
    }

    #[test]
    fn failing_checks_carry_the_error() {
        let c = check("x", Err(crate::error::SpikeError::Config("boom".into())));
        assert!(!c.pass);
        assert!(c.details["error"].as_str().unwrap().contains("boom"));
    }
}
