//! Critical points of Ψ_λ on products of boxes S_i = [d_lo, d_hi] × Λ_i.
//!
//! Ψ is a sum of one term per spike, each depending only on (d_i, ξ_i), so the
//! system separates and every spike is solved on its own box.

use std::cmp::Ordering;

use nalgebra::{Matrix4, Vector4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpikeError};
use crate::geometry::{point, to_array, Box4, Point4};
use crate::green_robin::critical::check_box;
use crate::green_robin::degree::face_points;
use crate::green_robin::{brouwer_degree, DegreeCertificate, DegreeSettings, RobinEvaluator};
use crate::quadrature::qmc::{halton, radical_inverse};

use super::psi::{d_coefficient, summand, ScaledValue, SecondOrder};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeBox {
    pub d_lo: f64,
    pub d_hi: f64,
    pub xi: Box4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMode {
    Minimization,
    Degree,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveSettings {
    pub starts: usize,
    pub gradient_iters: usize,
    pub newton_iters: usize,
    /// Stop when |∇τ| ≤ grad_tol·τ/inradius.
    pub grad_tol: f64,
    /// Required distance from the box faces, relative to the box width.
    pub interior_tol: f64,
    /// Samples per edge of the ξ-face probe grids.
    pub probe_samples: usize,
    /// Minimal distance between ξ-boxes, when set.
    pub eta: Option<f64>,
    pub degree: DegreeSettings,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            starts: 32,
            gradient_iters: 40,
            newton_iters: 30,
            grad_tol: 1e-7,
            interior_tol: 1e-9,
            probe_samples: 3,
            eta: None,
            degree: DegreeSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeSolution {
    pub d_star: f64,
    pub xi_star: [f64; 4],
    pub delta_star: f64,
    pub psi: ScaledValue,
    /// |d − d_crit(ξ)| and |∇τ(ξ)| at the solution.
    pub d_residual: f64,
    pub grad_residual: f64,
    pub converged_starts: usize,
    /// Smallest Ψ over the boundary probes (minimization mode).
    pub boundary_min: Option<ScaledValue>,
    pub boundary_probes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointReport {
    pub mode: SolveMode,
    pub d_star: Vec<f64>,
    pub xi_star: Vec<[f64; 4]>,
    /// e^{−d_i/λ_i}.
    pub delta_star: Vec<f64>,
    /// (d residual, |∇τ|) per spike.
    pub residuals: Vec<f64>,
    pub degree_certificates: Option<Vec<DegreeCertificate>>,
    /// Ψ at the solution; underflows to 0 for small λ, see `psi_scaled`.
    pub psi_at_star: f64,
    pub psi_scaled: ScaledValue,
    pub spikes: Vec<SpikeSolution>,
}

/// One spike: λ, μ and the evaluator.
struct Spike<'a> {
    ev: &'a RobinEvaluator,
    lambda: f64,
    mu: f64,
    sb: SpikeBox,
}

#[derive(Clone, Copy)]
struct State {
    d: f64,
    xi: Point4,
    tau: f64,
    value: ScaledValue,
}

impl Spike<'_> {
    fn k(&self) -> f64 {
        SecondOrder::Printed.coefficient()
    }

    fn b(&self) -> f64 {
        d_coefficient()
    }

    fn safe(&self, xi: &Point4) -> bool {
        self.ev.domain().margin(xi) >= self.ev.stencil_margin()
    }

    fn state(&self, d: f64, xi: Point4) -> Option<State> {
        if !self.safe(&xi) {
            return None;
        }
        let tau = self.ev.robin(&xi).ok()?;
        let (s, c) = summand(SecondOrder::Printed, self.lambda, self.mu, d, tau);
        Some(State { d, xi, tau, value: ScaledValue::new(s, c) })
    }

    /// ∇Ψ without the positive factor e^{-2d/λ}.
    fn reduced_gradient(&self, s: &State, grad_tau: &Vector4<f64>) -> (f64, Vector4<f64>) {
        let g = self.k() * s.tau - self.b() * s.d;
        ((-2.0 / self.lambda * g - self.b()) / self.mu, grad_tau * (self.k() / self.mu))
    }

    fn d_critical(&self, tau: f64) -> f64 {
        0.5 * self.lambda + self.k() / self.b() * tau
    }

    fn project(&self, d: f64, xi: Point4) -> (f64, Point4) {
        (d.clamp(self.sb.d_lo, self.sb.d_hi), self.sb.xi.clamp(&xi))
    }

    /// Preconditioned projected descent with backtracking on the scaled values.
    fn descend(&self, start: State, iters: usize) -> State {
        let mut s = start;
        let inr = self.ev.domain().inradius();
        for _ in 0..iters {
            let Ok(gt) = self.ev.robin_grad_coarse(&s.xi) else { break };
            let (gd, gx) = self.reduced_gradient(&s, &gt);
            let pd = -gd * self.lambda * self.mu / (2.0 * self.b());
            let m = self.ev.domain().margin(&s.xi).min(inr);
            let px = -gx * (m * m * self.mu / (4.0 * self.k() * s.tau));
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..30 {
                let (d, xi) = self.project(s.d + t * pd, s.xi + px * t);
                if let Some(n) = self.state(d, xi) {
                    if n.value.compare(&s.value) == Ordering::Less {
                        moved = (n.d - s.d).abs() > 1e-14 * s.d.abs().max(1.0) || (n.xi - s.xi).norm() > 1e-14 * inr;
                        s = n;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
        }
        s
    }

    /// Newton on the reduced gradient; the d-equation is affine, the ξ-block is Hess τ.
    fn polish(&self, start: State, iters: usize, grad_tol: f64) -> Option<(State, f64)> {
        let inr = self.ev.domain().inradius();
        let mut s = start;
        for _ in 0..iters {
            let g = self.ev.robin_grad(&s.xi).ok()?;
            if g.norm() <= grad_tol * s.tau / inr {
                let d = self.d_critical(s.tau);
                let n = self.state(d, s.xi)?;
                return Some((n, g.norm()));
            }
            let (_, h): (Vector4<f64>, Matrix4<f64>) = self.ev.robin_grad_hess_coarse(&s.xi).ok()?;
            let step = h.lu().solve(&(-g))?;
            let xi = s.xi + step;
            if !self.safe(&xi) {
                return None;
            }
            let tau = self.ev.robin(&xi).ok()?;
            s = self.state(self.d_critical(tau), xi)?;
        }
        let g = self.ev.robin_grad(&s.xi).ok()?;
        (g.norm() <= grad_tol * s.tau / inr).then_some((s, g.norm()))
    }

    fn interior(&self, s: &State, tol: f64) -> bool {
        let wd = self.sb.d_hi - self.sb.d_lo;
        let wx = (0..4).map(|k| self.sb.xi.width(k)).fold(f64::INFINITY, f64::min);
        s.d - self.sb.d_lo > tol * wd && self.sb.d_hi - s.d > tol * wd && self.sb.xi.interior_margin(&s.xi) > tol * wx
    }

    fn probes(&self, st: &SolveSettings, d_star: f64, xi_star: Point4) -> Vec<(f64, Point4)> {
        let mut out = Vec::new();
        let mut xis = vec![xi_star, self.sb.xi.center()];
        xis.extend((1..=8).map(|i| self.sb.xi.map_unit(halton(i))));
        for d in [self.sb.d_lo, self.sb.d_hi] {
            out.extend(xis.iter().map(|x| (d, *x)));
        }
        for x in face_points(&self.sb.xi, st.probe_samples) {
            for d in [self.sb.d_lo, d_star, self.sb.d_hi] {
                out.push((d, x));
            }
        }
        out
    }

    fn minimize(&self, st: &SolveSettings) -> Result<SpikeSolution> {
        let n = st.starts.max(1);
        let starts: Vec<(f64, Point4)> = (0..n)
            .map(|i| {
                let xi = if i == 0 { self.sb.xi.center() } else { self.sb.xi.map_unit(halton(i as u64)) };
                let u = if i == 0 { 0.5 } else { radical_inverse(i as u64, 7) };
                (self.sb.d_lo + u * (self.sb.d_hi - self.sb.d_lo), xi)
            })
            .collect();
        let ends: Vec<(State, Option<(State, f64)>)> = starts
            .par_iter()
            .filter_map(|&(d, xi)| {
                let s0 = self.state(d, xi)?;
                let s = self.descend(s0, st.gradient_iters);
                let p = self.polish(s, st.newton_iters, st.grad_tol).filter(|(p, _)| self.interior(p, st.interior_tol));
                Some((s, p))
            })
            .collect();
        if ends.is_empty() {
            return Err(SpikeError::Precondition("no start point lies in the safe part of the box".into()));
        }
        let order = |a: &State, b: &State| {
            a.value.compare(&b.value).then_with(|| to_array(&a.xi).partial_cmp(&to_array(&b.xi)).unwrap_or(Ordering::Equal))
        };
        let lowest_descent = ends.iter().map(|e| e.0).min_by(order).expect("nonempty");
        let polished: Vec<(State, f64)> = ends.iter().filter_map(|e| e.1).collect();
        let best = polished.iter().cloned().min_by(|a, b| order(&a.0, &b.0));
        let Some((best, grad)) = best else {
            return Err(SpikeError::BoundaryMinimizer(format!(
                "no interior stationary point; lowest value at d = {:.6}, xi = {:?}",
                lowest_descent.d,
                to_array(&lowest_descent.xi)
            )));
        };
        if lowest_descent.value.compare(&best.value) == Ordering::Less && !self.interior(&lowest_descent, st.interior_tol) {
            return Err(SpikeError::BoundaryMinimizer(format!(
                "descent reached d = {:.6}, xi = {:?} on the box boundary below the interior candidate",
                lowest_descent.d,
                to_array(&lowest_descent.xi)
            )));
        }
        let probe_vals: Vec<ScaledValue> = self
            .probes(st, best.d, best.xi)
            .par_iter()
            .filter_map(|&(d, x)| self.state(d, x).map(|s| s.value))
            .collect();
        let boundary_min = probe_vals.iter().cloned().min_by(|a, b| a.compare(b));
        if let Some(bm) = boundary_min {
            if bm.compare(&best.value) == Ordering::Less {
                return Err(SpikeError::BoundaryMinimizer(format!(
                    "a boundary probe has Psi below the interior candidate at d = {:.6}",
                    best.d
                )));
            }
        }
        Ok(SpikeSolution {
            d_star: best.d,
            xi_star: to_array(&best.xi),
            delta_star: (-best.d / self.lambda).exp(),
            psi: best.value,
            d_residual: (best.d - self.d_critical(best.tau)).abs(),
            grad_residual: grad,
            converged_starts: polished.len(),
            boundary_min,
            boundary_probes: probe_vals.len(),
        })
    }

    fn degree(&self, st: &SolveSettings) -> Result<(SpikeSolution, DegreeCertificate)> {
        let cert = brouwer_degree(self.ev, &self.sb.xi, &st.degree)?;
        if cert.degree == 0 {
            return Err(SpikeError::NotCertifiable(format!("degree of grad tau is 0 on {:?}..{:?}", self.sb.xi.lo, self.sb.xi.hi)));
        }
        let c = self.sb.xi.center();
        let zero = cert
            .zeros
            .iter()
            .min_by(|a, b| {
                let (da, db) = ((point(a.point) - c).norm(), (point(b.point) - c).norm());
                da.total_cmp(&db).then_with(|| a.point.partial_cmp(&b.point).unwrap_or(Ordering::Equal))
            })
            .expect("nonzero degree implies a zero");
        let xi = point(zero.point);
        let tau = self.ev.robin(&xi)?;
        let d = self.d_critical(tau);
        if !(d > self.sb.d_lo && d < self.sb.d_hi) {
            return Err(SpikeError::Precondition(format!(
                "critical d = {d:.6} lies outside [{}, {}]",
                self.sb.d_lo, self.sb.d_hi
            )));
        }
        let s = self.state(d, xi).ok_or_else(|| SpikeError::Precondition("zero lies outside the safe region".into()))?;
        let sol = SpikeSolution {
            d_star: d,
            xi_star: zero.point,
            delta_star: (-d / self.lambda).exp(),
            psi: s.value,
            d_residual: 0.0,
            grad_residual: zero.grad_residual,
            converged_starts: cert.zeros.len(),
            boundary_min: None,
            boundary_probes: 0,
        };
        Ok((sol, cert))
    }
}

fn box_gap(a: &Box4, b: &Box4) -> f64 {
    (0..4)
        .map(|k| (b.lo[k] - a.hi[k]).max(a.lo[k] - b.hi[k]).max(0.0))
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt()
}

/// Locates one critical point of Ψ_λ per box, by constrained minimization or by
/// the degree of ∇τ together with the affine d-equation.
pub fn solve_reduced_system(
    ev: &RobinEvaluator,
    lambdas: &[f64],
    mus: &[f64],
    boxes: &[SpikeBox],
    mode: SolveMode,
    st: &SolveSettings,
) -> Result<CriticalPointReport> {
    let m = boxes.len();
    if m == 0 || lambdas.len() != m || mus.len() != m {
        return Err(SpikeError::Precondition("need one lambda and one mu per box".into()));
    }
    for (i, sb) in boxes.iter().enumerate() {
        if !(sb.d_lo >= 0.0 && sb.d_lo < sb.d_hi) {
            return Err(SpikeError::Precondition(format!("d-interval {i} is empty or negative")));
        }
        if !(lambdas[i] > 0.0) || !(mus[i] > 0.0) {
            return Err(SpikeError::Precondition(format!("lambda and mu of spike {i} must be positive")));
        }
        check_box(ev, &sb.xi)?;
    }
    if let Some(eta) = st.eta {
        for i in 0..m {
            for j in i + 1..m {
                let g = box_gap(&boxes[i].xi, &boxes[j].xi);
                if g < eta {
                    return Err(SpikeError::Precondition(format!("boxes {i} and {j} are {g:.3e} apart, below eta = {eta}")));
                }
            }
        }
    }
    let mut spikes = Vec::with_capacity(m);
    let mut certs = Vec::new();
    for i in 0..m {
        let sp = Spike { ev, lambda: lambdas[i], mu: mus[i], sb: boxes[i] };
        match mode {
            SolveMode::Minimization => spikes.push(sp.minimize(st)?),
            SolveMode::Degree => {
                let (s, c) = sp.degree(st)?;
                spikes.push(s);
                certs.push(c);
            }
        }
    }
    let psi_scaled = ScaledValue::sum(&spikes.iter().map(|s| (s.psi.scale, s.psi.mantissa)).collect::<Vec<_>>());
    Ok(CriticalPointReport {
        mode,
        d_star: spikes.iter().map(|s| s.d_star).collect(),
        xi_star: spikes.iter().map(|s| s.xi_star).collect(),
        delta_star: spikes.iter().map(|s| s.delta_star).collect(),
        residuals: spikes.iter().flat_map(|s| [s.d_residual, s.grad_residual]).collect(),
        degree_certificates: (mode == SolveMode::Degree).then_some(certs),
        psi_at_star: psi_scaled.value(),
        psi_scaled,
        spikes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::ALPHA4;
    use crate::domain::DomainDescriptor;
    use crate::reduced_energy::psi::critical_d;

    fn ball() -> RobinEvaluator {
        RobinEvaluator::new(DomainDescriptor::unit_ball()).unwrap()
    }

    fn spec_box() -> SpikeBox {
        SpikeBox { d_lo: 40.0, d_hi: 52.0, xi: Box4::cube([0.0; 4], 0.5) }
    }

    #[test]
    fn ball_minimizer_matches_closed_form() {
        let ev = ball();
        let r = solve_reduced_system(&ev, &[0.1], &[1.0], &[spec_box()], SolveMode::Minimization, &SolveSettings::default()).unwrap();
        let want = 0.05 + 32.0 * 2f64.sqrt();
        assert!((r.d_star[0] - want).abs() < 1e-6, "{}", r.d_star[0]);
        assert!(r.xi_star[0].iter().all(|v| v.abs() < 1e-6), "{:?}", r.xi_star[0]);
        assert_eq!(r.delta_star[0], (-r.d_star[0] / 0.1).exp());
        let s = &r.spikes[0];
        assert!(s.boundary_probes > 0);
        assert_ne!(s.boundary_min.unwrap().compare(&s.psi), Ordering::Less);
        assert!(r.psi_scaled.mantissa < 0.0);
    }

    #[test]
    fn degree_mode_agrees() {
        let ev = ball();
        let r = solve_reduced_system(&ev, &[0.1], &[1.0], &[spec_box()], SolveMode::Degree, &SolveSettings::default()).unwrap();
        assert!((r.d_star[0] - critical_d(0.1, ALPHA4)).abs() < 1e-6);
        assert_eq!(r.degree_certificates.as_ref().unwrap()[0].degree, 1);
    }

    #[test]
    fn excluded_critical_d_gives_boundary_failure() {
        let ev = ball();
        let sb = SpikeBox { d_lo: 50.0, d_hi: 52.0, ..spec_box() };
        let st = SolveSettings { starts: 8, ..SolveSettings::default() };
        let r = solve_reduced_system(&ev, &[0.1], &[1.0], &[sb], SolveMode::Minimization, &st);
        assert!(matches!(r, Err(SpikeError::BoundaryMinimizer(_))), "{r:?}");
    }

    #[test]
    fn argmin_invariant_under_common_mu_scaling() {
        let ev = ball();
        let st = SolveSettings { starts: 8, ..SolveSettings::default() };
        let sb = SpikeBox { d_lo: 40.0, d_hi: 52.0, xi: Box4::cube([0.05, 0.0, -0.05, 0.0], 0.3) };
        let a = solve_reduced_system(&ev, &[0.5], &[1.0], &[sb], SolveMode::Minimization, &st).unwrap();
        let b = solve_reduced_system(&ev, &[0.5], &[3.7], &[sb], SolveMode::Minimization, &st).unwrap();
        assert!((a.d_star[0] - b.d_star[0]).abs() < 1e-9);
        for k in 0..4 {
            assert!((a.xi_star[0][k] - b.xi_star[0][k]).abs() < 1e-9);
        }
        assert!((a.psi_scaled.mantissa / b.psi_scaled.mantissa - 3.7).abs() < 1e-6);
    }

    #[test]
    fn overlapping_boxes_rejected_with_eta() {
        let ev = ball();
        let st = SolveSettings { eta: Some(0.2), ..SolveSettings::default() };
        let b1 = SpikeBox { xi: Box4::cube([-0.2, 0.0, 0.0, 0.0], 0.1), ..spec_box() };
        let b2 = SpikeBox { xi: Box4::cube([0.1, 0.0, 0.0, 0.0], 0.1), ..spec_box() };
        let r = solve_reduced_system(&ev, &[0.1, 0.1], &[1.0, 1.0], &[b1, b2], SolveMode::Minimization, &st);
        assert!(matches!(r, Err(SpikeError::Precondition(_))));
    }
}
