//! Critical points of τ by multistart damped Newton on ∇τ.

use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpikeError};
use crate::geometry::{to_array, Box4, Point4};
use crate::quadrature::qmc::halton;

use super::RobinEvaluator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Min,
    Max,
    Saddle,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub point: [f64; 4],
    /// |∇τ| at the point.
    pub grad_residual: f64,
    /// Ascending eigenvalues of Hess τ.
    pub eigenvalues: [f64; 4],
    pub classification: Classification,
    /// sign(det Hess τ), 0 when degenerate.
    pub index_sign: i32,
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonSettings {
    pub max_iter: usize,
    /// Convergence threshold on |∇τ| relative to τ(x)/inradius.
    pub grad_tol: f64,
    /// Points closer than this fraction of the inradius are merged.
    pub dedup_tol: f64,
    /// Eigenvalues below this fraction of the largest magnitude count as zero.
    pub degeneracy: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self { max_iter: 60, grad_tol: 1e-7, dedup_tol: 1e-5, degeneracy: 1e-6 }
    }
}

/// Checks that the box center is interior. Searches run on the part of the box
/// where the difference stencils fit inside the domain.
pub fn check_box(ev: &RobinEvaluator, bx: &Box4) -> Result<()> {
    let c = bx.center();
    if (0..4).any(|k| !(bx.hi[k] > bx.lo[k])) {
        return Err(SpikeError::Precondition("box has empty extent".into()));
    }
    if ev.domain().margin(&c) < ev.stencil_margin() {
        return Err(SpikeError::Precondition(format!("box center {:?} is not interior", to_array(&c))));
    }
    Ok(())
}

fn classify(h: &Matrix4<f64>, degeneracy: f64) -> ([f64; 4], Classification, i32) {
    let eig = SymmetricEigen::new(*h);
    let mut ev: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    let big = ev.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let eigenvalues = [ev[0], ev[1], ev[2], ev[3]];
    if big == 0.0 || ev.iter().any(|v| v.abs() <= degeneracy * big) {
        return (eigenvalues, Classification::Degenerate, 0);
    }
    let neg = ev.iter().filter(|v| **v < 0.0).count();
    let class = match neg {
        0 => Classification::Min,
        4 => Classification::Max,
        _ => Classification::Saddle,
    };
    (eigenvalues, class, if neg % 2 == 0 { 1 } else { -1 })
}

/// Damped Newton from one start. Returns None when the iteration leaves the box
/// or fails to converge.
pub fn newton_from(ev: &RobinEvaluator, bx: &Box4, start: Point4, st: &NewtonSettings) -> Option<CriticalPoint> {
    let slack = (0..4).map(|k| bx.width(k)).fold(0.0, f64::max) * 0.05;
    let allowed = Box4::new(bx.lo.map(|v| v - slack), bx.hi.map(|v| v + slack));
    let safe = |p: &Point4| allowed.contains(p) && ev.domain().margin(p) >= ev.stencil_margin();
    let inr = ev.domain().inradius();
    let mut x = start;
    if !safe(&x) {
        return None;
    }
    let (mut g, mut h) = ev.robin_grad_hess_coarse(&x).ok()?;
    // Coarse phase: Newton with backtracking on |∇τ|.
    for _ in 0..st.max_iter {
        let scale = ev.robin(&x).ok()? / inr;
        if g.norm() <= 1e-3 * st.grad_tol.sqrt() * scale {
            break;
        }
        let step = h.lu().solve(&(-g)).filter(|s| s.iter().all(|v| v.is_finite())).unwrap_or(-g / scale * inr * inr);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let cand = x + step * t;
            if safe(&cand) {
                if let Ok(gn) = ev.robin_grad_coarse(&cand) {
                    if gn.norm() < (1.0 - 1e-4 * t) * g.norm() {
                        x = cand;
                        g = gn;
                        h = ev.robin_grad_hess_coarse(&x).ok()?.1;
                        accepted = true;
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    // Fine phase: extrapolated gradient with the coarse Hessian.
    let mut gf = ev.robin_grad(&x).ok()?;
    for _ in 0..6 {
        let scale = ev.robin(&x).ok()? / inr;
        if gf.norm() <= 0.01 * st.grad_tol * scale {
            break;
        }
        let step = h.lu().solve(&(-gf))?;
        let cand = x + step;
        if !safe(&cand) {
            return None;
        }
        let gn = ev.robin_grad(&cand).ok()?;
        if gn.norm() >= gf.norm() {
            break;
        }
        x = cand;
        gf = gn;
        h = ev.robin_grad_hess_coarse(&x).ok()?.1;
    }
    let tau = ev.robin(&x).ok()?;
    if gf.norm() > st.grad_tol * tau / inr || !bx.contains(&x) {
        return None;
    }
    let hess = ev.robin_hess(&x).ok()?;
    let (eigenvalues, classification, index_sign) = classify(&hess, st.degeneracy);
    Some(CriticalPoint { point: to_array(&x), grad_residual: gf.norm(), eigenvalues, classification, index_sign, tau })
}

/// Merges points closer than the dedup tolerance, keeping the smaller residual.
pub fn deduplicate(points: Vec<CriticalPoint>, tol: f64) -> Vec<CriticalPoint> {
    let mut out: Vec<CriticalPoint> = Vec::new();
    for p in points {
        let pv = Vector4::from(p.point);
        match out.iter_mut().find(|q| (Vector4::from(q.point) - pv).norm() < tol) {
            Some(q) if p.grad_residual < q.grad_residual => *q = p,
            Some(_) => {}
            None => out.push(p),
        }
    }
    out.sort_by(|a, b| a.point.partial_cmp(&b.point).unwrap_or(std::cmp::Ordering::Equal));
    out
}

/// Runs Newton from every start in parallel and deduplicates the zeros found.
pub fn zeros_from_starts(ev: &RobinEvaluator, bx: &Box4, starts: &[Point4], st: &NewtonSettings) -> Vec<CriticalPoint> {
    let found: Vec<CriticalPoint> = starts.par_iter().filter_map(|s| newton_from(ev, bx, *s, st)).collect();
    deduplicate(found, st.dedup_tol * ev.domain().inradius())
}

/// Multistart search in each box; starts are Halton points including the box center.
pub fn find_robin_critical_points(
    ev: &RobinEvaluator,
    boxes: &[Box4],
    starts_per_box: usize,
    st: &NewtonSettings,
) -> Result<Vec<CriticalPoint>> {
    let mut all = Vec::new();
    for bx in boxes {
        check_box(ev, bx)?;
        let mut starts = vec![bx.center()];
        starts.extend((1..starts_per_box).map(|i| bx.map_unit(halton(i as u64))));
        all.extend(zeros_from_starts(ev, bx, &starts, st));
    }
    Ok(deduplicate(all, st.dedup_tol * ev.domain().inradius()))
}
