//! Brouwer degree of ∇τ on a box by zero enumeration.
//!
//! The degree is Σ sign det Hess τ over the zeros found by multistart Newton from
//! grids of increasing resolution. The certificate records the grid level at which
//! the zero set stopped changing and the smallest |∇τ| sampled on the box faces.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpikeError};
use crate::geometry::{point, to_array, Box4, Point4};

use super::critical::{check_box, deduplicate, zeros_from_starts, CriticalPoint, NewtonSettings};
use super::RobinEvaluator;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegreeSettings {
    /// Samples per edge of each face grid.
    pub face_samples: usize,
    /// Required min |∇τ| on the faces, relative to τ(center)/inradius.
    pub boundary_margin: f64,
    pub max_grid_level: usize,
    pub newton: NewtonSettings,
}

impl Default for DegreeSettings {
    fn default() -> Self {
        Self { face_samples: 3, boundary_margin: 1e-3, max_grid_level: 3, newton: NewtonSettings::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeCertificate {
    #[serde(rename = "box")]
    pub bx: Box4,
    pub degree: i32,
    pub zeros: Vec<CriticalPoint>,
    /// Grid level (starts per axis) at which the zero set was last confirmed.
    pub grid_level: usize,
    /// Cumulative zero count after each level.
    pub zeros_per_level: Vec<usize>,
    /// True when the last two levels found the same zeros.
    pub exhaustive: bool,
    pub boundary_min_grad: f64,
    pub boundary_threshold: f64,
    pub boundary_samples: usize,
    /// Face samples skipped because they lie too close to ∂Ω.
    pub clipped_samples: usize,
}

pub(crate) fn face_points(bx: &Box4, n: usize) -> Vec<Point4> {
    let n = n.max(2);
    let mut out = Vec::new();
    for k in 0..4 {
        for side in [bx.lo[k], bx.hi[k]] {
            let others: Vec<usize> = (0..4).filter(|&j| j != k).collect();
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        let mut p = [0.0; 4];
                        p[k] = side;
                        for (&j, &i) in others.iter().zip(&[a, b, c]) {
                            p[j] = bx.lo[j] + bx.width(j) * i as f64 / (n - 1) as f64;
                        }
                        out.push(point(p));
                    }
                }
            }
        }
    }
    out
}

fn grid_starts(bx: &Box4, level: usize) -> Vec<Point4> {
    let mut out = Vec::with_capacity(level.pow(4));
    let u = |i: usize| (i as f64 + 0.5) / level as f64;
    for a in 0..level {
        for b in 0..level {
            for c in 0..level {
                for d in 0..level {
                    out.push(bx.map_unit([u(a), u(b), u(c), u(d)]));
                }
            }
        }
    }
    out
}

/// Smallest |∇τ| over face samples inside the safe region; returns (min, used, clipped).
pub fn boundary_gradient_margin(ev: &RobinEvaluator, bx: &Box4, samples: usize) -> (f64, usize, usize) {
    let pts = face_points(bx, samples);
    let vals: Vec<Option<f64>> = pts
        .par_iter()
        .map(|p| {
            if ev.domain().margin(p) < ev.stencil_margin() {
                return None;
            }
            ev.robin_grad_hess_coarse(p).ok().map(|(g, _)| g.norm())
        })
        .collect();
    let used = vals.iter().flatten().count();
    let min = vals.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
    (min, used, pts.len() - used)
}

pub fn brouwer_degree(ev: &RobinEvaluator, bx: &Box4, st: &DegreeSettings) -> Result<DegreeCertificate> {
    check_box(ev, bx)?;
    let center = bx.center();
    let threshold = st.boundary_margin * ev.robin(&center)? / ev.domain().inradius();
    let (min_grad, used, clipped) = boundary_gradient_margin(ev, bx, st.face_samples);
    if used == 0 || !(min_grad >= threshold) {
        return Err(SpikeError::NotCertifiable(format!(
            "min |∇τ| on the faces of {:?}..{:?} is {min_grad:.3e}, below {threshold:.3e}",
            bx.lo, bx.hi
        )));
    }
    let tol = st.newton.dedup_tol * ev.domain().inradius();
    let mut zeros: Vec<CriticalPoint> = Vec::new();
    let mut counts = Vec::new();
    let mut exhaustive = false;
    let mut level = 1;
    while level <= st.max_grid_level.max(2) {
        let found = zeros_from_starts(ev, bx, &grid_starts(bx, level), &st.newton);
        zeros.extend(found);
        zeros = deduplicate(zeros, tol);
        counts.push(zeros.len());
        if level >= 2 && counts[level - 1] == counts[level - 2] {
            exhaustive = true;
            break;
        }
        level += 1;
    }
    let grid_level = level.min(st.max_grid_level.max(2));
    if let Some(z) = zeros.iter().find(|z| z.index_sign == 0) {
        return Err(SpikeError::NotCertifiable(format!("degenerate zero at {:?}", z.point)));
    }
    Ok(DegreeCertificate {
        bx: *bx,
        degree: zeros.iter().map(|z| z.index_sign).sum(),
        zeros,
        grid_level,
        zeros_per_level: counts,
        exhaustive,
        boundary_min_grad: min_grad,
        boundary_threshold: threshold,
        boundary_samples: used,
        clipped_samples: clipped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub region: Box4,
    pub zeros: Vec<CriticalPoint>,
    pub certificates: Vec<DegreeCertificate>,
    /// Zeros whose surrounding box could not be certified, with the reason.
    pub failures: Vec<([f64; 4], String)>,
}

impl ScanReport {
    pub fn nonzero_boxes(&self) -> usize {
        self.certificates.iter().filter(|c| c.degree != 0).count()
    }
}

/// Finds zeros of ∇τ in `region`, then certifies a small box around each.
pub fn scan_degrees(ev: &RobinEvaluator, region: &Box4, level: usize, st: &DegreeSettings) -> Result<ScanReport> {
    check_box(ev, region)?;
    let inr = ev.domain().inradius();
    let zeros = zeros_from_starts(ev, region, &grid_starts(region, level.max(1)), &st.newton);
    let mut certificates = Vec::new();
    let mut failures = Vec::new();
    for (i, z) in zeros.iter().enumerate() {
        let p = point(z.point);
        let nearest = zeros
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, q)| (point(q.point) - p).norm())
            .fold(f64::INFINITY, f64::min);
        let room = ev.domain().margin(&p) - ev.stencil_margin();
        let half = (0.4 * nearest).min(0.25 * room).min(0.1 * inr);
        let bx = Box4::cube(to_array(&p), half);
        match brouwer_degree(ev, &bx, st) {
            Ok(c) => certificates.push(c),
            Err(e) => failures.push((z.point, e.to_string())),
        }
    }
    Ok(ScanReport { region: *region, zeros, certificates, failures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainDescriptor;

    #[test]
    fn ball_box_has_degree_one_and_is_stable() {
        let ev = RobinEvaluator::new(DomainDescriptor::unit_ball()).unwrap();
        let st = DegreeSettings::default();
        let c = brouwer_degree(&ev, &Box4::cube([0.0; 4], 0.5), &st).unwrap();
        assert_eq!(c.degree, 1);
        assert!(c.exhaustive);
        assert!(c.clipped_samples > 0);
        for f in [0.98, 1.02] {
            let b = Box4::new([-0.5 * f, -0.5, -0.5 * f, -0.5], [0.5, 0.5 * f, 0.5, 0.5 * f]);
            assert_eq!(brouwer_degree(&ev, &b, &st).unwrap().degree, 1);
        }
    }

    #[test]
    fn zero_free_box_has_degree_zero() {
        let ev = RobinEvaluator::new(DomainDescriptor::unit_ball()).unwrap();
        let bx = Box4::new([0.3, 0.3, -0.1, -0.1], [0.6, 0.6, 0.1, 0.1]);
        let c = brouwer_degree(&ev, &bx, &DegreeSettings::default()).unwrap();
        assert_eq!(c.degree, 0);
        assert!(c.zeros.is_empty());
    }

    #[test]
    fn zero_on_face_is_not_certifiable() {
        let ev = RobinEvaluator::new(DomainDescriptor::unit_ball()).unwrap();
        let bx = Box4::new([0.0, -0.2, -0.2, -0.2], [0.4, 0.2, 0.2, 0.2]);
        assert!(matches!(
            brouwer_degree(&ev, &bx, &DegreeSettings::default()),
            Err(SpikeError::NotCertifiable(_))
        ));
    }
}
