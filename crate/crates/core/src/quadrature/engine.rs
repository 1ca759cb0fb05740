//! Integration over Ω of integrands concentrated at a few spike centers.
//!
//! Each spike ball B(ξ, s) is integrated in the rescaled variable y = ξ + δx:
//! composite Gauss–Legendre in u = ln(1 + |x|) times a spherical design. The rest
//! of Ω uses randomly shifted Halton points, or a polar rule when the domain is a
//! ball with a single spike at its center.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::OMEGA3;
use crate::domain::{DomainDescriptor, DomainKind};
use crate::error::{Result, SpikeError};
use crate::geometry::{pairwise_sum, point, to_array, Point4};

use super::adaptive::{gauss_legendre, Estimate};
use super::qmc::{shifted, shifts};
use super::sphere::SphericalRule;

const PANEL_NODES: usize = 8;
const MAX_PANELS: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Importance centers (ξ, δ).
    pub spike_centers: Vec<([f64; 4], f64)>,
    /// Radius of the balls integrated in rescaled variables; derived when absent.
    pub split_radius: Option<f64>,
    /// Separation parameter bounding the default split radius.
    pub eta: Option<f64>,
    /// Polynomial degree of the angular rule.
    pub inner_degree: usize,
    pub outer_samples: usize,
    /// Independent shifts of the outer point set; the spread gives the error.
    pub outer_batches: usize,
    pub seed: u64,
    /// Relative target for the radial panel refinement and the reported error.
    pub error_target: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            spike_centers: Vec::new(),
            split_radius: None,
            eta: None,
            inner_degree: 7,
            outer_samples: 1 << 15,
            outer_batches: 16,
            seed: 0,
            error_target: 1e-3,
        }
    }
}

impl QuadratureSpec {
    pub fn with_spikes(spikes: &[(Point4, f64)], seed: u64) -> Self {
        Self { spike_centers: spikes.iter().map(|(x, d)| (to_array(x), *d)).collect(), seed, ..Self::default() }
    }

    /// Split radius: the configured value, else min(η/2, half the smallest center
    /// distance, half the smallest boundary distance).
    pub fn resolve_split(&self, domain: &DomainDescriptor) -> Result<f64> {
        if let Some(s) = self.split_radius {
            return Ok(s);
        }
        let mut s = self.eta.map(|e| 0.5 * e).unwrap_or(f64::INFINITY);
        for (i, (a, _)) in self.spike_centers.iter().enumerate() {
            s = s.min(0.5 * domain.margin(&point(*a)));
            for (b, _) in &self.spike_centers[i + 1..] {
                s = s.min(0.5 * (point(*a) - point(*b)).norm());
            }
        }
        if !s.is_finite() {
            return Err(SpikeError::Precondition("split radius needs at least one spike center".into()));
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub inner: Vec<Estimate>,
    pub outer: Estimate,
    pub split_radius: f64,
    /// True when the error exceeds error_target·|value|.
    pub flagged: bool,
}

impl QuadResult {
    pub fn estimate(&self) -> Estimate {
        Estimate::new(self.value, self.error)
    }
}

/// Vector-valued integrand: writes `dim` values at a point.
pub type Integrand<'a> = dyn Fn(&Point4, &mut [f64]) + Sync + 'a;

struct AngularPair {
    a: SphericalRule,
    b: SphericalRule,
}

impl AngularPair {
    fn new(degree: usize) -> Self {
        let a = SphericalRule::for_degree(degree.max(11));
        let b = a.rotated();
        Self { a, b }
    }
}

/// Composite Gauss–Legendre over [lo, hi] of a radial profile whose values come
/// from `shell`, which returns (rule a, rule b) angular integrals per component.
fn radial_panels(
    lo: f64,
    hi: f64,
    panels: usize,
    dim: usize,
    gl: &(Vec<f64>, Vec<f64>),
    shell: &(dyn Fn(f64, &mut [f64], &mut [f64]) + Sync),
) -> (Vec<f64>, Vec<f64>) {
    let h = (hi - lo) / panels as f64;
    let parts: Vec<(Vec<f64>, Vec<f64>)> = (0..panels)
        .into_par_iter()
        .map(|p| {
            let a = lo + h * p as f64;
            let mut sa = vec![0.0; dim];
            let mut sb = vec![0.0; dim];
            let mut va = vec![0.0; dim];
            let mut vb = vec![0.0; dim];
            for (x, w) in gl.0.iter().zip(&gl.1) {
                let u = a + 0.5 * h * (x + 1.0);
                shell(u, &mut va, &mut vb);
                for k in 0..dim {
                    sa[k] += 0.5 * h * w * va[k];
                    sb[k] += 0.5 * h * w * vb[k];
                }
            }
            (sa, sb)
        })
        .collect();
    let col = |k: usize, b: bool| pairwise_sum(&parts.iter().map(|p| if b { p.1[k] } else { p.0[k] }).collect::<Vec<_>>());
    ((0..dim).map(|k| col(k, false)).collect(), (0..dim).map(|k| col(k, true)).collect())
}

/// Refines panels until the radial change is below `rel`; error = radial change + angular spread.
fn radial_integral(
    lo: f64,
    hi: f64,
    dim: usize,
    rel: f64,
    shell: &(dyn Fn(f64, &mut [f64], &mut [f64]) + Sync),
) -> Vec<Estimate> {
    let gl = gauss_legendre(PANEL_NODES);
    let mut panels = 8;
    let (mut pa, mut pb) = radial_panels(lo, hi, panels, dim, &gl, shell);
    loop {
        panels *= 2;
        let (a, b) = radial_panels(lo, hi, panels, dim, &gl, shell);
        let change: Vec<f64> = (0..dim).map(|k| (0.5 * (a[k] + b[k]) - 0.5 * (pa[k] + pb[k])).abs()).collect();
        let done = (0..dim).all(|k| change[k] <= rel * (0.5 * (a[k] + b[k])).abs() || change[k] == 0.0);
        if done || panels >= MAX_PANELS {
            return (0..dim)
                .map(|k| Estimate::new(0.5 * (a[k] + b[k]), change[k] + 0.5 * (a[k] - b[k]).abs()))
                .collect();
        }
        pa = a;
        pb = b;
    }
}

fn angular(rule: &SphericalRule, center: &Point4, rad: f64, f: &Integrand, out: &mut [f64], tmp: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let y = center + point(*p) * rad;
        f(&y, tmp);
        for (o, t) in out.iter_mut().zip(tmp.iter()) {
            *o += w * t;
        }
    }
}

/// ∫ over B(ξ, s) of `f` in the variable y = ξ + δx, with |x| = e^u − 1.
fn spike_ball(xi: &Point4, delta: f64, s: f64, dim: usize, pair: &AngularPair, rel: f64, f: &Integrand) -> Vec<Estimate> {
    let top = (s / delta).ln_1p();
    let shell = |u: f64, va: &mut [f64], vb: &mut [f64]| {
        let t = u.exp_m1();
        let jac = OMEGA3 * delta.powi(4) * t.powi(3) * (t + 1.0);
        let mut tmp = vec![0.0; dim];
        angular(&pair.a, xi, delta * t, f, va, &mut tmp);
        angular(&pair.b, xi, delta * t, f, vb, &mut tmp);
        va.iter_mut().for_each(|v| *v *= jac);
        vb.iter_mut().for_each(|v| *v *= jac);
    };
    // ψ^0 changes sign at |x| = 1; keep that radius on a panel boundary.
    let mid = 2f64.ln().min(top);
    let inner = radial_integral(0.0, mid, dim, rel, &shell);
    if mid == top {
        return inner;
    }
    let outer = radial_integral(mid, top, dim, rel, &shell);
    inner.into_iter().zip(outer).map(|(a, b)| a + b).collect()
}

/// ∫ over B(c, R) \ B(c, s) in polar coordinates, with |y − c| = e^u.
fn polar_shell(c: &Point4, s: f64, r: f64, dim: usize, pair: &AngularPair, rel: f64, f: &Integrand) -> Vec<Estimate> {
    let shell = |u: f64, va: &mut [f64], vb: &mut [f64]| {
        let t = u.exp();
        let jac = OMEGA3 * t.powi(4);
        let mut tmp = vec![0.0; dim];
        angular(&pair.a, c, t, f, va, &mut tmp);
        angular(&pair.b, c, t, f, vb, &mut tmp);
        va.iter_mut().for_each(|v| *v *= jac);
        vb.iter_mut().for_each(|v| *v *= jac);
    };
    radial_integral(s.ln(), r.ln(), dim, rel, &shell)
}

fn outer_qmc(domain: &DomainDescriptor, spikes: &[(Point4, f64)], s: f64, spec: &QuadratureSpec, dim: usize, f: &Integrand) -> Vec<Estimate> {
    let bb = domain.bounding_box();
    let vol = bb.volume();
    let batches = spec.outer_batches.max(2);
    let per = (spec.outer_samples / batches).max(1);
    let sh = shifts(spec.seed, batches);
    let est: Vec<Vec<f64>> = sh
        .par_iter()
        .map(|shift| {
            let mut vals: Vec<Vec<f64>> = vec![Vec::with_capacity(per); dim];
            let mut tmp = vec![0.0; dim];
            for i in 1..=per as u64 {
                let x = bb.map_unit(shifted(i, shift));
                if !domain.contains(&x) || spikes.iter().any(|(c, _)| (x - c).norm() < s) {
                    continue;
                }
                f(&x, &mut tmp);
                for k in 0..dim {
                    vals[k].push(tmp[k]);
                }
            }
            vals.iter().map(|v| vol * pairwise_sum(v) / per as f64).collect()
        })
        .collect();
    (0..dim)
        .map(|k| {
            let xs: Vec<f64> = est.iter().map(|e| e[k]).collect();
            let n = xs.len() as f64;
            let mean = pairwise_sum(&xs) / n;
            let var = pairwise_sum(&xs.iter().map(|x| (x - mean).powi(2)).collect::<Vec<_>>()) / (n - 1.0);
            Estimate::new(mean, 3.0 * (var / n).sqrt())
        })
        .collect()
}

/// Integrates a vector-valued integrand over Ω.
pub fn integrate_vec(domain: &DomainDescriptor, spec: &QuadratureSpec, dim: usize, f: &Integrand) -> Result<Vec<QuadResult>> {
    let s = spec.resolve_split(domain)?;
    let spikes: Vec<(Point4, f64)> = spec.spike_centers.iter().map(|(x, d)| (point(*x), *d)).collect();
    for (i, (c, d)) in spikes.iter().enumerate() {
        if domain.margin(c) < s {
            return Err(SpikeError::Precondition(format!("split ball around {:?} leaves the domain", to_array(c))));
        }
        if *d > 0.1 * s {
            return Err(SpikeError::Precondition(format!("delta {d} exceeds split radius {s} / 10")));
        }
        for (c2, _) in &spikes[i + 1..] {
            if (c - c2).norm() < 2.0 * s {
                return Err(SpikeError::Precondition("split balls overlap".into()));
            }
        }
    }
    let pair = AngularPair::new(spec.inner_degree);
    let rel = (spec.error_target * 1e-3).max(1e-12);
    let inner: Vec<Vec<Estimate>> = spikes.iter().map(|(c, d)| spike_ball(c, *d, s, dim, &pair, rel, f)).collect();
    let outer = match domain.kind {
        DomainKind::Ball { center, radius } if spikes.len() == 1 && to_array(&spikes[0].0) == center => {
            polar_shell(&point(center), s, radius, dim, &pair, rel, f)
        }
        _ => outer_qmc(domain, &spikes, s, spec, dim, f),
    };
    Ok((0..dim)
        .map(|k| {
            let inner_k: Vec<Estimate> = inner.iter().map(|v| v[k]).collect();
            let total = inner_k.iter().fold(outer[k], |a, e| a + *e);
            QuadResult {
                value: total.value,
                error: total.error,
                inner: inner_k,
                outer: outer[k],
                split_radius: s,
                flagged: total.error > spec.error_target * total.value.abs(),
            }
        })
        .collect())
}

pub fn integrate(domain: &DomainDescriptor, spec: &QuadratureSpec, f: &(dyn Fn(&Point4) -> f64 + Sync)) -> Result<QuadResult> {
    let g = |x: &Point4, out: &mut [f64]| out[0] = f(x);
    Ok(integrate_vec(domain, spec, 1, &g)?.remove(0))
}
