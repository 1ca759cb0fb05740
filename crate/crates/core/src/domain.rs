//! Bounded domains of R⁴ that are rotationally symmetric about the x₁ axis.
//!
//! A domain is described by its meridian profile: a curve in the half-plane
//! (z, r) = (x₁ − o₁, |x' − o'|) made of circular arcs and cylinder lines.
//! Distances in the half-plane equal four-dimensional distances, so the signed
//! margin is exact.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpikeError};
use crate::geometry::{Box4, Point4};
use crate::quadrature::qmc::halton;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Segment {
    /// Points (cz + R cos θ, R sin θ) for θ from `theta0` to `theta1`.
    /// `hole` marks a sphere bounding the domain from inside.
    Arc { cz: f64, radius: f64, theta0: f64, theta1: f64, hole: bool },
    /// Cylinder side r = `r` for z from `z0` to `z1`.
    Line { z0: f64, z1: f64, r: f64 },
}

impl Segment {
    pub fn length(&self) -> f64 {
        match *self {
            Segment::Arc { radius, theta0, theta1, .. } => radius * (theta1 - theta0).abs(),
            Segment::Line { z0, z1, .. } => (z1 - z0).abs(),
        }
    }

    /// Characteristic scale used for charge offsets and spacing.
    pub fn scale(&self) -> f64 {
        match *self {
            Segment::Arc { radius, .. } => radius,
            Segment::Line { r, .. } => r,
        }
    }

    /// Point and outward unit normal at arclength `s`.
    pub fn point_normal(&self, s: f64) -> ((f64, f64), (f64, f64)) {
        match *self {
            Segment::Arc { cz, radius, theta0, theta1, hole } => {
                let t = theta0 + (theta1 - theta0).signum() * s / radius;
                let (c, sn) = (t.cos(), t.sin().max(0.0));
                let sign = if hole { -1.0 } else { 1.0 };
                ((cz + radius * c, radius * sn), (sign * c, sign * sn))
            }
            Segment::Line { z0, z1, r } => {
                let z = z0 + (z1 - z0).signum() * s;
                ((z, r), (0.0, 1.0))
            }
        }
    }

    pub fn distance(&self, z: f64, r: f64) -> f64 {
        match *self {
            Segment::Arc { cz, radius, theta0, theta1, .. } => {
                let phi = r.atan2(z - cz);
                let (lo, hi) = if theta0 <= theta1 { (theta0, theta1) } else { (theta1, theta0) };
                if phi >= lo && phi <= hi {
                    ((z - cz).hypot(r) - radius).abs()
                } else {
                    let e0 = (cz + radius * lo.cos() - z).hypot(radius * lo.sin() - r);
                    let e1 = (cz + radius * hi.cos() - z).hypot(radius * hi.sin() - r);
                    e0.min(e1)
                }
            }
            Segment::Line { z0, z1, r: rl } => {
                let zc = z.clamp(z0.min(z1), z0.max(z1));
                (z - zc).hypot(r - rl)
            }
        }
    }
}

/// One profile piece plus the junction scales at which sampling is graded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePiece {
    pub segment: Segment,
    pub grade_start: Option<f64>,
    pub grade_end: Option<f64>,
}

/// Sphere on the symmetry axis that is part of the boundary; used for Kelvin images.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reflector {
    pub cz: f64,
    pub radius: f64,
    pub hole: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    Ball { radius: f64 },
    /// Two balls of radius `radius` centered at ±`offset` on the axis joined by a
    /// cylinder of radius `handle`.
    Dumbbell { radius: f64, offset: f64, handle: f64 },
    /// Ball of radius `outer` minus the closed ball of radius `hole_radius` at `hole_offset`.
    Perforated { outer: f64, hole_offset: f64, hole_radius: f64 },
}

impl Shape {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SpikeError::Domain(m.to_string()));
        match *self {
            Shape::Ball { radius } if !(radius > 0.0) => bad("ball radius must be positive"),
            Shape::Dumbbell { radius, offset, handle } => {
                if !(radius > 0.0 && handle > 0.0 && handle < radius) {
                    bad("dumbbell needs 0 < handle < radius")
                } else if !(offset > radius) {
                    bad("dumbbell lobes must be disjoint (offset > radius)")
                } else {
                    Ok(())
                }
            }
            Shape::Perforated { outer, hole_offset, hole_radius } => {
                if !(outer > 0.0 && hole_radius > 0.0 && hole_offset.abs() + hole_radius < outer) {
                    bad("hole must lie strictly inside the outer ball")
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn inside(&self, z: f64, r: f64) -> bool {
        match *self {
            Shape::Ball { radius } => z * z + r * r < radius * radius,
            Shape::Dumbbell { radius, offset, handle } => {
                let r2 = radius * radius;
                (z - offset).powi(2) + r * r < r2
                    || (z + offset).powi(2) + r * r < r2
                    || (z.abs() <= offset && r < handle)
            }
            Shape::Perforated { outer, hole_offset, hole_radius } => {
                z * z + r * r < outer * outer && (z - hole_offset).powi(2) + r * r > hole_radius * hole_radius
            }
        }
    }

    pub fn profile(&self) -> Vec<ProfilePiece> {
        let plain = |segment| ProfilePiece { segment, grade_start: None, grade_end: None };
        match *self {
            Shape::Ball { radius } => {
                vec![plain(Segment::Arc { cz: 0.0, radius, theta0: 0.0, theta1: PI, hole: false })]
            }
            Shape::Dumbbell { radius, offset, handle } => {
                let tj = (handle / radius).asin();
                let zj = offset - (radius * radius - handle * handle).sqrt();
                vec![
                    ProfilePiece {
                        segment: Segment::Arc { cz: offset, radius, theta0: 0.0, theta1: PI - tj, hole: false },
                        grade_start: None,
                        grade_end: Some(handle),
                    },
                    ProfilePiece {
                        segment: Segment::Line { z0: zj, z1: -zj, r: handle },
                        grade_start: Some(handle),
                        grade_end: Some(handle),
                    },
                    ProfilePiece {
                        segment: Segment::Arc { cz: -offset, radius, theta0: tj, theta1: PI, hole: false },
                        grade_start: Some(handle),
                        grade_end: None,
                    },
                ]
            }
            Shape::Perforated { outer, hole_offset, hole_radius } => vec![
                plain(Segment::Arc { cz: 0.0, radius: outer, theta0: 0.0, theta1: PI, hole: false }),
                plain(Segment::Arc { cz: hole_offset, radius: hole_radius, theta0: 0.0, theta1: PI, hole: true }),
            ],
        }
    }

    pub fn reflectors(&self) -> Vec<Reflector> {
        match *self {
            Shape::Ball { radius } => vec![Reflector { cz: 0.0, radius, hole: false }],
            Shape::Dumbbell { radius, offset, .. } => vec![
                Reflector { cz: offset, radius, hole: false },
                Reflector { cz: -offset, radius, hole: false },
            ],
            Shape::Perforated { outer, hole_offset, hole_radius } => vec![
                Reflector { cz: 0.0, radius: outer, hole: false },
                Reflector { cz: hole_offset, radius: hole_radius, hole: true },
            ],
        }
    }

    /// Radius of a ball that fits in the thickest part; sets finite-difference scales.
    pub fn inradius(&self) -> f64 {
        match *self {
            Shape::Ball { radius } => radius,
            Shape::Dumbbell { radius, .. } => radius,
            Shape::Perforated { outer, hole_offset, hole_radius } => {
                0.5 * (outer - hole_radius + hole_offset.abs())
            }
        }
    }

    /// Bounding half-extents (along the axis, across it).
    fn extents(&self) -> (f64, f64, f64) {
        match *self {
            Shape::Ball { radius } => (-radius, radius, radius),
            Shape::Dumbbell { radius, offset, .. } => (-offset - radius, offset + radius, radius),
            Shape::Perforated { outer, .. } => (-outer, outer, outer),
        }
    }
}

/// Discretization controls for collocation solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollocationSettings {
    /// Charge distance from the boundary as a fraction of the local scale.
    pub charge_offset: f64,
    /// Meridian cells per profile segment away from junctions.
    pub resolution: usize,
    /// First cell at a graded junction, relative to the junction scale.
    pub grading_first: f64,
    /// Geometric growth factor of graded cells.
    pub grading_ratio: f64,
    /// Relative singular-value cutoff.
    pub svd_cutoff: f64,
    /// Largest acceptable boundary defect relative to the data scale.
    pub residual_threshold: f64,
}

impl Default for CollocationSettings {
    fn default() -> Self {
        Self {
            charge_offset: 0.3,
            resolution: 150,
            grading_first: 1e-3,
            grading_ratio: 1.15,
            svd_cutoff: 1e-12,
            residual_threshold: 1e-3,
        }
    }
}

/// Meridian collocation node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeridianNode {
    pub z: f64,
    pub r: f64,
    pub nz: f64,
    pub nr: f64,
    /// Arclength of the cell.
    pub ds: f64,
    /// Local scale for the charge offset.
    pub scale: f64,
}

/// Four-dimensional boundary node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceNode {
    pub x: Point4,
    pub normal: Point4,
    pub weight: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DomainKind {
    /// Closed-form Green function available.
    Ball { center: [f64; 4], radius: f64 },
    /// Green function from boundary collocation.
    Collocation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainDescriptor {
    pub kind: DomainKind,
    pub shape: Shape,
    /// Point of the symmetry axis taken as z = 0.
    pub origin: [f64; 4],
    pub settings: CollocationSettings,
}

impl DomainDescriptor {
    pub fn ball(center: [f64; 4], radius: f64) -> Result<Self> {
        let shape = Shape::Ball { radius };
        shape.validate()?;
        Ok(Self {
            kind: DomainKind::Ball { center, radius },
            shape,
            origin: center,
            settings: CollocationSettings::default(),
        })
    }

    pub fn unit_ball() -> Self {
        Self::ball([0.0; 4], 1.0).expect("unit ball is valid")
    }

    /// A ball handled by the collocation solver instead of the closed form.
    pub fn collocation_ball(center: [f64; 4], radius: f64) -> Result<Self> {
        Self::collocation(Shape::Ball { radius }, center)
    }

    /// Two unit-type lobes of radius `radius` centered at ±`offset`·e₁ joined by a handle of radius `handle`.
    pub fn dumbbell(radius: f64, offset: f64, handle: f64) -> Result<Self> {
        Self::collocation(Shape::Dumbbell { radius, offset, handle }, [0.0; 4])
    }

    /// Ball of radius `outer` at the origin with the ball B(hole_offset·e₁, hole_radius) removed.
    pub fn perforated(outer: f64, hole_offset: f64, hole_radius: f64) -> Result<Self> {
        Self::collocation(Shape::Perforated { outer, hole_offset, hole_radius }, [0.0; 4])
    }

    pub fn collocation(shape: Shape, origin: [f64; 4]) -> Result<Self> {
        shape.validate()?;
        Ok(Self { kind: DomainKind::Collocation, shape, origin, settings: CollocationSettings::default() })
    }

    pub fn with_settings(mut self, settings: CollocationSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn is_analytic_ball(&self) -> bool {
        matches!(self.kind, DomainKind::Ball { .. })
    }

    /// Meridian coordinates (z, r) and the unit direction of x' − o' (None on the axis).
    pub fn meridian(&self, x: &Point4) -> (f64, f64, Option<[f64; 3]>) {
        let o = &self.origin;
        let z = x[0] - o[0];
        let v = [x[1] - o[1], x[2] - o[2], x[3] - o[3]];
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let dir = if r > 0.0 { Some([v[0] / r, v[1] / r, v[2] / r]) } else { None };
        (z, r, dir)
    }

    /// Inverse of [`Self::meridian`] for a given transverse direction.
    pub fn from_meridian(&self, z: f64, r: f64, dir: [f64; 3]) -> Point4 {
        let o = &self.origin;
        Point4::new(o[0] + z, o[1] + r * dir[0], o[2] + r * dir[1], o[3] + r * dir[2])
    }

    /// Distance to the boundary in the meridian half-plane, without sign.
    pub fn boundary_distance_meridian(&self, z: f64, r: f64) -> f64 {
        self.shape
            .profile()
            .iter()
            .map(|p| p.segment.distance(z, r))
            .fold(f64::INFINITY, f64::min)
    }

    /// Signed distance to ∂Ω: positive inside.
    pub fn margin(&self, x: &Point4) -> f64 {
        let (z, r, _) = self.meridian(x);
        self.margin_meridian(z, r)
    }

    pub fn margin_meridian(&self, z: f64, r: f64) -> f64 {
        let d = self.boundary_distance_meridian(z, r);
        if self.shape.inside(z, r) {
            d
        } else {
            -d
        }
    }

    pub fn contains(&self, x: &Point4) -> bool {
        self.margin(x) > 0.0
    }

    pub fn inradius(&self) -> f64 {
        self.shape.inradius()
    }

    pub fn bounding_box(&self) -> Box4 {
        let (zlo, zhi, rr) = self.shape.extents();
        let o = &self.origin;
        Box4::new(
            [o[0] + zlo, o[1] - rr, o[2] - rr, o[3] - rr],
            [o[0] + zhi, o[1] + rr, o[2] + rr, o[3] + rr],
        )
    }

    pub fn reflectors(&self) -> Vec<Reflector> {
        self.shape.reflectors()
    }

    /// Collocation nodes (cell midpoints) and held-out nodes (interior cell edges) on the profile.
    pub fn meridian_nodes(&self, resolution: usize) -> (Vec<MeridianNode>, Vec<MeridianNode>) {
        self.meridian_nodes_with(|len| len / resolution as f64)
    }

    /// Same with a fixed largest cell length.
    pub fn meridian_nodes_spacing(&self, h: f64) -> (Vec<MeridianNode>, Vec<MeridianNode>) {
        self.meridian_nodes_with(|len| h.min(len / 2.0))
    }

    fn meridian_nodes_with<F: Fn(f64) -> f64>(&self, spacing: F) -> (Vec<MeridianNode>, Vec<MeridianNode>) {
        let st = &self.settings;
        let mut nodes = Vec::new();
        let mut held = Vec::new();
        for piece in self.shape.profile() {
            let seg = piece.segment;
            let len = seg.length();
            let hmax = spacing(len);
            let edges = graded_edges(
                len,
                hmax,
                piece.grade_start.map(|c| st.grading_first * c),
                piece.grade_end.map(|c| st.grading_first * c),
                st.grading_ratio,
            );
            let local = |s: f64| {
                let mut l = seg.scale();
                if let Some(c) = piece.grade_start {
                    l = l.min(s.max(st.grading_first * c)).min(l);
                }
                if let Some(c) = piece.grade_end {
                    l = l.min((len - s).max(st.grading_first * c));
                }
                l
            };
            for w in edges.windows(2) {
                let s = 0.5 * (w[0] + w[1]);
                let ((z, r), (nz, nr)) = seg.point_normal(s);
                nodes.push(MeridianNode { z, r, nz, nr, ds: w[1] - w[0], scale: local(s) });
            }
            for k in 1..edges.len() - 1 {
                let s = edges[k];
                let ((z, r), (nz, nr)) = seg.point_normal(s);
                let ds = 0.5 * (edges[k + 1] - edges[k - 1]);
                held.push(MeridianNode { z, r, nz, nr, ds, scale: local(s) });
            }
        }
        (nodes, held)
    }

    /// Boundary points in R⁴: meridian cells swept over S².
    ///
    /// Spacing is proportional to each segment's scale so small spheres and
    /// large ones get comparable relative resolution. Returns the nodes and the
    /// spacing-to-scale ratio.
    pub fn surface_nodes_scaled(&self, target: usize) -> (Vec<SurfaceNode>, f64) {
        let pieces = self.shape.profile();
        let areas: Vec<f64> = pieces
            .iter()
            .map(|p| {
                let len = p.segment.length();
                let n = 400;
                (0..n)
                    .map(|i| {
                        let ((_, r), _) = p.segment.point_normal((i as f64 + 0.5) * len / n as f64);
                        4.0 * PI * r * r * len / n as f64
                    })
                    .sum::<f64>()
            })
            .collect();
        let load: f64 = pieces.iter().zip(&areas).map(|(p, a)| a / p.segment.scale().powi(3)).sum();
        let kappa = (load / target as f64).cbrt();
        let mut out = Vec::with_capacity(target + 64);
        for piece in &pieces {
            let seg = piece.segment;
            let h = kappa * seg.scale();
            let len = seg.length();
            let cells = (len / h).ceil().max(2.0) as usize;
            let mut carry = 0.0;
            for c in 0..cells {
                let ds = len / cells as f64;
                let s = (c as f64 + 0.5) * ds;
                let ((z, r), (nz, nr)) = seg.point_normal(s);
                let share = 4.0 * PI * r * r * ds / h.powi(3) + carry;
                let k = share.round().max(1.0) as usize;
                carry = share - k as f64;
                let weight = 4.0 * PI * r * r * ds / k as f64;
                for d in fibonacci_sphere(k) {
                    let x = self.from_meridian(z, r, d);
                    let normal = Point4::new(nz, nr * d[0], nr * d[1], nr * d[2]);
                    out.push(SurfaceNode { x, normal, weight, scale: seg.scale() });
                }
            }
        }
        (out, kappa)
    }

    pub fn surface_nodes(&self, target: usize) -> Vec<SurfaceNode> {
        self.surface_nodes_scaled(target).0
    }

    /// |∂Ω| from a fine meridian discretization.
    pub fn surface_area(&self) -> f64 {
        let (mer, _) = self.meridian_nodes(400);
        4.0 * PI * mer.iter().map(|n| n.r * n.r * n.ds).sum::<f64>()
    }

    /// Low-discrepancy interior points at least `tube` away from ∂Ω.
    pub fn interior_grid(&self, n: usize, tube: f64) -> Vec<Point4> {
        let bb = self.bounding_box();
        let mut out = Vec::with_capacity(n);
        let mut i = 1u64;
        while out.len() < n && i < 1_000_000_000 {
            let x = bb.map_unit(halton(i));
            if self.margin(&x) >= tube {
                out.push(x);
            }
            i += 1;
        }
        out
    }
}

/// Cell edges on [0, len]: geometric growth away from graded ends, capped at `hmax`.
fn graded_edges(len: f64, hmax: f64, g0: Option<f64>, g1: Option<f64>, ratio: f64) -> Vec<f64> {
    let ramp = |h0: Option<f64>, limit: f64| -> Vec<f64> {
        let mut out = vec![0.0];
        let mut s = 0.0;
        let mut h = h0.unwrap_or(hmax).min(hmax);
        while s + h < limit {
            s += h;
            out.push(s);
            h = (h * ratio).min(hmax);
        }
        out
    };
    let half = 0.5 * len;
    let left = ramp(g0, half);
    let right = ramp(g1, half);
    let mut e: Vec<f64> = left;
    // Middle section joins the two ramps with a uniform spacing close to hmax.
    let a = *e.last().unwrap();
    let b = len - *right.last().unwrap();
    let cells = ((b - a) / hmax).ceil().max(1.0) as usize;
    for k in 1..cells {
        e.push(a + (b - a) * k as f64 / cells as f64);
    }
    for s in right.iter().rev() {
        e.push(len - s);
    }
    e
}

/// Spherical Fibonacci directions on S².
pub fn fibonacci_sphere(n: usize) -> Vec<[f64; 3]> {
    if n == 1 {
        return vec![[1.0, 0.0, 0.0]];
    }
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let rho = (1.0 - y * y).max(0.0).sqrt();
            let t = golden * i as f64;
            [y, rho * t.cos(), rho * t.sin()]
        })
        .collect()
}
