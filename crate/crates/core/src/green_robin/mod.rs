//! Green function, regular part H and Robin function τ(x) = H(x, x).
//!
//! Balls use the Kelvin closed form. Other domains fit H(·, ξ) by collocation
//! after subtracting Kelvin images of ξ in the spherical parts of the boundary,
//! which removes the near-boundary singular behaviour from the fitted data.

pub mod critical;
pub mod degree;
pub mod kelvin;
pub mod legendre;
pub mod meridian;
pub mod harmonics;

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{Matrix4, Vector4};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use crate::constants::ALPHA4;
use crate::domain::{DomainDescriptor, DomainKind};
use crate::error::{Result, SpikeError};
use crate::geometry::{point, to_array, Point4};

use meridian::{MeridianFit, MeridianSolver, PlaneCharge};

pub use critical::{find_robin_critical_points, Classification, CriticalPoint, NewtonSettings};
pub use degree::{brouwer_degree, scan_degrees, DegreeCertificate, DegreeSettings, ScanReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobinSettings {
    /// Steps of the two central-difference levels, as fractions of the inradius.
    pub fd_steps: [f64; 2],
    /// Smallest admissible distance to ∂Ω, as a fraction of the inradius.
    pub min_margin: f64,
    pub cache_capacity: usize,
}

impl Default for RobinSettings {
    fn default() -> Self {
        Self { fd_steps: [1e-3, 1e-4], min_margin: 1e-3, cache_capacity: 4096 }
    }
}

#[derive(Debug, Clone)]
enum Field {
    Kelvin { center: Point4, radius: f64 },
    Meridian { fit: MeridianFit, dir: Option<[f64; 3]> },
}

/// The harmonic function H(·, ξ) for one source ξ.
#[derive(Debug, Clone)]
pub struct HarmonicCorrector {
    pub source: Point4,
    /// Kelvin images subtracted before fitting: (location, strength).
    pub images: Vec<(Point4, f64)>,
    pub constant: f64,
    /// Max boundary defect on collocation nodes (0 for closed forms).
    pub residual: f64,
    pub held_residual: f64,
    /// Boundary data scale α4/dist(ξ, ∂Ω)² used to normalize residuals.
    pub data_scale: f64,
    field: Field,
}

impl HarmonicCorrector {
    /// Representative exterior charges: images plus one point per ring in the source half-plane.
    pub fn charges(&self, ev: &RobinEvaluator) -> Vec<(Point4, f64)> {
        let mut out = self.images.clone();
        if let (Field::Meridian { fit, dir }, Some(solver)) = (&self.field, &ev.solver) {
            let d = dir.unwrap_or([1.0, 0.0, 0.0]);
            for (j, &(zq, rq)) in solver.charges().iter().enumerate() {
                out.push((ev.domain.from_meridian(zq, rq, d), fit.coefficients[0][j]));
            }
        }
        out
    }

    pub fn relative_residual(&self) -> f64 {
        self.residual / self.data_scale
    }
}

/// τ, ∇τ, Hess τ and G, H for one domain.
pub struct RobinEvaluator {
    domain: DomainDescriptor,
    settings: RobinSettings,
    solver: Option<Arc<MeridianSolver>>,
    correctors: RwLock<HashMap<[u64; 4], Arc<HarmonicCorrector>>>,
    tau_cache: RwLock<HashMap<[u64; 2], f64>>,
}

fn key4(x: &Point4) -> [u64; 4] {
    [x[0].to_bits(), x[1].to_bits(), x[2].to_bits(), x[3].to_bits()]
}

impl RobinEvaluator {
    pub fn new(domain: DomainDescriptor) -> Result<Self> {
        Self::with_settings(domain, RobinSettings::default())
    }

    pub fn with_settings(domain: DomainDescriptor, settings: RobinSettings) -> Result<Self> {
        let solver = match domain.kind {
            DomainKind::Ball { .. } => None,
            DomainKind::Collocation => Some(Arc::new(MeridianSolver::new(&domain)?)),
        };
        Ok(Self {
            domain,
            settings,
            solver,
            correctors: RwLock::new(HashMap::new()),
            tau_cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn domain(&self) -> &DomainDescriptor {
        &self.domain
    }

    pub fn settings(&self) -> &RobinSettings {
        &self.settings
    }

    pub fn solver(&self) -> Option<&MeridianSolver> {
        self.solver.as_deref()
    }

    pub fn solver_arc(&self) -> Option<Arc<MeridianSolver>> {
        self.solver.clone()
    }

    fn check_margin(&self, x: &Point4, margin: f64) -> Result<f64> {
        let m = self.domain.margin(x);
        if m <= 0.0 {
            return Err(SpikeError::Domain(format!("point {:?} lies outside the domain", to_array(x))));
        }
        if m < margin {
            return Err(SpikeError::TooCloseToBoundary { point: to_array(x), distance: m, margin });
        }
        Ok(m)
    }

    pub fn min_margin(&self) -> f64 {
        self.settings.min_margin * self.domain.inradius()
    }

    /// Builds H(·, ξ) by closed form or collocation.
    pub fn build_corrector(&self, xi: &Point4) -> Result<HarmonicCorrector> {
        let m = self.check_margin(xi, self.min_margin())?;
        let data_scale = ALPHA4 / (m * m);
        if let DomainKind::Ball { center, radius } = self.domain.kind {
            return Ok(HarmonicCorrector {
                source: *xi,
                images: kelvin::kelvin_image(&point(center), radius, xi).into_iter().collect(),
                constant: 0.0,
                residual: 0.0,
                held_residual: 0.0,
                data_scale,
                field: Field::Kelvin { center: point(center), radius },
            });
        }
        let solver = self.solver.as_ref().expect("collocation domains carry a solver");
        let (z, r, dir) = self.domain.meridian(xi);
        let mut sources = vec![PlaneCharge { z, r, strength: 1.0 }];
        let mut images = Vec::new();
        let mut constant = 0.0;
        for refl in self.domain.reflectors() {
            let (vz, vr) = (z - refl.cz, r);
            let q = vz * vz + vr * vr;
            if q == 0.0 {
                if !refl.hole {
                    constant += ALPHA4 / (refl.radius * refl.radius);
                }
                continue;
            }
            let s = refl.radius * refl.radius / q;
            let (iz, ir) = (refl.cz + vz * s, vr * s);
            if self.domain.margin_meridian(iz, ir) <= -0.5 * m {
                sources.push(PlaneCharge { z: iz, r: ir, strength: -s });
                images.push((self.domain.from_meridian(iz, ir, dir.unwrap_or([1.0, 0.0, 0.0])), s));
            }
        }
        let fit = solver.fit(&sources, constant, data_scale, r == 0.0)?;
        let threshold = self.domain.settings.residual_threshold;
        if fit.residual > threshold * data_scale {
            return Err(SpikeError::Accuracy {
                what: format!("harmonic corrector at {:?}", to_array(xi)),
                defect: fit.residual / data_scale,
                threshold,
            });
        }
        Ok(HarmonicCorrector {
            source: *xi,
            images,
            constant,
            residual: fit.residual,
            held_residual: fit.held_residual,
            data_scale,
            field: Field::Meridian { fit, dir },
        })
    }

    /// Cached corrector; concurrent inserts of the same key are harmless.
    pub fn corrector(&self, xi: &Point4) -> Result<Arc<HarmonicCorrector>> {
        let key = key4(xi);
        if let Some(c) = self.correctors.read().get(&key) {
            return Ok(c.clone());
        }
        let c = Arc::new(self.build_corrector(xi)?);
        let mut w = self.correctors.write();
        if w.len() >= self.settings.cache_capacity {
            w.clear();
        }
        w.insert(key, c.clone());
        Ok(c)
    }

    fn field_value(&self, c: &HarmonicCorrector, x: &Point4) -> f64 {
        match &c.field {
            Field::Kelvin { center, radius } => kelvin::ball_h(center, *radius, x, &c.source),
            Field::Meridian { fit, dir } => {
                let solver = self.solver.as_ref().expect("collocation domains carry a solver");
                let (z, r, xdir) = self.domain.meridian(x);
                let cos_gamma = match (dir, xdir) {
                    (Some(a), Some(b)) => a[0] * b[0] + a[1] * b[1] + a[2] * b[2],
                    _ => 1.0,
                };
                let mut v = c.constant + solver.evaluate(fit, z, r, cos_gamma);
                for (p, s) in &c.images {
                    v += s * ALPHA4 / (x - p).norm_squared();
                }
                v
            }
        }
    }

    /// H(x, ξ) with the corrector built at ξ.
    pub fn regular_part(&self, x: &Point4, xi: &Point4) -> Result<f64> {
        self.check_margin(x, 0.0)?;
        let c = self.corrector(xi)?;
        Ok(self.field_value(&c, x))
    }

    /// G(x, y) = α4/|x − y|² − H(x, y).
    pub fn green(&self, x: &Point4, y: &Point4) -> Result<f64> {
        let d2 = (x - y).norm_squared();
        if d2 == 0.0 {
            return Err(SpikeError::Singularity("G(x, x) is infinite".into()));
        }
        self.check_margin(x, 0.0)?;
        self.check_margin(y, 0.0)?;
        Ok(ALPHA4 / d2 - self.regular_part(x, y)?)
    }

    /// τ(x) = H(x, x).
    pub fn robin(&self, x: &Point4) -> Result<f64> {
        if let DomainKind::Ball { center, radius } = self.domain.kind {
            self.check_margin(x, self.min_margin())?;
            return Ok(kelvin::ball_tau(&point(center), radius, x));
        }
        // τ is invariant under rotations about the axis: cache by meridian position.
        let (z, r, _) = self.domain.meridian(x);
        let key = [z.to_bits(), r.to_bits()];
        if let Some(&t) = self.tau_cache.read().get(&key) {
            return Ok(t);
        }
        let c = self.build_corrector(x)?;
        let t = self.field_value(&c, x);
        let mut w = self.tau_cache.write();
        if w.len() >= self.settings.cache_capacity {
            w.clear();
        }
        w.insert(key, t);
        Ok(t)
    }

    fn fd_step(&self, level: usize) -> f64 {
        self.settings.fd_steps[level] * self.domain.inradius()
    }

    /// Smallest margin at which ∇τ and Hess τ can be evaluated.
    pub fn stencil_margin(&self) -> f64 {
        self.min_margin() + 2.0 * self.fd_step(0)
    }

    fn grad_at_step(&self, x: &Point4, h: f64) -> Result<Vector4<f64>> {
        let mut g = Vector4::zeros();
        for k in 0..4 {
            let mut p = *x;
            p[k] += h;
            let up = self.robin(&p)?;
            p[k] -= 2.0 * h;
            let dn = self.robin(&p)?;
            g[k] = (up - dn) / (2.0 * h);
        }
        Ok(g)
    }

    fn hess_at_step(&self, x: &Point4, h: f64) -> Result<Matrix4<f64>> {
        let t0 = self.robin(x)?;
        let at = |d: [f64; 4]| -> Result<f64> {
            let p = x + Vector4::new(d[0], d[1], d[2], d[3]) * h;
            self.robin(&p)
        };
        let mut hm = Matrix4::zeros();
        for i in 0..4 {
            let mut e = [0.0; 4];
            e[i] = 1.0;
            let up = at(e)?;
            e[i] = -1.0;
            let dn = at(e)?;
            hm[(i, i)] = (up - 2.0 * t0 + dn) / (h * h);
            for j in i + 1..4 {
                let mut s = 0.0;
                for (si, sj, sign) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                    let mut d = [0.0; 4];
                    d[i] = si;
                    d[j] = sj;
                    s += sign * at(d)?;
                }
                hm[(i, j)] = s / (4.0 * h * h);
                hm[(j, i)] = hm[(i, j)];
            }
        }
        Ok(hm)
    }

    fn check_stencil(&self, x: &Point4) -> Result<()> {
        self.check_margin(x, self.stencil_margin()).map(|_| ())
    }

    /// ∇τ by central differences at two steps with one Richardson level.
    pub fn robin_grad(&self, x: &Point4) -> Result<Vector4<f64>> {
        self.check_stencil(x)?;
        let (h1, h2) = (self.fd_step(0), self.fd_step(1));
        let g1 = self.grad_at_step(x, h1)?;
        let g2 = self.grad_at_step(x, h2)?;
        let q = (h1 / h2).powi(2);
        Ok((g2 * q - g1) / (q - 1.0))
    }

    /// Hess τ, symmetrized, by second differences with one Richardson level.
    pub fn robin_hess(&self, x: &Point4) -> Result<Matrix4<f64>> {
        self.check_stencil(x)?;
        let (h1, h2) = (self.fd_step(0), self.fd_step(1));
        let a = self.hess_at_step(x, h1)?;
        let b = self.hess_at_step(x, h2)?;
        let q = (h1 / h2).powi(2);
        let m = (b * q - a) / (q - 1.0);
        Ok((m + m.transpose()) * 0.5)
    }

    /// Gradient at the coarse step only.
    pub fn robin_grad_coarse(&self, x: &Point4) -> Result<Vector4<f64>> {
        self.check_stencil(x)?;
        self.grad_at_step(x, self.fd_step(0))
    }

    /// Gradient and Hessian at the coarse step only; used inside Newton iterations.
    pub fn robin_grad_hess_coarse(&self, x: &Point4) -> Result<(Vector4<f64>, Matrix4<f64>)> {
        self.check_stencil(x)?;
        let h = self.fd_step(0);
        Ok((self.grad_at_step(x, h)?, self.hess_at_step(x, h)?))
    }
}
