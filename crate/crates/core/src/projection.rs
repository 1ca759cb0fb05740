//! Projections PU = U − h onto H¹₀(Ω), where h is harmonic with h = U on ∂Ω.
//!
//! Exact mode extends the boundary data of the profile harmonically. Expansion mode
//! uses the first-order approximation h ≈ δ·A·H(·, ξ), or δ²·A·∂H/∂ξ_j for ψ^j.

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bubble::{bubble_derivative, bubble_value, BubbleParams};
use crate::constants::A;
use crate::domain::DomainDescriptor;
use crate::error::{Result, SpikeError};
use crate::geometry::{to_array, Point4};
use crate::green_robin::meridian::{Extension, MeridianSolver};
use crate::green_robin::RobinEvaluator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionMode {
    Expansion,
    Exact,
}

/// The projected profile: the bubble U or one of ψ^0..ψ^4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Profile {
    Bubble,
    Derivative(usize),
}

impl Profile {
    pub fn value(&self, b: &BubbleParams, x: &Point4) -> f64 {
        match *self {
            Profile::Bubble => bubble_value(b, x),
            Profile::Derivative(j) => bubble_derivative(b, j, x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSettings {
    pub grid_points: usize,
    /// Width of the excluded boundary tube, relative to the inradius.
    pub tube: f64,
    /// Largest admissible δ relative to dist(ξ, ∂Ω).
    pub max_delta_ratio: f64,
}

impl Default for ProjectionSettings {
    fn default() -> Self {
        Self { grid_points: 4096, tube: 0.05, max_delta_ratio: 0.1 }
    }
}

#[derive(Clone)]
enum HarmonicPart {
    Constant(f64),
    Extension { solver: Arc<MeridianSolver>, ext: Arc<Extension> },
    /// factor·H(·, ξ) for component 0, factor·∂H/∂ξ_j(·, ξ) for component j.
    Regular { ev: Arc<RobinEvaluator>, factor: f64, component: usize },
}

#[derive(Clone)]
pub struct ProjectedBubble {
    pub bubble: BubbleParams,
    pub mode: ProjectionMode,
    pub profile: Profile,
    /// Boundary defect of the exact harmonic part; 0 for closed forms and expansions.
    pub defect_estimate: f64,
    harmonic: HarmonicPart,
}

impl std::fmt::Debug for ProjectedBubble {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProjectedBubble")
            .field("bubble", &self.bubble)
            .field("mode", &self.mode)
            .field("profile", &self.profile)
            .field("defect_estimate", &self.defect_estimate)
            .finish()
    }
}

impl ProjectedBubble {
    /// The harmonic part h, so that the projection is profile − h.
    pub fn harmonic(&self, x: &Point4) -> Result<f64> {
        match &self.harmonic {
            HarmonicPart::Constant(c) => Ok(*c),
            HarmonicPart::Extension { solver, ext } => Ok(solver.evaluate_extension(ext, x)),
            HarmonicPart::Regular { ev, factor, component } => {
                let xi = self.bubble.xi;
                if *component == 0 {
                    return Ok(factor * ev.regular_part(x, &xi)?);
                }
                // Central differences in ξ_j at two steps with one Richardson level.
                let k = component - 1;
                let inr = ev.domain().inradius();
                let diff = |h: f64| -> Result<f64> {
                    let mut p = xi;
                    p[k] += h;
                    let up = ev.regular_part(x, &p)?;
                    p[k] -= 2.0 * h;
                    let dn = ev.regular_part(x, &p)?;
                    Ok((up - dn) / (2.0 * h))
                };
                let (h1, h2) = (1e-3 * inr, 1e-4 * inr);
                let (d1, d2) = (diff(h1)?, diff(h2)?);
                Ok(factor * (100.0 * d2 - d1) / 99.0)
            }
        }
    }

    pub fn value(&self, x: &Point4) -> Result<f64> {
        Ok(self.profile.value(&self.bubble, x) - self.harmonic(x)?)
    }
}

/// Projection context for one domain; caches the collocation solver and the defect grid.
pub struct Projector {
    ev: Arc<RobinEvaluator>,
    settings: ProjectionSettings,
    solver: OnceLock<Arc<MeridianSolver>>,
    grid: OnceLock<Vec<Point4>>,
}

impl Projector {
    pub fn new(domain: DomainDescriptor) -> Result<Self> {
        Ok(Self::from_evaluator(Arc::new(RobinEvaluator::new(domain)?)))
    }

    pub fn from_evaluator(ev: Arc<RobinEvaluator>) -> Self {
        Self { ev, settings: ProjectionSettings::default(), solver: OnceLock::new(), grid: OnceLock::new() }
    }

    pub fn with_settings(mut self, settings: ProjectionSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn evaluator(&self) -> &Arc<RobinEvaluator> {
        &self.ev
    }

    pub fn domain(&self) -> &DomainDescriptor {
        self.ev.domain()
    }

    fn solver(&self) -> Result<Arc<MeridianSolver>> {
        if let Some(s) = self.solver.get() {
            return Ok(s.clone());
        }
        let s = match self.ev.solver_arc() {
            Some(s) => s,
            None => Arc::new(MeridianSolver::new(self.domain())?),
        };
        Ok(self.solver.get_or_init(|| s).clone())
    }

    /// Low-discrepancy interior points outside the boundary tube.
    pub fn grid(&self) -> &[Point4] {
        self.grid.get_or_init(|| {
            let d = self.domain();
            d.interior_grid(self.settings.grid_points, self.settings.tube * d.inradius())
        })
    }

    fn check(&self, b: &BubbleParams) -> Result<()> {
        let m = self.domain().margin(&b.xi);
        if m <= self.ev.min_margin() {
            return Err(SpikeError::Domain(format!("center {:?} is not interior", to_array(&b.xi))));
        }
        if b.delta > self.settings.max_delta_ratio * m {
            return Err(SpikeError::Precondition(format!(
                "delta {} exceeds {} x dist(xi, boundary) = {}",
                b.delta,
                self.settings.max_delta_ratio,
                self.settings.max_delta_ratio * m
            )));
        }
        Ok(())
    }

    fn project(&self, b: &BubbleParams, profile: Profile, mode: ProjectionMode) -> Result<ProjectedBubble> {
        self.check(b)?;
        if let Profile::Derivative(j) = profile {
            if j > 4 {
                return Err(SpikeError::Precondition(format!("derivative index {j} is outside 0..=4")));
            }
        }
        let (harmonic, defect_estimate) = match mode {
            ProjectionMode::Expansion => {
                let (factor, component) = match profile {
                    Profile::Bubble | Profile::Derivative(0) => (b.delta * A, 0),
                    Profile::Derivative(j) => (b.delta * b.delta * A, j),
                };
                // Build the corrector now so failures surface here.
                self.ev.corrector(&b.xi)?;
                (HarmonicPart::Regular { ev: self.ev.clone(), factor, component }, 0.0)
            }
            ProjectionMode::Exact => {
                let d = self.domain();
                let at_center = matches!(d.kind, crate::domain::DomainKind::Ball { center, .. } if to_array(&b.xi) == center);
                if at_center && matches!(profile, Profile::Bubble | Profile::Derivative(0)) {
                    // Boundary data is constant on the sphere.
                    let mut y = b.xi;
                    y[0] += d.inradius();
                    (HarmonicPart::Constant(profile.value(b, &y)), 0.0)
                } else {
                    let solver = self.solver()?;
                    let bb = *b;
                    let ext = solver.extend(&move |y: &Point4| profile.value(&bb, y))?;
                    let threshold = d.settings.residual_threshold;
                    if ext.relative_residual() > threshold {
                        return Err(SpikeError::Accuracy {
                            what: format!("harmonic extension of {profile:?}"),
                            defect: ext.relative_residual(),
                            threshold,
                        });
                    }
                    let est = ext.residual.max(ext.held_residual);
                    (HarmonicPart::Extension { solver, ext: Arc::new(ext) }, est)
                }
            }
        };
        Ok(ProjectedBubble { bubble: *b, mode, profile, defect_estimate, harmonic })
    }

    pub fn project_bubble(&self, b: &BubbleParams, mode: ProjectionMode) -> Result<ProjectedBubble> {
        self.project(b, Profile::Bubble, mode)
    }

    pub fn project_derivative(&self, b: &BubbleParams, j: usize, mode: ProjectionMode) -> Result<ProjectedBubble> {
        self.project(b, Profile::Derivative(j), mode)
    }

    /// Grid maximum of |exact − expansion| for the profile.
    pub fn defect_for(&self, b: &BubbleParams, profile: Profile) -> Result<DefectReport> {
        let exact = self.project(b, profile, ProjectionMode::Exact)?;
        let approx = self.project(b, profile, ProjectionMode::Expansion)?;
        let grid = self.grid();
        let vals: Vec<(f64, usize)> = grid
            .par_iter()
            .enumerate()
            .map(|(i, x)| Ok(((exact.harmonic(x)? - approx.harmonic(x)?).abs(), i)))
            .collect::<Result<_>>()?;
        let (defect, arg) = vals.into_iter().fold((0.0, 0), |a, v| if v.0 > a.0 { v } else { a });
        Ok(DefectReport {
            delta: b.delta,
            xi: to_array(&b.xi),
            profile,
            defect,
            defect_over_delta: defect / b.delta,
            argmax: grid.get(arg).map(to_array).unwrap_or([0.0; 4]),
            grid_points: grid.len(),
            exact_residual: exact.defect_estimate,
        })
    }

    pub fn projection_defect(&self, b: &BubbleParams) -> Result<DefectReport> {
        self.defect_for(b, Profile::Bubble)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    pub delta: f64,
    pub xi: [f64; 4],
    pub profile: Profile,
    pub defect: f64,
    pub defect_over_delta: f64,
    pub argmax: [f64; 4],
    pub grid_points: usize,
    pub exact_residual: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::C4;
    use crate::geometry::point;

    fn unit() -> Projector {
        Projector::new(DomainDescriptor::unit_ball()).unwrap()
    }

    #[test]
    fn ball_center_closed_forms() {
        let p = unit();
        for d in [1e-1, 1e-2, 1e-3] {
            let b = BubbleParams::unit(d, Point4::zeros()).unwrap();
            let ex = p.project_bubble(&b, ProjectionMode::Exact).unwrap();
            let ap = p.project_bubble(&b, ProjectionMode::Expansion).unwrap();
            let o = Point4::zeros();
            assert!((ex.harmonic(&o).unwrap() - C4 * d / (1.0 + d * d)).abs() < 1e-15);
            assert!((ap.harmonic(&o).unwrap() - C4 * d).abs() < 1e-15 * C4);
            let defect = ap.harmonic(&o).unwrap() - ex.harmonic(&o).unwrap();
            let want = C4 * d.powi(3) / (1.0 + d * d);
            assert!((defect - want).abs() < 1e-8 * want + 1e-15, "{defect} vs {want}");
        }
    }

    #[test]
    fn defect_over_delta_decreases() {
        let p = unit();
        let mut prev = f64::INFINITY;
        for d in [1e-1, 1e-2, 1e-3] {
            let r = p.projection_defect(&BubbleParams::unit(d, Point4::zeros()).unwrap()).unwrap();
            assert!(r.defect_over_delta < prev);
            if d == 1e-3 {
                assert!(r.defect <= 10.0 * C4 * d.powi(3));
            }
            prev = r.defect_over_delta;
        }
    }

    #[test]
    fn off_center_extension_matches_expansion_to_higher_order() {
        let p = unit();
        let xi = point([0.4, 0.0, 0.0, 0.0]);
        let mut prev = f64::INFINITY;
        for d in [4e-2, 4e-3] {
            let r = p.projection_defect(&BubbleParams::unit(d, xi).unwrap()).unwrap();
            assert!(r.exact_residual < 1e-10, "{}", r.exact_residual);
            assert!(r.defect_over_delta < 0.1 * prev, "{} {}", r.defect_over_delta, prev);
            prev = r.defect_over_delta;
        }
    }

    #[test]
    fn exact_projection_is_below_bubble_and_vanishes_on_boundary() {
        let p = unit();
        let b = BubbleParams::unit(1e-2, point([0.3, 0.1, 0.0, -0.2])).unwrap();
        let pu = p.project_bubble(&b, ProjectionMode::Exact).unwrap();
        for x in p.grid().iter().step_by(64) {
            let v = pu.value(x).unwrap();
            assert!(v > 0.0 && v < bubble_value(&b, x));
        }
        for k in 0..20 {
            let t = k as f64 * 0.3;
            let y = point([t.cos(), t.sin() * 0.6, t.sin() * 0.8, 0.0]);
            assert!(pu.value(&y).unwrap().abs() < 1e-9 * b.peak() * b.delta);
        }
    }

    #[test]
    fn derivative_projection_ball_center() {
        let p = unit();
        let d = 1e-2;
        let b = BubbleParams::unit(d, Point4::zeros()).unwrap();
        let h0 = p.project_derivative(&b, 0, ProjectionMode::Exact).unwrap();
        let want0 = C4 * d * (1.0 - d * d) / (1.0 + d * d).powi(2);
        assert!((h0.harmonic(&point([0.2, 0.1, 0.0, 0.3])).unwrap() - want0).abs() < 1e-14);
        // ψ^j data is linear on the sphere, so h = 2c4δ²x_j/(1+δ²)².
        for j in 1..=4 {
            let h = p.project_derivative(&b, j, ProjectionMode::Exact).unwrap();
            let x = point([0.2, -0.1, 0.3, 0.25]);
            let want = 2.0 * C4 * d * d * x[j - 1] / (1.0 + d * d).powi(2);
            assert!((h.harmonic(&x).unwrap() - want).abs() < 1e-10 * C4 * d * d, "j={j}");
        }
    }

    #[test]
    fn derivative_expansion_rate() {
        let p = unit();
        let mut prev = f64::INFINITY;
        for d in [1e-1, 1e-2, 1e-3] {
            let b = BubbleParams::unit(d, Point4::zeros()).unwrap();
            let r = p.defect_for(&b, Profile::Derivative(1)).unwrap();
            let ratio = r.defect / (d * d);
            assert!(ratio < prev);
            prev = ratio;
        }
    }

    #[test]
    fn preconditions() {
        let p = unit();
        let b = BubbleParams::unit(0.05, point([0.6, 0.0, 0.0, 0.0])).unwrap();
        assert!(matches!(p.project_bubble(&b, ProjectionMode::Exact), Err(SpikeError::Precondition(_))));
    }

    #[test]
    fn harmonic_part_has_zero_laplacian() {
        let p = unit();
        let b = BubbleParams::unit(2e-2, point([0.4, 0.0, 0.0, 0.0])).unwrap();
        let pu = p.project_bubble(&b, ProjectionMode::Exact).unwrap();
        let x = point([-0.3, 0.2, 0.1, 0.0]);
        let h = 1e-3;
        let mut lap = -8.0 * pu.harmonic(&x).unwrap();
        for k in 0..4 {
            for s in [h, -h] {
                let mut y = x;
                y[k] += s;
                lap += pu.harmonic(&y).unwrap();
            }
        }
        lap /= h * h;
        let u3 = bubble_value(&b, &x).powi(3);
        assert!(lap.abs() < 1e-3 * u3.max(pu.harmonic(&x).unwrap()), "{lap}");
    }
}
