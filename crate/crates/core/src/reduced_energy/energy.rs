//! Energy of a spike ensemble, E = Σ(A_i − B_i − C_i) − Σ_{i<j} D_ij, by closed
//! asymptotic formulas and by direct quadrature of the projected bubbles.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bubble::{bubble_value, BubbleParams};
use crate::constants::{radial_integral, C4, OMEGA3};
use crate::error::{Result, SpikeError};
use crate::geometry::{to_array, Point4};
use crate::projection::{ProjectedBubble, ProjectionMode, Projector};
use crate::quadrature::engine::{integrate_vec, QuadratureSpec};

use super::ensemble::SpikeEnsemble;
use super::psi::{d_coefficient, SecondOrder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergyMethod {
    Asymptotic,
    Quadrature,
}

/// The constant K in D_ij ≈ (β/2)·K_ij·δ_i²δ_j²|ln δ_iδ_j|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DConstant {
    /// Fitted from one quadrature of ∫μ_i⁻¹μ_j⁻¹(PU_i)²(PU_j)² at the calibration δ.
    Calibrated,
    /// c4²ω3A²G(ξ_i, ξ_j)²/(μ_iμ_j), the leading behaviour near each center.
    Leading,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySettings {
    /// Constant c in the remainder budget c·Σ(λ_iδ_i + δ_i² + |β|δ_i²).
    pub remainder_c: f64,
    pub d_constant: DConstant,
    pub calibration_delta: f64,
    pub second_order: SecondOrder,
    pub quadrature: QuadratureSpec,
}

impl Default for EnergySettings {
    fn default() -> Self {
        Self {
            remainder_c: 1.0,
            d_constant: DConstant::Calibrated,
            calibration_delta: 1e-2,
            second_order: SecondOrder::Printed,
            quadrature: QuadratureSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermErrors {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub method: EnergyMethod,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    /// Symmetric, zero diagonal.
    pub d: Vec<Vec<f64>>,
    /// Σ(A_i − B_i − C_i) − Σ_{i<j} D_ij.
    pub total: f64,
    /// Sum of the absolute quadrature errors of all terms; 0 for the asymptotic path.
    pub total_error: f64,
    pub errors: Option<TermErrors>,
    /// Σ (c4⁴/4)·μ_i⁻¹·I_4.
    pub leading_level: f64,
    /// Σ δ_i²(kτ(ξ_i) − 4ω3λ_i|ln δ_i|)/μ_i, i.e. Ψ_λ at d_i = λ_i|ln δ_i|.
    pub psi_value: f64,
    pub remainder_budget: f64,
    pub tau: Vec<f64>,
    /// K_ij used for the asymptotic D_ij.
    pub d_constants: Option<Vec<Vec<f64>>>,
    pub lambda_checked: bool,
    pub second_order: SecondOrder,
}

/// Shared state for energy evaluations on one domain.
pub struct EnergyContext {
    pub projector: Arc<Projector>,
    pub settings: EnergySettings,
}

impl EnergyContext {
    pub fn new(projector: Arc<Projector>, settings: EnergySettings) -> Self {
        Self { projector, settings }
    }
}

/// c·Σ(λ_iδ_i + δ_i² + |β|δ_i²).
pub fn remainder_budget(ens: &SpikeEnsemble, c: f64) -> f64 {
    c * ens
        .bubbles
        .iter()
        .zip(&ens.lambdas)
        .map(|(b, l)| l * b.delta + b.delta * b.delta * (1.0 + ens.beta.abs()))
        .sum::<f64>()
}

fn unit_level() -> f64 {
    C4.powi(4) / 4.0 * radial_integral(4.0).expect("I_4 converges")
}

fn pair_total(a: &[f64], b: &[f64], c: &[f64], d: &[Vec<f64>]) -> f64 {
    let m = a.len();
    let mut t: f64 = (0..m).map(|i| a[i] - b[i] - c[i]).sum();
    for i in 0..m {
        for j in i + 1..m {
            t -= d[i][j];
        }
    }
    t
}

fn project_all(proj: &Projector, bubbles: &[BubbleParams]) -> Result<Vec<ProjectedBubble>> {
    bubbles.iter().map(|b| proj.project_bubble(b, ProjectionMode::Exact)).collect()
}

fn quad_spec(base: &QuadratureSpec, bubbles: &[BubbleParams], eta: f64) -> QuadratureSpec {
    let mut s = base.clone();
    s.spike_centers = bubbles.iter().map(|b| (to_array(&b.xi), b.delta)).collect();
    s.eta = Some(eta);
    s
}

/// ∫(PU_i)²(PU_j)² for every pair, with its error.
fn pair_integrals(proj: &Projector, bubbles: &[BubbleParams], eta: f64, base: &QuadratureSpec) -> Result<Vec<Vec<(f64, f64)>>> {
    let m = bubbles.len();
    let pus = project_all(proj, bubbles)?;
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
    let mut out = vec![vec![(0.0, 0.0); m]; m];
    if pairs.is_empty() {
        return Ok(out);
    }
    let spec = quad_spec(base, bubbles, eta);
    let f = |x: &Point4, o: &mut [f64]| {
        let v: Vec<f64> = pus.iter().map(|p| p.value(x).unwrap_or(f64::NAN)).collect();
        for (k, &(i, j)) in pairs.iter().enumerate() {
            o[k] = v[i] * v[i] * v[j] * v[j];
        }
    };
    let r = integrate_vec(proj.domain(), &spec, pairs.len(), &f)?;
    for (k, &(i, j)) in pairs.iter().enumerate() {
        out[i][j] = (r[k].value, r[k].error);
        out[j][i] = out[i][j];
    }
    Ok(out)
}

/// K_ij from the chosen rule; μ factors are included.
pub fn d_constants(ctx: &EnergyContext, ens: &SpikeEnsemble) -> Result<Vec<Vec<f64>>> {
    let m = ens.m();
    let mut k = vec![vec![0.0; m]; m];
    if m < 2 {
        return Ok(k);
    }
    match ctx.settings.d_constant {
        DConstant::Fixed(v) => {
            for (i, row) in k.iter_mut().enumerate() {
                for (j, kij) in row.iter_mut().enumerate() {
                    if i != j {
                        *kij = v;
                    }
                }
            }
        }
        DConstant::Leading => {
            let ev = ctx.projector.evaluator();
            for i in 0..m {
                for j in i + 1..m {
                    let (bi, bj) = (&ens.bubbles[i], &ens.bubbles[j]);
                    let g = ev.green(&bi.xi, &bj.xi)?;
                    let v = C4 * C4 * OMEGA3 * crate::constants::A.powi(2) * g * g / (bi.mu * bj.mu);
                    k[i][j] = v;
                    k[j][i] = v;
                }
            }
        }
        DConstant::Calibrated => {
            let dc = ctx.settings.calibration_delta;
            let cal: Vec<BubbleParams> = ens.bubbles.iter().map(|b| BubbleParams { delta: dc, ..*b }).collect();
            let ints = pair_integrals(&ctx.projector, &cal, ens.eta, &ctx.settings.quadrature)?;
            let shape = dc.powi(4) * (dc * dc).ln().abs();
            for i in 0..m {
                for j in 0..m {
                    if i != j {
                        k[i][j] = ints[i][j].0 / (cal[i].mu * cal[j].mu * shape);
                    }
                }
            }
        }
    }
    Ok(k)
}

fn check_small_deltas(ens: &SpikeEnsemble) -> Result<()> {
    for b in &ens.bubbles {
        if b.delta >= 0.1 * ens.eta {
            return Err(SpikeError::Precondition(format!("delta {} is not below 0.1·eta = {}", b.delta, 0.1 * ens.eta)));
        }
    }
    Ok(())
}

fn psi_at(ens: &SpikeEnsemble, tau: &[f64], coef: SecondOrder) -> f64 {
    ens.bubbles
        .iter()
        .zip(&ens.lambdas)
        .zip(tau)
        .map(|((b, l), t)| {
            let d2 = b.delta * b.delta;
            d2 * (coef.coefficient() * t - d_coefficient() * l * b.delta.ln().abs()) / b.mu
        })
        .sum()
}

/// Every term by its leading closed form; D_ij as the signed bound (β/2)·K_ij·δ_i²δ_j²|ln δ_iδ_j|.
pub fn energy_terms_asymptotic(ctx: &EnergyContext, ens: &SpikeEnsemble) -> Result<EnergyBreakdown> {
    let domain = ctx.projector.domain();
    let v = ens.validate(domain, true)?;
    check_small_deltas(ens)?;
    let ev = ctx.projector.evaluator();
    let coef = ctx.settings.second_order;
    let m = ens.m();
    let i4 = radial_integral(4.0)?;
    let tau: Vec<f64> = ens.bubbles.iter().map(|b| ev.robin(&b.xi)).collect::<Result<_>>()?;
    let (mut a, mut b, mut c) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    for i in 0..m {
        let bi = &ens.bubbles[i];
        let inv = 1.0 / bi.mu;
        let d2 = bi.delta * bi.delta;
        let second = coef.coefficient() * tau[i] * d2;
        a[i] = inv * (0.5 * C4.powi(4) * i4 - second);
        b[i] = inv * (0.25 * C4.powi(4) * i4 - 2.0 * second);
        c[i] = inv * 0.5 * C4 * C4 * OMEGA3 * ens.lambdas[i] * d2 * bi.delta.ln().abs();
    }
    let k = d_constants(ctx, ens)?;
    let mut d = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            if i != j {
                let (di, dj) = (ens.bubbles[i].delta, ens.bubbles[j].delta);
                d[i][j] = 0.5 * ens.beta * k[i][j] * di * di * dj * dj * (di * dj).ln().abs();
            }
        }
    }
    Ok(EnergyBreakdown {
        method: EnergyMethod::Asymptotic,
        total: pair_total(&a, &b, &c, &d),
        a,
        b,
        c,
        d,
        total_error: 0.0,
        errors: None,
        leading_level: ens.bubbles.iter().map(|b| unit_level() / b.mu).sum(),
        psi_value: psi_at(ens, &tau, coef),
        remainder_budget: remainder_budget(ens, ctx.settings.remainder_c),
        tau,
        d_constants: Some(k),
        lambda_checked: v.lambda_checked,
        second_order: coef,
    })
}

/// A_i = ½μ⁻¹∫U_i³PU_i (equal to ½μ⁻¹∫|∇PU_i|² for the exact projection),
/// B_i = ¼μ⁻¹∫(PU_i⁺)⁴, C_i = (λ_i/2)μ⁻¹∫(PU_i)², D_ij = (β/2)μ_i⁻¹μ_j⁻¹∫(PU_i)²(PU_j)².
pub fn energy_terms_quadrature(ctx: &EnergyContext, ens: &SpikeEnsemble, spec: &QuadratureSpec) -> Result<EnergyBreakdown> {
    let proj = &ctx.projector;
    let v = ens.validate(proj.domain(), true)?;
    let m = ens.m();
    let pus = project_all(proj, &ens.bubbles)?;
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
    let dim = 3 * m + pairs.len();
    let bubbles = ens.bubbles.clone();
    let f = |x: &Point4, o: &mut [f64]| {
        let p: Vec<f64> = pus.iter().map(|q| q.value(x).unwrap_or(f64::NAN)).collect();
        for i in 0..m {
            let u = bubble_value(&bubbles[i], x);
            o[3 * i] = u * u * u * p[i];
            o[3 * i + 1] = p[i].max(0.0).powi(4);
            o[3 * i + 2] = p[i] * p[i];
        }
        for (k, &(i, j)) in pairs.iter().enumerate() {
            o[3 * m + k] = p[i] * p[i] * p[j] * p[j];
        }
    };
    let r = integrate_vec(proj.domain(), &quad_spec(spec, &ens.bubbles, ens.eta), dim, &f)?;
    if r.iter().any(|q| !q.value.is_finite()) {
        return Err(SpikeError::Accuracy { what: "energy integrand".into(), defect: f64::NAN, threshold: 0.0 });
    }
    let (mut a, mut b, mut c) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let mut err = TermErrors { a: vec![0.0; m], b: vec![0.0; m], c: vec![0.0; m], d: vec![vec![0.0; m]; m] };
    for i in 0..m {
        let inv = 1.0 / ens.bubbles[i].mu;
        let fa = 0.5 * inv;
        let fb = 0.25 * inv;
        let fc = 0.5 * ens.lambdas[i] * inv;
        a[i] = fa * r[3 * i].value;
        b[i] = fb * r[3 * i + 1].value;
        c[i] = fc * r[3 * i + 2].value;
        err.a[i] = fa * r[3 * i].error;
        err.b[i] = fb * r[3 * i + 1].error;
        err.c[i] = fc * r[3 * i + 2].error;
    }
    let mut d = vec![vec![0.0; m]; m];
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let f = 0.5 * ens.beta / (ens.bubbles[i].mu * ens.bubbles[j].mu);
        d[i][j] = f * r[3 * m + k].value;
        d[j][i] = d[i][j];
        err.d[i][j] = f.abs() * r[3 * m + k].error;
        err.d[j][i] = err.d[i][j];
    }
    let mut total_error: f64 = (0..m).map(|i| err.a[i] + err.b[i] + err.c[i]).sum();
    for &(i, j) in &pairs {
        total_error += err.d[i][j];
    }
    let ev = proj.evaluator();
    let tau: Vec<f64> = ens.bubbles.iter().map(|b| ev.robin(&b.xi)).collect::<Result<_>>()?;
    Ok(EnergyBreakdown {
        method: EnergyMethod::Quadrature,
        total: pair_total(&a, &b, &c, &d),
        a,
        b,
        c,
        d,
        total_error,
        errors: Some(err),
        leading_level: ens.bubbles.iter().map(|b| unit_level() / b.mu).sum(),
        psi_value: psi_at(ens, &tau, ctx.settings.second_order),
        remainder_budget: remainder_budget(ens, ctx.settings.remainder_c),
        tau,
        d_constants: None,
        lambda_checked: v.lambda_checked,
        second_order: ctx.settings.second_order,
    })
}

/// Agreement of an asymptotic and a quadrature breakdown of the same ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyComparison {
    pub asymptotic_total: f64,
    pub quadrature_total: f64,
    pub difference: f64,
    pub quadrature_error: f64,
    pub remainder_budget: f64,
    /// Allowed slack as a fraction of the leading level.
    pub level_fraction: f64,
    pub leading_level: f64,
    /// |difference| ≤ level_fraction·level + quadrature error.
    pub within_level: bool,
    /// |difference| ≤ quadrature error + remainder budget.
    pub within_budget: bool,
}

pub fn compare_breakdowns(asym: &EnergyBreakdown, quad: &EnergyBreakdown, level_fraction: f64) -> EnergyComparison {
    let difference = quad.total - asym.total;
    let err = quad.total_error + asym.total_error;
    EnergyComparison {
        asymptotic_total: asym.total,
        quadrature_total: quad.total,
        difference,
        quadrature_error: err,
        remainder_budget: asym.remainder_budget,
        level_fraction,
        leading_level: asym.leading_level,
        within_level: difference.abs() <= level_fraction * asym.leading_level + err,
        within_budget: difference.abs() <= err + asym.remainder_budget,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::A;
    use crate::domain::DomainDescriptor;
    use crate::geometry::point;
    use std::f64::consts::PI;

    fn ctx(settings: EnergySettings) -> EnergyContext {
        EnergyContext::new(Arc::new(Projector::new(DomainDescriptor::unit_ball()).unwrap()), settings)
    }

    fn single(delta: f64, lambda: f64) -> SpikeEnsemble {
        SpikeEnsemble { bubbles: vec![BubbleParams::unit(delta, Point4::zeros()).unwrap()], lambdas: vec![lambda], beta: 0.0, eta: 0.5 }
    }

    #[test]
    fn asymptotic_single_spike() {
        let c = ctx(EnergySettings::default());
        let e = energy_terms_asymptotic(&c, &single(1e-3, 0.1)).unwrap();
        assert!((e.leading_level - 8.0 * PI * PI / 3.0).abs() < 1e-12);
        let tau = crate::constants::ALPHA4;
        let second = (e.a[0] - e.b[0]) - e.leading_level;
        let want = 8.0 * 2f64.sqrt() * A * A * tau * 1e-6;
        assert!((second - want).abs() < 1e-12 * e.leading_level, "{second} vs {want}");
        assert!(((e.total - e.leading_level - e.psi_value) / e.leading_level).abs() < 1e-14);
        let z = energy_terms_asymptotic(&c, &single(1e-3, 0.0)).unwrap();
        assert_eq!(z.c[0], 0.0);
    }

    #[test]
    fn asymptotic_rejects_large_delta() {
        let c = ctx(EnergySettings::default());
        assert!(matches!(energy_terms_asymptotic(&c, &single(0.06, 0.1)), Err(SpikeError::Precondition(_))));
    }

    #[test]
    fn budget_arithmetic() {
        let mut e = single(1e-3, 0.1);
        assert!((remainder_budget(&e, 1.0) - (1e-4 + 1e-6)).abs() < 1e-18);
        e.beta = -2.0;
        let b2 = remainder_budget(&e, 1.0);
        e.beta = -4.0;
        assert!((remainder_budget(&e, 1.0) - b2 - 2.0 * 1e-6).abs() < 1e-18);
        assert!((remainder_budget(&e, 3.0) - 3.0 * remainder_budget(&e, 1.0)).abs() < 1e-18);
    }

    #[test]
    fn quadrature_agrees_with_bubble_mass_expansion() {
        let settings = EnergySettings { second_order: SecondOrder::BubbleMass, ..EnergySettings::default() };
        let c = ctx(settings);
        let ens = single(1e-2, 0.1);
        let asym = energy_terms_asymptotic(&c, &ens).unwrap();
        let spec = QuadratureSpec { error_target: 1e-6, ..QuadratureSpec::default() };
        let quad = energy_terms_quadrature(&c, &ens, &spec).unwrap();
        let cmp = compare_breakdowns(&asym, &quad, 0.02);
        assert!(cmp.within_level, "{cmp:?}");
        assert!(cmp.within_budget, "{cmp:?}");
    }

    #[test]
    fn mirror_pair_is_symmetric_and_interaction_has_sign_of_beta() {
        let c = ctx(EnergySettings { d_constant: DConstant::Leading, ..EnergySettings::default() });
        let bubbles = vec![
            BubbleParams::unit(1e-2, point([-0.4, 0.0, 0.0, 0.0])).unwrap(),
            BubbleParams::unit(1e-2, point([0.4, 0.0, 0.0, 0.0])).unwrap(),
        ];
        let ens = SpikeEnsemble { bubbles, lambdas: vec![0.1, 0.1], beta: -1.0, eta: 0.4 };
        let spec = QuadratureSpec { outer_samples: 1 << 12, ..QuadratureSpec::default() };
        let q = energy_terms_quadrature(&c, &ens, &spec).unwrap();
        assert!(q.d[0][1] < 0.0);
        assert_eq!(q.d[0][1], q.d[1][0]);
        let e = q.errors.as_ref().unwrap();
        for (t, er) in [(&q.a, &e.a), (&q.b, &e.b), (&q.c, &e.c)] {
            assert!((t[0] - t[1]).abs() <= er[0] + er[1] + 1e-9 * t[0].abs(), "{t:?}");
        }
        let swapped = SpikeEnsemble { bubbles: vec![ens.bubbles[1], ens.bubbles[0]], ..ens.clone() };
        let s = energy_terms_quadrature(&c, &swapped, &spec).unwrap();
        assert!((s.a[0] - q.a[1]).abs() <= 1e-12 * q.a[1].abs());
        assert!((s.d[0][1] - q.d[0][1]).abs() <= 1e-12 * q.d[0][1].abs());
        assert!((s.total - q.total).abs() <= 1e-12 * q.total.abs());
        let a = energy_terms_asymptotic(&c, &ens).unwrap();
        assert!(a.d[0][1] < 0.0);
        assert!((a.d[0][1] - a.d[1][0]).abs() == 0.0);
        let k = a.d_constants.as_ref().unwrap();
        assert!((q.d[0][1] / (-0.5 * k[0][1] * 1e-8 * (1e-4f64).ln().abs()) - 1.0).abs() < 0.5);
    }
}
