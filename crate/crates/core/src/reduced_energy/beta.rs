//! Admissibility of a λ-dependent coupling β(λ).
//!
//! With C_i = (c4/ω3)A²τ(ξ_i) and δ_i = e^{-C_i/λ}, the ratios |β|e^{-C_i/(2λ)},
//! |β|δ_i² and |β|²δ_i² must vanish as λ → 0. All arithmetic is in logarithms.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpikeError};

use super::psi::concentration_rate;

/// β as a function of λ, given through ln|β| and its sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaSchedule {
    Constant(f64),
    /// β(λ) = −exp(rate·C_1/λ).
    Exp { rate: f64 },
}

impl BetaSchedule {
    /// Parses `const:<β>` or `exp:<rate>`.
    pub fn parse(s: &str) -> Result<Self> {
        let (kind, arg) = s.split_once(':').ok_or_else(|| SpikeError::Config(format!("beta schedule '{s}' lacks ':'")))?;
        let v: f64 = arg.trim().parse().map_err(|_| SpikeError::Config(format!("bad number in beta schedule '{s}'")))?;
        match kind.trim() {
            "const" => Ok(BetaSchedule::Constant(v)),
            "exp" => Ok(BetaSchedule::Exp { rate: v }),
            k => Err(SpikeError::Config(format!("unknown beta schedule kind '{k}'"))),
        }
    }

    /// ln|β(λ)|; −∞ for β = 0.
    pub fn ln_abs(&self, lambda: f64, c1: f64) -> f64 {
        match *self {
            BetaSchedule::Constant(b) => b.abs().ln(),
            BetaSchedule::Exp { rate } => rate * c1 / lambda,
        }
    }

    pub fn value(&self, lambda: f64, c1: f64) -> f64 {
        match *self {
            BetaSchedule::Constant(b) => b,
            BetaSchedule::Exp { .. } => -self.ln_abs(lambda, c1).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSequence {
    pub name: String,
    pub spike: usize,
    /// ln of the ratio at each grid λ.
    pub ln_values: Vec<f64>,
    pub decreasing: bool,
    /// Largest ln value over the tail of the grid.
    pub ln_tail_sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaReport {
    pub lambdas: Vec<f64>,
    pub rates: Vec<f64>,
    pub ln_beta: Vec<f64>,
    pub ratios: Vec<RatioSequence>,
    pub margin: f64,
    /// Number of final grid points forming the tail.
    pub tail_len: usize,
    pub admissible: bool,
}

/// Evaluates the three ratio sequences on a decreasing λ grid. The verdict requires
/// every ratio to stay below `margin` on the tail (the last half) of the grid.
pub fn beta_admissible(schedule: &BetaSchedule, lambdas: &[f64], tau_values: &[f64], margin: f64) -> Result<BetaReport> {
    if lambdas.len() < 2 || lambdas.windows(2).any(|w| !(w[1] < w[0])) || lambdas.iter().any(|l| !(*l > 0.0)) {
        return Err(SpikeError::Precondition("lambda grid must be positive and strictly decreasing".into()));
    }
    if tau_values.is_empty() || tau_values.iter().any(|t| !(*t > 0.0)) {
        return Err(SpikeError::Precondition("tau values must be positive".into()));
    }
    if !(margin > 0.0) {
        return Err(SpikeError::Precondition("margin must be positive".into()));
    }
    let rates: Vec<f64> = tau_values.iter().map(|&t| concentration_rate(t)).collect();
    let ln_beta: Vec<f64> = lambdas.iter().map(|&l| schedule.ln_abs(l, rates[0])).collect();
    let tail_len = lambdas.len().div_ceil(2);
    let mut ratios = Vec::new();
    for (i, &c) in rates.iter().enumerate() {
        let seqs: [(&str, Box<dyn Fn(f64, f64) -> f64>); 3] = [
            ("beta_exp_half_rate", Box::new(move |lb, l| lb - c / (2.0 * l))),
            ("beta_delta_sq", Box::new(move |lb, l| lb - 2.0 * c / l)),
            ("beta_sq_delta_sq", Box::new(move |lb, l| 2.0 * lb - 2.0 * c / l)),
        ];
        for (name, f) in seqs {
            let ln_values: Vec<f64> = lambdas.iter().zip(&ln_beta).map(|(&l, &lb)| f(lb, l)).collect();
            let decreasing = ln_values.windows(2).all(|w| w[1] < w[0] || w[1] == f64::NEG_INFINITY);
            let ln_tail_sup = ln_values[lambdas.len() - tail_len..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            ratios.push(RatioSequence { name: name.into(), spike: i, ln_values, decreasing, ln_tail_sup });
        }
    }
    let admissible = ratios.iter().all(|r| r.ln_tail_sup < margin.ln());
    Ok(BetaReport { lambdas: lambdas.to_vec(), rates, ln_beta, ratios, margin, tail_len, admissible })
}

/// Geometric grid from `hi` down to `lo`.
pub fn lambda_grid(hi: f64, lo: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|k| hi * (lo / hi).powf(k as f64 / (n - 1) as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::ALPHA4;
    use proptest::prelude::*;

    fn grid() -> Vec<f64> {
        lambda_grid(1.0, 0.05, 12)
    }

    #[test]
    fn three_example_schedules() {
        let tau = [ALPHA4];
        let c = beta_admissible(&BetaSchedule::Constant(-1.0), &grid(), &tau, 1e-3).unwrap();
        assert!(c.admissible);
        assert!(c.ratios.iter().all(|r| r.decreasing));
        let sub = beta_admissible(&BetaSchedule::Exp { rate: 0.25 }, &grid(), &tau, 1e-3).unwrap();
        assert!(sub.admissible);
        assert!(sub.ratios.iter().all(|r| r.decreasing));
        let sup = beta_admissible(&BetaSchedule::Exp { rate: 1.0 }, &grid(), &tau, 1e-3).unwrap();
        assert!(!sup.admissible);
        assert!(!sup.ratios[0].decreasing);
    }

    #[test]
    fn sub_threshold_ratio_is_closed_form() {
        let r = beta_admissible(&BetaSchedule::Exp { rate: 0.25 }, &grid(), &[ALPHA4], 1e-3).unwrap();
        let c = r.rates[0];
        for (l, v) in grid().iter().zip(&r.ratios[0].ln_values) {
            assert!((v + c / (4.0 * l)).abs() < 1e-9 * (c / l));
        }
    }

    #[test]
    fn parsing() {
        assert_eq!(BetaSchedule::parse("const:-1").unwrap(), BetaSchedule::Constant(-1.0));
        assert_eq!(BetaSchedule::parse("exp:0.25").unwrap(), BetaSchedule::Exp { rate: 0.25 });
        assert!(BetaSchedule::parse("exp").is_err());
        assert!(BetaSchedule::parse("poly:2").is_err());
        assert!((BetaSchedule::Exp { rate: 1.0 }.value(2.0, 4.0) + 2f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn bad_grids() {
        assert!(beta_admissible(&BetaSchedule::Constant(-1.0), &[0.1, 0.2], &[ALPHA4], 1e-3).is_err());
        assert!(beta_admissible(&BetaSchedule::Constant(-1.0), &[0.2, 0.1], &[0.0], 1e-3).is_err());
    }

    proptest! {
        #[test]
        fn verdict_monotone_under_domination(r1 in -1.0f64..1.5, shrink in 0.0f64..1.0, tau in 0.01f64..0.2) {
            let g = grid();
            let strong = BetaSchedule::Exp { rate: r1 };
            // a smaller rate gives a pointwise smaller |β|
            let weak = BetaSchedule::Exp { rate: r1 - shrink };
            let a = beta_admissible(&strong, &g, &[tau], 1e-3).unwrap();
            let b = beta_admissible(&weak, &g, &[tau], 1e-3).unwrap();
            if a.admissible {
                prop_assert!(b.admissible);
            }
        }
    }
}
