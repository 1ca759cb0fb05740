//! Spike ensembles: bubble parameters, λ_i, β and the separation parameter η.

use serde::{Deserialize, Serialize};

use crate::bubble::BubbleParams;
use crate::constants::lambda1_ball;
use crate::domain::{DomainDescriptor, DomainKind};
use crate::error::{Result, SpikeError};
use crate::geometry::to_array;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeEnsemble {
    pub bubbles: Vec<BubbleParams>,
    pub lambdas: Vec<f64>,
    pub beta: f64,
    pub eta: f64,
}

/// Outcome of validating an ensemble against a domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    /// λ₁(Ω), when known in closed form.
    pub lambda1: Option<f64>,
    /// False when the λ < λ₁ condition could not be checked.
    pub lambda_checked: bool,
}

impl SpikeEnsemble {
    /// Builds and validates an ensemble; every λ_i must lie in (0, λ₁(Ω)).
    pub fn new(domain: &DomainDescriptor, bubbles: Vec<BubbleParams>, lambdas: Vec<f64>, beta: f64, eta: f64) -> Result<Self> {
        let e = Self { bubbles, lambdas, beta, eta };
        e.validate(domain, false)?;
        Ok(e)
    }

    pub fn m(&self) -> usize {
        self.bubbles.len()
    }

    /// Checks membership in X_η and the parameter ranges. With `allow_zero_lambda`
    /// the range for λ_i becomes [0, λ₁).
    pub fn validate(&self, domain: &DomainDescriptor, allow_zero_lambda: bool) -> Result<Validation> {
        let m = self.m();
        if m == 0 {
            return Err(SpikeError::Precondition("ensemble has no spikes".into()));
        }
        if self.lambdas.len() != m {
            return Err(SpikeError::Precondition(format!("{} lambdas for {m} spikes", self.lambdas.len())));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(SpikeError::Precondition(format!("eta must be positive, got {}", self.eta)));
        }
        if !self.beta.is_finite() {
            return Err(SpikeError::Precondition("beta must be finite".into()));
        }
        for b in &self.bubbles {
            BubbleParams::new(b.delta, b.xi, b.mu)?;
            let dist = domain.margin(&b.xi);
            if dist < self.eta {
                return Err(SpikeError::Precondition(format!(
                    "center {:?} is {dist:.3e} from the boundary, below eta = {}",
                    to_array(&b.xi),
                    self.eta
                )));
            }
        }
        for i in 0..m {
            for j in i + 1..m {
                let d = (self.bubbles[i].xi - self.bubbles[j].xi).norm();
                if d < self.eta {
                    return Err(SpikeError::Precondition(format!("centers {i} and {j} are {d:.3e} apart, below eta = {}", self.eta)));
                }
            }
        }
        let lambda1 = match domain.kind {
            DomainKind::Ball { radius, .. } => Some(lambda1_ball(radius)),
            DomainKind::Collocation => None,
        };
        for &l in &self.lambdas {
            let low_ok = if allow_zero_lambda { l >= 0.0 } else { l > 0.0 };
            if !low_ok || !l.is_finite() {
                return Err(SpikeError::Precondition(format!("lambda {l} is out of range")));
            }
            if let Some(l1) = lambda1 {
                if l >= l1 {
                    return Err(SpikeError::Precondition(format!("lambda {l} is not below lambda_1 = {l1:.6}")));
                }
            }
        }
        Ok(Validation { lambda1, lambda_checked: lambda1.is_some() })
    }

    /// Same ensemble with every μ_i multiplied by `factor`.
    pub fn scale_mus(&self, factor: f64) -> Self {
        let mut e = self.clone();
        for b in &mut e.bubbles {
            b.mu *= factor;
        }
        e
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::point;

    fn bubble(x: f64, delta: f64) -> BubbleParams {
        BubbleParams::unit(delta, point([x, 0.0, 0.0, 0.0])).unwrap()
    }

    #[test]
    fn accepts_separated_interior_spikes() {
        let d = DomainDescriptor::unit_ball();
        let e = SpikeEnsemble::new(&d, vec![bubble(-0.4, 1e-2), bubble(0.4, 1e-2)], vec![0.1, 0.1], -1.0, 0.3).unwrap();
        let v = e.validate(&d, false).unwrap();
        assert!(v.lambda_checked);
        assert!((v.lambda1.unwrap() - 14.681_970_642_123_89).abs() < 1e-9);
    }

    #[test]
    fn rejects_violations() {
        let d = DomainDescriptor::unit_ball();
        let ok = || vec![bubble(0.0, 1e-2)];
        assert!(SpikeEnsemble::new(&d, ok(), vec![0.0], -1.0, 0.3).is_err());
        assert!(SpikeEnsemble::new(&d, ok(), vec![15.0], -1.0, 0.3).is_err());
        assert!(SpikeEnsemble::new(&d, ok(), vec![0.1, 0.1], -1.0, 0.3).is_err());
        assert!(SpikeEnsemble::new(&d, vec![bubble(0.8, 1e-2)], vec![0.1], -1.0, 0.3).is_err());
        assert!(SpikeEnsemble::new(&d, vec![bubble(0.0, 1e-2), bubble(0.1, 1e-2)], vec![0.1, 0.1], -1.0, 0.3).is_err());
        let e = SpikeEnsemble { bubbles: ok(), lambdas: vec![0.0], beta: 0.0, eta: 0.3 };
        assert!(e.validate(&d, true).is_ok());
    }

    #[test]
    fn collocation_domains_leave_lambda_unchecked() {
        let d = DomainDescriptor::collocation_ball([0.0; 4], 1.0).unwrap();
        let e = SpikeEnsemble { bubbles: vec![bubble(0.0, 1e-2)], lambdas: vec![100.0], beta: 0.0, eta: 0.3 };
        let v = e.validate(&d, false).unwrap();
        assert!(!v.lambda_checked);
    }
}
