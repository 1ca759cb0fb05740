//! Aubin–Talenti bubbles U_{δ,ξ} and their parameter derivatives ψ^j.

use serde::{Deserialize, Serialize};

use crate::constants::C4;
use crate::error::{Result, SpikeError};
use crate::geometry::Point4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubbleParams {
    pub delta: f64,
    pub xi: Point4,
    pub mu: f64,
}

impl BubbleParams {
    pub fn new(delta: f64, xi: Point4, mu: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(SpikeError::Precondition(format!("delta must be positive, got {delta}")));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(SpikeError::Precondition(format!("mu must be positive, got {mu}")));
        }
        Ok(Self { delta, xi, mu })
    }

    pub fn unit(delta: f64, xi: Point4) -> Result<Self> {
        Self::new(delta, xi, 1.0)
    }

    /// Peak value c4/δ.
    pub fn peak(&self) -> f64 {
        C4 / self.delta
    }
}

#[inline]
fn r2(b: &BubbleParams, x: &Point4) -> f64 {
    (x - b.xi).norm_squared()
}

/// c4·δ/(δ² + |x-ξ|²).
pub fn bubble_value(b: &BubbleParams, x: &Point4) -> f64 {
    bubble_value_r2(b.delta, r2(b, x))
}

#[inline]
pub fn bubble_value_r2(delta: f64, r2: f64) -> f64 {
    if r2 < delta * delta {
        C4 / (delta * (1.0 + r2 / (delta * delta)))
    } else {
        C4 * delta / (delta * delta + r2)
    }
}

/// μ^{-1/2}·U, the solution of -ΔW = μW³.
pub fn scaled_bubble_value(b: &BubbleParams, x: &Point4) -> f64 {
    bubble_value(b, x) / b.mu.sqrt()
}

/// ψ^0 = δ∂U/∂δ for j = 0 and ψ^j = δ∂U/∂ξ_j for j = 1..4.
pub fn bubble_derivative(b: &BubbleParams, j: usize, x: &Point4) -> f64 {
    assert!(j <= 4, "derivative index runs over 0..=4");
    let d = b.delta;
    let q = r2(b, x);
    // Divide by δ⁴ first so tiny δ stays representable.
    let s = 1.0 + q / (d * d);
    if j == 0 {
        C4 * (q / (d * d) - 1.0) / (d * s * s)
    } else {
        2.0 * C4 * (x[j - 1] - b.xi[j - 1]) / (d * d * s * s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::point;
    use proptest::prelude::*;

    fn fd_laplacian<F: Fn(&Point4) -> f64>(f: F, x: &Point4, h: f64) -> f64 {
        let mut s = -8.0 * f(x);
        for k in 0..4 {
            let mut p = *x;
            p[k] += h;
            s += f(&p);
            p[k] -= 2.0 * h;
            s += f(&p);
        }
        s / (h * h)
    }

    fn sample_points(n: usize) -> Vec<Point4> {
        // small deterministic LCG; the points only need to be scattered
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        (0..n).map(|_| point([next(), next(), next(), next()])).collect()
    }

    #[test]
    fn trivial_values() {
        let b = BubbleParams::unit(1.0, Point4::zeros()).unwrap();
        assert!((bubble_value(&b, &Point4::zeros()) - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        assert!((bubble_value(&b, &point([1.0, 0.0, 0.0, 0.0])) - 2f64.sqrt()).abs() < 1e-15);
        let b = BubbleParams::unit(0.3, point([0.1, 0.2, 0.0, 0.0])).unwrap();
        assert!((bubble_derivative(&b, 0, &b.xi) + C4 / 0.3).abs() < 1e-12);
        assert_eq!(bubble_derivative(&b, 1, &b.xi), 0.0);
        assert!(BubbleParams::unit(0.0, Point4::zeros()).is_err());
        assert!(BubbleParams::new(1.0, Point4::zeros(), -1.0).is_err());
    }

    #[test]
    fn scaled_bubble_solves_mu_equation() {
        for mu in [1.0, 2.5] {
            let b = BubbleParams::new(0.7, point([0.1, -0.2, 0.05, 0.0]), mu).unwrap();
            for x in sample_points(10) {
                let w = scaled_bubble_value(&b, &x);
                let lap = fd_laplacian(|p| scaled_bubble_value(&b, p), &x, 1e-3);
                let rel = (-lap - mu * w.powi(3)).abs() / (mu * w.powi(3));
                assert!(rel < 1e-4, "rel {rel}");
            }
        }
    }

    #[test]
    fn derivatives_solve_linearized_equation() {
        let b = BubbleParams::unit(0.8, point([0.0, 0.1, -0.1, 0.2])).unwrap();
        for x in sample_points(10) {
            let u = bubble_value(&b, &x);
            for j in 0..5 {
                let psi = bubble_derivative(&b, j, &x);
                let lap = fd_laplacian(|p| bubble_derivative(&b, j, p), &x, 1e-3);
                let scale = 3.0 * u * u * u;
                assert!((-lap - 3.0 * u * u * psi).abs() < 1e-4 * scale, "j={j}");
            }
        }
    }

    #[test]
    fn delta_derivative_matches_difference_quotient() {
        let xi = point([0.2, 0.0, -0.1, 0.3]);
        for x in sample_points(20) {
            let d = 0.4;
            let h = 1e-5;
            let up = bubble_value(&BubbleParams::unit(d + h, xi).unwrap(), &x);
            let dn = bubble_value(&BubbleParams::unit(d - h, xi).unwrap(), &x);
            let fd = d * (up - dn) / (2.0 * h);
            let psi = bubble_derivative(&BubbleParams::unit(d, xi).unwrap(), 0, &x);
            assert!((fd - psi).abs() <= 1e-6 * psi.abs().max(1e-3), "{fd} vs {psi}");
        }
    }

    #[test]
    fn tiny_delta_is_finite() {
        let b = BubbleParams::unit(1e-8, Point4::zeros()).unwrap();
        let x = point([1e-9, 0.0, 0.0, 0.0]);
        for j in 0..5 {
            assert!(bubble_derivative(&b, j, &x).is_finite());
        }
        assert!(bubble_value(&b, &x).is_finite());
    }

    #[test]
    fn fourth_power_of_derivatives_converges_in_radius() {
        // ∫_{B_R} (ψ^j)⁴ in scaled variables; j=0 is radial, j≥1 uses ⟨y_1⁴⟩ = 3|y|⁴/(4·6) on S³.
        use crate::quadrature::adaptive::{integrate, Tolerance};
        let radial = |t: f64| (C4 * (t * t - 1.0) / (1.0 + t * t).powi(2)).powi(4) * t.powi(3);
        let tr = |t: f64| (2.0 * C4 * t / (1.0 + t * t).powi(2)).powi(4) * 0.125 * t.powi(3);
        for f in [&radial as &dyn Fn(f64) -> f64, &tr] {
            let a = integrate(f, 0.0, 1e2, Tolerance::default()).value;
            let b = integrate(f, 0.0, 1e3, Tolerance::default()).value;
            assert!((a - b).abs() < 0.01 * b);
        }
    }

    proptest! {
        #[test]
        fn derivatives_dominated_by_bubble(
            d in 1e-4f64..2.0,
            x in proptest::array::uniform4(-3.0f64..3.0),
            xi in proptest::array::uniform4(-1.0f64..1.0),
        ) {
            let b = BubbleParams::unit(d, point(xi)).unwrap();
            let x = point(x);
            let u = bubble_value(&b, &x);
            prop_assert!(u > 0.0 && u <= C4 / d * (1.0 + 1e-14));
            for j in 0..5 {
                prop_assert!(bubble_derivative(&b, j, &x).abs() <= u * (1.0 + 1e-12));
            }
        }
    }
}
