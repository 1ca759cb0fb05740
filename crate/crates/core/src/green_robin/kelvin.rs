//! Closed-form regular part of the Green function of a ball in R⁴.

use crate::constants::ALPHA4;
use crate::geometry::Point4;

/// H(x, y) = α4 / (R²·(1 − 2x̃·ỹ + |x̃|²|ỹ|²)) with x̃ = (x − c)/R.
pub fn ball_h(center: &Point4, radius: f64, x: &Point4, y: &Point4) -> f64 {
    let xs = (x - center) / radius;
    let ys = (y - center) / radius;
    let d = 1.0 - 2.0 * xs.dot(&ys) + xs.norm_squared() * ys.norm_squared();
    ALPHA4 / (radius * radius * d)
}

/// τ(x) = α4·R² / (R² − |x − c|²)².
pub fn ball_tau(center: &Point4, radius: f64, x: &Point4) -> f64 {
    let q = radius * radius - (x - center).norm_squared();
    ALPHA4 * radius * radius / (q * q)
}

/// Kelvin image of `x` in the sphere (center, radius) and the strength that
/// reproduces α4/|y − x|² on that sphere.
pub fn kelvin_image(center: &Point4, radius: f64, x: &Point4) -> Option<(Point4, f64)> {
    let v = x - center;
    let q = v.norm_squared();
    if q == 0.0 {
        return None;
    }
    let s = radius * radius / q;
    Some((center + v * s, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::point;

    #[test]
    fn boundary_values_reproduce_kernel() {
        let c = point([0.1, -0.2, 0.0, 0.3]);
        let r = 1.7;
        let x = point([0.5, 0.1, -0.4, 0.2]);
        for y in [point([1.0, 0.0, 0.0, 0.0]), point([0.0, 0.6, 0.0, -0.8]), point([0.5, 0.5, 0.5, 0.5])] {
            let yb = c + y / y.norm() * r;
            let h = ball_h(&c, r, &x, &yb);
            assert!((h - ALPHA4 / (x - yb).norm_squared()).abs() < 1e-14 * h);
            let (img, s) = kelvin_image(&c, r, &x).unwrap();
            assert!((s * ALPHA4 / (yb - img).norm_squared() - h).abs() < 1e-13 * h);
        }
    }

    #[test]
    fn tau_values() {
        let o = Point4::zeros();
        assert!((ball_tau(&o, 1.0, &o) - ALPHA4).abs() < 1e-18);
        let x = point([0.5, 0.0, 0.0, 0.0]);
        assert!((ball_tau(&o, 1.0, &x) / (16.0 / 9.0 * ALPHA4) - 1.0).abs() < 1e-14);
        assert!((ball_h(&o, 1.0, &x, &x) - ball_tau(&o, 1.0, &x)).abs() < 1e-16);
    }
}
