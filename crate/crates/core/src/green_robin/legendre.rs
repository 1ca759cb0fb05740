//! Azimuthal modes of the four-dimensional point kernel.
//!
//! For a charge at meridian position (z_q, r_q) and a point (z, r), with angle γ
//! between their transverse directions,
//! α4/|y − q|² = Σ_l K_l P_l(cos γ),  K_l = α4 (2l+1) Q_l(a/b) / b,
//! where a = (z − z_q)² + r² + r_q², b = 2 r r_q and Q_l is the Legendre
//! function of the second kind.

use crate::constants::ALPHA4;

/// Writes K_0..K_{out.len()-1} for the pair (z, r), (zq, rq).
pub fn kernel_modes(z: f64, r: f64, zq: f64, rq: f64, out: &mut [f64]) {
    let dz = z - zq;
    let a = dz * dz + r * r + rq * rq;
    let b = 2.0 * r * rq;
    let amb = dz * dz + (r - rq) * (r - rq);
    modes_from(a, b, amb, ALPHA4, out);
}

/// Modes of c/(a − b cos γ) given a, b and a − b computed without cancellation.
pub fn modes_from(a: f64, b: f64, amb: f64, c: f64, out: &mut [f64]) {
    let n = out.len();
    if n == 0 {
        return;
    }
    if b <= 1e-300 * a || b == 0.0 {
        out[0] = c / a;
        out[1..].iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    // Q_0(z) = atanh(b/a) = ½ ln(1 + 2b/(a − b)).
    let q0 = 0.5 * (2.0 * b / amb).ln_1p();
    out[0] = c * q0 / b;
    if n == 1 {
        return;
    }
    let z = a / b;
    let zm1 = amb / b;
    // Backward recurrence for r_l = Q_l/Q_{l-1}; ratios converge like e^{-acosh z}.
    let rate = (zm1 + (zm1 * (zm1 + 2.0)).sqrt()).ln_1p();
    let extra = (40.0 / rate.max(1e-6)).ceil().min(200_000.0) as usize;
    let top = n - 1 + extra;
    let mut ratio = 0.0;
    let mut ratios = vec![0.0; n];
    for l in (1..=top).rev() {
        let lf = l as f64;
        ratio = lf / ((2.0 * lf + 1.0) * z - (lf + 1.0) * ratio);
        if l < n {
            ratios[l] = ratio;
        }
    }
    let mut q = q0;
    for l in 1..n {
        q *= ratios[l];
        out[l] = c * (2 * l + 1) as f64 * q / b;
    }
}

/// P_0..P_{n-1} at t.
pub fn legendre_p(t: f64, out: &mut [f64]) {
    let n = out.len();
    if n == 0 {
        return;
    }
    out[0] = 1.0;
    if n > 1 {
        out[1] = t;
    }
    for l in 1..n.saturating_sub(1) {
        let lf = l as f64;
        out[l + 1] = ((2.0 * lf + 1.0) * t * out[l] - lf * out[l - 1]) / (lf + 1.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive::{integrate, Tolerance};

    /// Oracle: K_l = (2l+1)/2 ∫_{-1}^{1} α4 P_l(t)/(a − b t) dt by adaptive quadrature.
    fn oracle(z: f64, r: f64, zq: f64, rq: f64, l: usize) -> f64 {
        let a = (z - zq).powi(2) + r * r + rq * rq;
        let b = 2.0 * r * rq;
        let f = |t: f64| {
            let mut p = vec![0.0; l + 1];
            legendre_p(t, &mut p);
            ALPHA4 * p[l] / (a - b * t)
        };
        let tol = Tolerance { abs: 1e-17, rel: 1e-13, max_intervals: 5000 };
        0.5 * (2 * l + 1) as f64 * integrate(f, -1.0, 1.0, tol).value
    }

    #[test]
    fn modes_match_quadrature() {
        let cases = [(0.3, 0.5, 0.2, 1.3), (1.0, 0.95, 1.05, 1.0), (0.0, 0.01, 0.5, 2.0), (-0.4, 0.7, 0.6, 0.9)];
        for &(z, r, zq, rq) in &cases {
            let mut k = vec![0.0; 12];
            kernel_modes(z, r, zq, rq, &mut k);
            for (l, &kl) in k.iter().enumerate() {
                let o = oracle(z, r, zq, rq, l);
                assert!((kl - o).abs() <= 1e-10 * k[0].abs() + 1e-9 * o.abs(), "l={l}: {kl} vs {o}");
            }
        }
    }

    #[test]
    fn modes_resum_to_kernel() {
        let (z, r, zq, rq) = (0.2, 0.6, 0.5, 1.2);
        let mut k = vec![0.0; 80];
        kernel_modes(z, r, zq, rq, &mut k);
        for t in [-1.0, -0.3, 0.4, 1.0] {
            let mut p = vec![0.0; 80];
            legendre_p(t, &mut p);
            let s: f64 = k.iter().zip(&p).map(|(a, b)| a * b).sum();
            let dist2 = (z - zq).powi(2) + r * r + rq * rq - 2.0 * r * rq * t;
            assert!((s - ALPHA4 / dist2).abs() < 1e-13, "t={t}");
        }
    }

    #[test]
    fn on_axis_keeps_only_monopole() {
        let mut k = vec![1.0; 5];
        kernel_modes(0.3, 0.0, 1.0, 0.5, &mut k);
        assert!((k[0] - ALPHA4 / (0.49 + 0.25)).abs() < 1e-16);
        assert!(k[1..].iter().all(|&v| v == 0.0));
    }
}
