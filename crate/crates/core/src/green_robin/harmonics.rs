//! Real orthonormal spherical harmonics on S² and a product rule to project onto them.

use std::f64::consts::PI;

use crate::quadrature::adaptive::gauss_legendre;

/// Index of (l, m) in the packed layout l² + l + m.
#[inline]
pub fn lm_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

/// Fills Y_lm(ω) for all l ≤ `lmax`, packed by [`lm_index`]. ω must be a unit vector;
/// its first component is the polar axis.
pub fn real_harmonics(omega: [f64; 3], lmax: usize, out: &mut Vec<f64>) {
    let n = (lmax + 1) * (lmax + 1);
    out.clear();
    out.resize(n, 0.0);
    let ct = omega[0].clamp(-1.0, 1.0);
    let st = (omega[1] * omega[1] + omega[2] * omega[2]).sqrt();
    let (cp, sp) = if st > 0.0 { (omega[1] / st, omega[2] / st) } else { (1.0, 0.0) };
    // Normalized associated Legendre functions, column by column in m.
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    let (mut cm, mut sm) = (1.0, 0.0); // cos(mφ), sin(mφ)
    for m in 0..=lmax {
        if m > 0 {
            pmm *= -((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * st;
            let c = cm * cp - sm * sp;
            sm = sm * cp + cm * sp;
            cm = c;
        }
        let mut p_prev = 0.0;
        let mut p = pmm;
        for l in m..=lmax {
            if l == m + 1 {
                p_prev = p;
                p = ((2 * m + 3) as f64).sqrt() * ct * pmm;
            } else if l > m + 1 {
                let lf = l as f64;
                let mf = m as f64;
                let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
                let next = a * (ct * p - b * p_prev);
                p_prev = p;
                p = next;
            }
            if m == 0 {
                out[lm_index(l, 0)] = p;
            } else {
                let s2 = std::f64::consts::SQRT_2;
                out[lm_index(l, m as i64)] = s2 * p * cm;
                out[lm_index(l, -(m as i64))] = s2 * p * sm;
            }
        }
    }
}

/// Product rule on S² exact for polynomials of degree ≤ 2·lmax + 1.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub dirs: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    pub fn new(lmax: usize) -> Self {
        let nt = lmax + 2;
        let np = 2 * lmax + 3;
        let (x, w) = gauss_legendre(nt);
        let mut dirs = Vec::with_capacity(nt * np);
        let mut weights = Vec::with_capacity(nt * np);
        for (ct, wt) in x.iter().zip(&w) {
            let st = (1.0 - ct * ct).max(0.0).sqrt();
            for j in 0..np {
                let phi = 2.0 * PI * j as f64 / np as f64;
                dirs.push([*ct, st * phi.cos(), st * phi.sin()]);
                weights.push(wt * 2.0 * PI / np as f64);
            }
        }
        Self { dirs, weights }
    }
}
