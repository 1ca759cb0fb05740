//! Cubature rules on S³ ⊂ R⁴ normalized to unit total weight.

use std::f64::consts::PI;

use super::adaptive::gauss_legendre;

#[derive(Debug, Clone)]
pub struct SphericalRule {
    pub points: Vec<[f64; 4]>,
    pub weights: Vec<f64>,
    /// Largest polynomial degree integrated exactly.
    pub degree: usize,
}

impl SphericalRule {
    /// Vertices of the 24-cell: a spherical 5-design.
    pub fn cell24() -> Self {
        let mut pts = axis_points();
        pts.extend(half_points());
        uniform(pts, 5)
    }

    /// Vertices of the 600-cell: a spherical 11-design with 120 nodes.
    pub fn cell600() -> Self {
        let mut pts = axis_points();
        pts.extend(half_points());
        let phi = 0.5 * (1.0 + 5f64.sqrt());
        let base = [0.5 * phi, 0.5, 0.5 / phi, 0.0];
        for perm in even_permutations() {
            for signs in 0..8u32 {
                let mut p = [0.0; 4];
                let mut bit = 0;
                for (k, &src) in perm.iter().enumerate() {
                    let mut v = base[src];
                    if v != 0.0 {
                        if signs >> bit & 1 == 1 {
                            v = -v;
                        }
                        bit += 1;
                    }
                    p[k] = v;
                }
                pts.push(p);
            }
        }
        uniform(pts, 11)
    }

    /// Product rule in Hopf coordinates exact to the given degree.
    ///
    /// x = (√(1-u) cos φ₁, √(1-u) sin φ₁, √u cos φ₂, √u sin φ₂) with u uniform on [0, 1].
    pub fn hopf(degree: usize) -> Self {
        let nu = degree / 4 + 1;
        let nphi = degree + 1;
        let (gx, gw) = gauss_legendre(nu);
        let mut points = Vec::with_capacity(nu * nphi * nphi);
        let mut weights = Vec::with_capacity(nu * nphi * nphi);
        for (x, w) in gx.iter().zip(&gw) {
            let u = 0.5 * (x + 1.0);
            let (c, s) = ((1.0 - u).sqrt(), u.sqrt());
            for i in 0..nphi {
                let p1 = 2.0 * PI * (i as f64 + 0.5) / nphi as f64;
                for j in 0..nphi {
                    let p2 = 2.0 * PI * j as f64 / nphi as f64;
                    points.push([c * p1.cos(), c * p1.sin(), s * p2.cos(), s * p2.sin()]);
                    weights.push(0.5 * w / (nphi * nphi) as f64);
                }
            }
        }
        Self { points, weights, degree }
    }

    /// Smallest built-in rule exact to `degree`.
    pub fn for_degree(degree: usize) -> Self {
        match degree {
            0..=5 => Self::cell24(),
            6..=11 => Self::cell600(),
            d => Self::hopf(d),
        }
    }

    /// Mean of `f` over S³.
    pub fn average<F: Fn(&[f64; 4]) -> f64>(&self, f: F) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }

    /// The same rule after a fixed generic rotation; used as an error companion.
    pub fn rotated(&self) -> Self {
        let angles = [0.3711, 1.0472 / 3.0, 0.8123, 0.2231, 1.3137, 0.5772];
        let planes = [(0, 1), (2, 3), (0, 2), (1, 3), (0, 3), (1, 2)];
        let points = self
            .points
            .iter()
            .map(|p| {
                let mut q = *p;
                for (&(i, j), &a) in planes.iter().zip(&angles) {
                    let (c, s) = (f64::cos(a), f64::sin(a));
                    let (u, v) = (q[i], q[j]);
                    q[i] = c * u - s * v;
                    q[j] = s * u + c * v;
                }
                q
            })
            .collect();
        Self { points, weights: self.weights.clone(), degree: self.degree }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn uniform(points: Vec<[f64; 4]>, degree: usize) -> SphericalRule {
    let w = 1.0 / points.len() as f64;
    let weights = vec![w; points.len()];
    SphericalRule { points, weights, degree }
}

fn axis_points() -> Vec<[f64; 4]> {
    let mut pts = Vec::with_capacity(8);
    for k in 0..4 {
        for s in [1.0, -1.0] {
            let mut p = [0.0; 4];
            p[k] = s;
            pts.push(p);
        }
    }
    pts
}

fn half_points() -> Vec<[f64; 4]> {
    (0..16)
        .map(|m| {
            let mut p = [0.5; 4];
            for (k, v) in p.iter_mut().enumerate() {
                if m >> k & 1 == 1 {
                    *v = -0.5;
                }
            }
            p
        })
        .collect()
}

fn even_permutations() -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(12);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let p = [a, b, c, d];
                    let distinct = a != b && a != c && a != d && b != c && b != d && c != d;
                    if distinct {
                        let mut inv = 0;
                        for i in 0..4 {
                            for j in i + 1..4 {
                                if p[i] > p[j] {
                                    inv += 1;
                                }
                            }
                        }
                        if inv % 2 == 0 {
                            out.push(p);
                        }
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// E[x₁^{2k}] on S³ = (2k-1)!! / (4·6·…·(2k+2)).
    fn even_moment(k: i32) -> f64 {
        let mut num = 1.0;
        let mut den = 1.0;
        for i in 1..=k {
            num *= (2 * i - 1) as f64;
            den *= (2 * i + 2) as f64;
        }
        num / den
    }

    #[test]
    fn cell600_is_an_eleven_design() {
        let r = SphericalRule::cell600();
        assert_eq!(r.len(), 120);
        for p in &r.points {
            let n: f64 = p.iter().map(|v| v * v).sum();
            assert!((n - 1.0).abs() < 1e-14);
        }
        for k in 1..=5 {
            let m = r.average(|p| p[0].powi(2 * k));
            assert!((m - even_moment(k)).abs() < 1e-14, "k={k}");
        }
        let mixed = r.average(|p| p[0].powi(4) * p[1].powi(2) * p[2].powi(2) * p[3].powi(2));
        // E[x₁⁴x₂²x₃²x₄²] = 3·1·1·1/(4·6·8·10·12·14)·... evaluated via Dirichlet moments
        let exact = 3.0 / (4.0 * 6.0 * 8.0 * 10.0 * 12.0);
        assert!((mixed - exact).abs() < 1e-15, "{mixed} vs {exact}");
        assert!(r.average(|p| p[0].powi(3) * p[1]).abs() < 1e-15);
        // degree 12 is not reproduced
        assert!((r.average(|p| p[0].powi(12)) - even_moment(6)).abs() > 1e-6);
    }

    #[test]
    fn cell24_is_a_five_design() {
        let r = SphericalRule::cell24();
        assert_eq!(r.len(), 24);
        assert!((r.average(|p| p[2].powi(4)) - 0.125).abs() < 1e-15);
        assert!((r.average(|p| p[0] * p[0] * p[1] * p[1]) - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn hopf_rule_reaches_high_degree() {
        let r = SphericalRule::hopf(16);
        for k in 1..=8 {
            assert!((r.average(|p| p[0].powi(2 * k)) - even_moment(k)).abs() < 1e-14, "k={k}");
            assert!((r.average(|p| p[3].powi(2 * k)) - even_moment(k)).abs() < 1e-14, "k={k}");
        }
        let w: f64 = r.weights.iter().sum();
        assert!((w - 1.0).abs() < 1e-14);
    }
}
