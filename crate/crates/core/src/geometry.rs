use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

pub type Point4 = Vector4<f64>;

pub fn point(c: [f64; 4]) -> Point4 {
    Vector4::new(c[0], c[1], c[2], c[3])
}

pub fn to_array(p: &Point4) -> [f64; 4] {
    [p[0], p[1], p[2], p[3]]
}

/// Axis-aligned box in R⁴.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box4 {
    pub lo: [f64; 4],
    pub hi: [f64; 4],
}

impl Box4 {
    pub fn new(lo: [f64; 4], hi: [f64; 4]) -> Self {
        Self { lo, hi }
    }

    pub fn cube(center: [f64; 4], half: f64) -> Self {
        let mut lo = center;
        let mut hi = center;
        for k in 0..4 {
            lo[k] -= half;
            hi[k] += half;
        }
        Self { lo, hi }
    }

    /// Parses the 8-number layout `lo1 hi1 lo2 hi2 lo3 hi3 lo4 hi4`.
    pub fn from_interleaved(v: &[f64]) -> Option<Self> {
        if v.len() != 8 {
            return None;
        }
        let mut lo = [0.0; 4];
        let mut hi = [0.0; 4];
        for k in 0..4 {
            lo[k] = v[2 * k];
            hi[k] = v[2 * k + 1];
            if !(lo[k] < hi[k]) {
                return None;
            }
        }
        Some(Self { lo, hi })
    }

    pub fn contains(&self, x: &Point4) -> bool {
        (0..4).all(|k| x[k] >= self.lo[k] && x[k] <= self.hi[k])
    }

    pub fn center(&self) -> Point4 {
        Vector4::from_fn(|k, _| 0.5 * (self.lo[k] + self.hi[k]))
    }

    pub fn width(&self, k: usize) -> f64 {
        self.hi[k] - self.lo[k]
    }

    pub fn volume(&self) -> f64 {
        (0..4).map(|k| self.width(k)).product()
    }

    /// Maps a point of the unit cube into the box.
    pub fn map_unit(&self, u: [f64; 4]) -> Point4 {
        Vector4::from_fn(|k, _| self.lo[k] + u[k] * self.width(k))
    }

    pub fn clamp(&self, x: &Point4) -> Point4 {
        Vector4::from_fn(|k, _| x[k].clamp(self.lo[k], self.hi[k]))
    }

    /// Distance from `x` to the nearest face, negative outside.
    pub fn interior_margin(&self, x: &Point4) -> f64 {
        (0..4)
            .map(|k| (x[k] - self.lo[k]).min(self.hi[k] - x[k]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn corners(&self) -> Vec<Point4> {
        (0..16)
            .map(|m| Vector4::from_fn(|k, _| if m >> k & 1 == 1 { self.hi[k] } else { self.lo[k] }))
            .collect()
    }
}

/// Pairwise (cascade) summation; deterministic and order-fixed.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_roundtrip() {
        let b = Box4::from_interleaved(&[-1.0, 1.0, 0.0, 2.0, -0.5, 0.5, 3.0, 4.0]).unwrap();
        assert_eq!(b.lo, [-1.0, 0.0, -0.5, 3.0]);
        assert!((b.volume() - 4.0).abs() < 1e-15);
        assert!(b.contains(&b.center()));
        assert_eq!(b.corners().len(), 16);
        assert!(Box4::from_interleaved(&[1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]).is_none());
    }

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 499500.0);
    }
}
