//! Halton points with Cranley–Patterson random shifts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PRIMES: [u64; 4] = [2, 3, 5, 7];

pub fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// i-th point of the 4D Halton sequence (i ≥ 1 skips the origin).
pub fn halton(i: u64) -> [f64; 4] {
    [
        radical_inverse(i, PRIMES[0]),
        radical_inverse(i, PRIMES[1]),
        radical_inverse(i, PRIMES[2]),
        radical_inverse(i, PRIMES[3]),
    ]
}

/// `count` independent uniform shifts of the unit cube derived from `seed`.
pub fn shifts(seed: u64, count: usize) -> Vec<[f64; 4]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| [rng.random(), rng.random(), rng.random(), rng.random()]).collect()
}

/// Shifted Halton point, wrapped into [0, 1)⁴.
pub fn shifted(i: u64, shift: &[f64; 4]) -> [f64; 4] {
    let h = halton(i);
    let mut out = [0.0; 4];
    for k in 0..4 {
        let v = h[k] + shift[k];
        out[k] = v - v.floor();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(5, 3) - (2.0 / 3.0 + 1.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn mean_of_product_converges() {
        let n = 20000;
        let s: f64 = (1..=n).map(|i| halton(i).iter().product::<f64>()).sum::<f64>() / n as f64;
        assert!((s - 1.0 / 16.0).abs() < 1e-3);
    }

    #[test]
    fn shifts_are_reproducible() {
        assert_eq!(shifts(7, 4), shifts(7, 4));
        assert_ne!(shifts(7, 4), shifts(8, 4));
    }
}
