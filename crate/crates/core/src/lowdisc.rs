//! Halton sequences for reproducible sampling.

use statrs::distribution::{ContinuousCDF, Normal};

const PRIMES: [u64; 40] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173,
];

/// Radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    r
}

/// Multi-dimensional Halton sequence; `seed` offsets the starting index.
#[derive(Debug, Clone)]
pub struct Halton {
    dims: usize,
    next: u64,
}

impl Halton {
    pub fn new(dims: usize, seed: u64) -> Self {
        assert!(dims <= PRIMES.len(), "at most {} Halton dimensions", PRIMES.len());
        // Skip the first points, which are strongly correlated across bases.
        Self { dims, next: 20 + seed.wrapping_mul(7919) }
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let i = self.next;
        self.next += 1;
        PRIMES[..self.dims].iter().map(|&b| radical_inverse(i, b)).collect()
    }
}

/// Maps coordinates in `(0, 1)` to a unit vector through the Gaussian quantile.
pub fn unit_vector(u: &[f64]) -> Vec<f64> {
    let normal = Normal::standard();
    let v: Vec<f64> = u
        .iter()
        .map(|&ui| normal.inverse_cdf(ui.clamp(1e-12, 1.0 - 1e-12)))
        .collect();
    let r = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    if r < 1e-300 {
        let mut e = vec![0.0; u.len()];
        e[0] = 1.0;
        return e;
    }
    v.into_iter().map(|c| c / r).collect()
}
