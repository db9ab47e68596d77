//! Low-discrepancy point sets. Prefixes of these sequences are nested, so
//! enlarging a sample keeps every earlier point.

use statrs::distribution::{ContinuousCDF, Normal};

const PRIMES: [u64; 24] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
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

/// Halton sequence in `[0,1)^d` with a fixed random shift mod 1.
#[derive(Clone, Debug)]
pub struct Halton {
    index: u64,
    shift: Vec<f64>,
}

impl Halton {
    pub fn new(dim: usize, shift: Vec<f64>) -> Self {
        assert!(dim <= PRIMES.len(), "Halton sequences are provided up to {} dimensions", PRIMES.len());
        assert_eq!(shift.len(), dim);
        Halton { index: 0, shift }
    }

    /// Shift drawn from a ChaCha stream seeded with `seed`.
    pub fn seeded(dim: usize, seed: u64) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let shift = (0..dim).map(|_| rng.gen::<f64>()).collect();
        Self::new(dim, shift)
    }

    pub fn unshifted(dim: usize) -> Self {
        Self::new(dim, vec![0.0; dim])
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        self.index += 1;
        self.shift
            .iter()
            .enumerate()
            .map(|(k, s)| (radical_inverse(self.index, PRIMES[k]) + s).fract())
            .collect()
    }
}

/// Maps a point of `[0,1)^d` to the unit sphere `S^{d-1} ⊂ ℝ^d` through
/// Gaussian coordinates. For `d = 1` returns `±1`.
pub fn cube_to_sphere(u: &[f64]) -> Vec<f64> {
    if u.len() == 1 {
        return vec![if u[0] < 0.5 { 1.0 } else { -1.0 }];
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let g: Vec<f64> = u.iter().map(|&t| normal.inverse_cdf(t.clamp(1e-12, 1.0 - 1e-12))).collect();
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-300 {
        let mut e = vec![0.0; u.len()];
        e[0] = 1.0;
        return e;
    }
    g.iter().map(|v| v / norm).collect()
}

/// Householder completion: an orthonormal basis of `ℝ^d` whose first vector
/// is the unit vector `u`; returns the remaining `d − 1` vectors.
pub fn householder_complement(u: &[f64]) -> Vec<Vec<f64>> {
    let d = u.len();
    // H = I − 2 w wᵀ/|w|² with w = u − e_k maps e_k to u; its other columns
    // are orthonormal and orthogonal to u.
    let k = (0..d).max_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs())).unwrap_or(0);
    let sign = if u[k] >= 0.0 { 1.0 } else { -1.0 };
    let mut w: Vec<f64> = u.iter().map(|v| sign * v).collect();
    w[k] -= 1.0;
    let ww: f64 = w.iter().map(|v| v * v).sum();
    (0..d)
        .filter(|&j| j != k)
        .map(|j| {
            (0..d)
                .map(|i| {
                    let id = if i == j { 1.0 } else { 0.0 };
                    if ww < 1e-300 {
                        id
                    } else {
                        id - 2.0 * w[i] * w[j] / ww
                    }
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base_two() {
        let v: Vec<f64> = (1..5).map(|i| radical_inverse(i, 2)).collect();
        assert_eq!(v, vec![0.5, 0.25, 0.75, 0.125]);
    }

    #[test]
    fn prefixes_are_nested() {
        let mut a = Halton::new(3, vec![0.1, 0.2, 0.3]);
        let mut b = Halton::new(3, vec![0.1, 0.2, 0.3]);
        let first: Vec<_> = (0..10).map(|_| a.next_point()).collect();
        let second: Vec<_> = (0..20).map(|_| b.next_point()).collect();
        assert_eq!(first[..], second[..10]);
    }

    #[test]
    fn householder_complement_is_orthonormal() {
        for u in [vec![0.6, 0.8, 0.0], vec![0.0, 0.0, -1.0], cube_to_sphere(&[0.3, 0.9, 0.5, 0.2])] {
            let rest = householder_complement(&u);
            let mut all = vec![u.clone()];
            all.extend(rest);
            for i in 0..all.len() {
                for j in 0..all.len() {
                    let dot: f64 = all[i].iter().zip(&all[j]).map(|(a, b)| a * b).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((dot - want).abs() < 1e-14);
                }
            }
        }
    }
}
