//! Seeded randomness.
//!
//! Every random object in the crate is drawn from a `ChaCha8Rng` seeded with
//! a 64-bit value. Gaussian entries come from `rand_distr::StandardNormal`
//! (ziggurat) applied to that stream, so a seed fixes every variate on every
//! platform. Independent trials get their seeds from [`derive_seed`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::matrix::Mat;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One round of the splitmix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` at parameter point `point`:
/// `splitmix64(splitmix64(splitmix64(base) ^ point) ^ trial)`.
pub fn derive_seed(base: u64, point: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ point) ^ trial)
}

/// `rows × cols` matrix with i.i.d. `N(0, variance)` entries, filled column by
/// column.
pub fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, variance: f64) -> Mat {
    let sd = variance.sqrt();
    let mut m = Mat::zeros(rows, cols);
    for x in m.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *x = sd * z;
    }
    m
}

/// `±1` with probability 1/2 each.
pub fn random_sign<R: Rng>(rng: &mut R) -> f64 {
    if rng.random_bool(0.5) {
        1.0
    } else {
        -1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ() {
        let a = derive_seed(7, 0, 0);
        assert_ne!(a, derive_seed(7, 0, 1));
        assert_ne!(a, derive_seed(7, 1, 0));
        assert_ne!(a, derive_seed(8, 0, 0));
        assert_eq!(a, derive_seed(7, 0, 0));
    }

    #[test]
    fn gaussian_variance() {
        let mut rng = seeded(1);
        let m = gaussian_matrix(&mut rng, 200, 200, 0.25);
        let n = m.len() as f64;
        let mean = m.sum() / n;
        let var = m.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        // sd of the sample variance is about sqrt(2/n) * 0.25
        assert!((var - 0.25).abs() < 3.0 * (2.0 / n).sqrt() * 0.25 * 1.5);
        assert!(mean.abs() < 3.0 * (0.25 / n).sqrt());
    }
}
