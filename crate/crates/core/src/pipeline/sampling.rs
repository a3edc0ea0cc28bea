use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, RomError};

const PRIMES: [u64; 6] = [2, 3, 5, 7, 11, 13];

/// Van der Corput radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base) as f64 * f;
        index /= base;
        f *= inv;
    }
    out
}

/// Halton points in `[lo, hi]`; point `k` uses sequence index `skip + k + 1`.
pub fn halton(count: usize, lo: &[f64], hi: &[f64], skip: usize) -> Result<Vec<Vec<f64>>> {
    let dim = lo.len();
    if dim == 0 || dim > PRIMES.len() || hi.len() != dim {
        return Err(RomError::InvalidArgument(format!("Halton sampling supports 1 to {} dimensions", PRIMES.len())));
    }
    Ok((0..count)
        .map(|k| {
            let idx = (skip + k + 1) as u64;
            (0..dim).map(|d| lo[d] + (hi[d] - lo[d]) * radical_inverse(idx, PRIMES[d])).collect()
        })
        .collect())
}

/// Seeded uniform samples in `[lo, hi]`.
pub fn uniform(count: usize, lo: &[f64], hi: &[f64], seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| lo.iter().zip(hi).map(|(a, b)| a + (b - a) * rng.gen::<f64>()).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_points() {
        assert_eq!(halton(1, &[0.0], &[1.0], 0).unwrap(), vec![vec![0.5]]);
        let p = halton(3, &[0.0, 0.0], &[1.0, 1.0], 0).unwrap();
        assert_eq!(p[1], vec![0.25, 2.0 / 3.0]);
        assert!((p[2][1] - 1.0 / 9.0).abs() < 1e-15);
    }
}
