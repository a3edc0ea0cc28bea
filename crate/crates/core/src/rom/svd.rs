use faer::{Mat, MatRef};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, RomError};
use crate::linalg::{frobenius_sq, DMat};

/// Smallest `m` such that the discarded energy `Σ_{i>m} σ_i²` is at most
/// `ε² Σ σ_i²`.
pub fn energy_rank(sigma: &[f64], eps: f64) -> usize {
    let mut tails = vec![0.0; sigma.len() + 1];
    for (m, s) in sigma.iter().enumerate().rev() {
        tails[m] = tails[m + 1] + s * s;
    }
    let total = tails[0];
    if total == 0.0 {
        return 0;
    }
    let limit = eps * eps * total;
    tails.iter().position(|&t| t <= limit).unwrap_or(sigma.len())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SvdOptions {
    /// Use an exact thin SVD instead of the randomized range finder.
    pub deterministic: bool,
    pub oversample: usize,
    pub power_iters: usize,
    pub seed: u64,
}

impl Default for SvdOptions {
    fn default() -> Self {
        SvdOptions { deterministic: false, oversample: 10, power_iters: 2, seed: 0 }
    }
}

impl SvdOptions {
    pub fn deterministic() -> Self {
        SvdOptions { deterministic: true, ..Self::default() }
    }
}

/// `M ≈ U diag(s) Vᵀ` with `U: m x r`, `V: n x r`.
#[derive(Clone, Debug)]
pub struct TruncatedSvd {
    pub u: DMat,
    pub s: Vec<f64>,
    pub v: DMat,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn reconstruct(&self) -> DMat {
        let us = Mat::from_fn(self.u.nrows(), self.rank(), |i, j| self.u[(i, j)] * self.s[j]);
        &us * self.v.transpose()
    }
}

pub(crate) fn check_tolerance(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(RomError::InvalidArgument(format!("tolerance must lie in (0, 1), got {eps}")));
    }
    Ok(())
}

fn truncate(u: MatRef<'_, f64>, s: &[f64], v: MatRef<'_, f64>, r: usize) -> TruncatedSvd {
    TruncatedSvd { u: u.subcols(0, r).to_owned(), s: s[..r].to_vec(), v: v.subcols(0, r).to_owned() }
}

fn exact_svd(m: MatRef<'_, f64>) -> Result<(DMat, Vec<f64>, DMat)> {
    let svd = m.thin_svd().map_err(|e| RomError::Singular(format!("svd failed: {e:?}")))?;
    let s: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    Ok((svd.U().to_owned(), s, svd.V().to_owned()))
}

fn orthonormalize(y: &DMat) -> DMat {
    y.qr().compute_thin_Q()
}

/// Truncated SVD at relative energy tolerance `eps`. The randomized path
/// grows the sketch until the captured energy, measured against the exact
/// Frobenius norm, meets the tolerance.
pub fn rsvd(m: MatRef<'_, f64>, eps: f64, opts: &SvdOptions) -> Result<TruncatedSvd> {
    check_tolerance(eps)?;
    let (nr, nc) = (m.nrows(), m.ncols());
    let kmax = nr.min(nc);
    let total = frobenius_sq(m);
    if kmax == 0 || total == 0.0 {
        return Ok(TruncatedSvd { u: Mat::zeros(nr, 0), s: Vec::new(), v: Mat::zeros(nc, 0) });
    }
    if opts.deterministic || kmax <= 2 * opts.oversample + 8 {
        let (u, s, v) = exact_svd(m)?;
        let r = energy_rank(&s, eps);
        return Ok(truncate(u.as_ref(), &s, v.as_ref(), r));
    }
    let limit = eps * eps * total;
    let mut l = kmax.min(8 + opts.oversample);
    let mut attempt = 0u64;
    loop {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(attempt));
        let omega: DMat = Mat::from_fn(nc, l, |_, _| StandardNormal.sample(&mut rng));
        let mut q = orthonormalize(&(m * &omega));
        for _ in 0..opts.power_iters {
            let z = orthonormalize(&(m.transpose() * &q));
            q = orthonormalize(&(m * &z));
        }
        let b = q.transpose() * m;
        let (ub, s, vb) = exact_svd(b.as_ref())?;
        let outside = frobenius_sq((m - &q * &b).as_ref());
        let mut tails = vec![outside; s.len() + 1];
        for k in (0..s.len()).rev() {
            tails[k] = tails[k + 1] + s[k] * s[k];
        }
        let rank = tails.iter().position(|&t| t <= limit);
        let done = l == kmax || matches!(rank, Some(r) if r + opts.oversample / 2 <= l);
        if done {
            let u = &q * &ub;
            let r = rank.unwrap_or(s.len());
            return Ok(truncate(u.as_ref(), &s, vb.as_ref(), r));
        }
        l = kmax.min(2 * l);
        attempt += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn low_rank(nr: usize, nc: usize, sigma: &[f64], seed: u64) -> DMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: DMat = Mat::from_fn(nr, sigma.len(), |_, _| StandardNormal.sample(&mut rng));
        let b: DMat = Mat::from_fn(nc, sigma.len(), |_, _| StandardNormal.sample(&mut rng));
        let qa = orthonormalize(&a);
        let qb = orthonormalize(&b);
        let s = Mat::from_fn(sigma.len(), sigma.len(), |i, j| if i == j { sigma[i] } else { 0.0 });
        &qa * &s * qb.transpose()
    }

    #[test]
    fn energy_rank_examples() {
        assert_eq!(energy_rank(&[1.0, 0.1, 0.01], 0.05), 2);
        assert_eq!(energy_rank(&[1.0, 0.0], 1e-3), 1);
        assert_eq!(energy_rank(&[], 1e-3), 0);
        assert_eq!(energy_rank(&[0.0, 0.0], 1e-3), 0);
    }

    #[test]
    fn randomized_matches_deterministic_rank() {
        let sigma: Vec<f64> = (0..40).map(|k| 10f64.powf(-(k as f64) / 6.0)).collect();
        let m = low_rank(300, 60, &sigma, 3);
        for eps in [1e-2, 1e-3, 1e-4] {
            let d = rsvd(m.as_ref(), eps, &SvdOptions::deterministic()).unwrap();
            let r = rsvd(m.as_ref(), eps, &SvdOptions { seed: 7, ..Default::default() }).unwrap();
            assert!((d.rank() as i64 - r.rank() as i64).abs() <= 1, "{eps}: {} vs {}", d.rank(), r.rank());
            let tail: f64 = sigma.iter().skip(r.rank()).map(|s| s * s).sum::<f64>().sqrt();
            let err = frobenius_sq((&m - r.reconstruct()).as_ref()).sqrt();
            assert!(err <= 1.1 * tail, "{err} {tail}");
            assert!(err <= eps * frobenius_sq(m.as_ref()).sqrt());
        }
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let m = Mat::<f64>::zeros(10, 4);
        assert_eq!(rsvd(m.as_ref(), 1e-3, &SvdOptions::default()).unwrap().rank(), 0);
    }

    #[test]
    fn rejects_bad_tolerance() {
        let m = Mat::<f64>::identity(3, 3);
        assert!(rsvd(m.as_ref(), 0.0, &SvdOptions::default()).is_err());
        assert!(rsvd(m.as_ref(), 1.0, &SvdOptions::default()).is_err());
    }
}
