//! Supremizer enrichment of reduced velocity bases and the reduced
//! saddle-point solve.

use faer::Mat;

use crate::error::{Result, RomError};
use crate::linalg::{column, singular_values, solve_dense, CholeskyFactor, CsrMatrix, DMat};
use crate::rom::project::SINGULAR_CONDITION;

/// Relative norm below which a column is dropped.
pub const DROP_TOLERANCE: f64 = 1e-10;

/// Smallest admissible singular value of the reduced coupling.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Modified Gram-Schmidt in the `X` inner product with one
/// re-orthogonalization pass. Returns the kept columns and the number
/// dropped.
pub fn gram_schmidt(v: &DMat, x: &CsrMatrix) -> (DMat, usize) {
    let mut kept: Vec<Vec<f64>> = Vec::new();
    let mut xkept: Vec<Vec<f64>> = Vec::new();
    let mut dropped = 0;
    for j in 0..v.ncols() {
        let mut w = column(v.as_ref(), j);
        let n0 = x.quadratic_form(&w, &w).max(0.0).sqrt();
        if n0 == 0.0 {
            dropped += 1;
            continue;
        }
        for _ in 0..2 {
            for (q, xq) in kept.iter().zip(&xkept) {
                let c: f64 = xq.iter().zip(&w).map(|(a, b)| a * b).sum();
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let xw = x.mul_vec(&w);
        let n: f64 = xw.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt();
        if n < DROP_TOLERANCE * n0 {
            dropped += 1;
            continue;
        }
        kept.push(w.iter().map(|v| v / n).collect());
        xkept.push(xw.iter().map(|v| v / n).collect());
    }
    let out = Mat::from_fn(v.nrows(), kept.len(), |i, j| kept[j][i]);
    (out, dropped)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SupremizerKind {
    /// `S = H⁻¹ Bᵀ Φp` with `X = HᵀH`.
    Whitened,
    /// `S = X⁻¹ Bᵀ Φp`.
    Classical,
}

impl SupremizerKind {
    pub fn name(self) -> &'static str {
        match self {
            SupremizerKind::Whitened => "whitened",
            SupremizerKind::Classical => "classical",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "whitened" => Some(SupremizerKind::Whitened),
            "classical" => Some(SupremizerKind::Classical),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SupremizerSet {
    pub supremizers: DMat,
    pub basis: DMat,
    pub dropped: usize,
    pub sigma_min: f64,
}

/// `σ_min(Φpᵀ B Φu)`; infinite when there are no pressure modes.
pub fn reduced_coupling_sigma_min(phi_u: &DMat, phi_p: &DMat, b: &CsrMatrix) -> Result<f64> {
    if phi_p.ncols() == 0 {
        return Ok(f64::INFINITY);
    }
    if phi_u.ncols() < phi_p.ncols() {
        return Ok(0.0);
    }
    let bn = phi_p.transpose() * b.mul_dense(phi_u.as_ref());
    Ok(singular_values(bn.as_ref())?.last().copied().unwrap_or(0.0))
}

/// Appends supremizers of every pressure mode to `Φu` and re-orthonormalizes.
pub fn enrich(phi_u: &DMat, phi_p: &DMat, x: &CsrMatrix, chol: &CholeskyFactor, b_omega: &CsrMatrix, kind: SupremizerKind) -> Result<SupremizerSet> {
    let bt_phi = b_omega.mul_dense_transpose(phi_p.as_ref());
    let s = match kind {
        SupremizerKind::Whitened => chol.solve_h(bt_phi.as_ref()),
        SupremizerKind::Classical => chol.solve(bt_phi.as_ref()),
    };
    let mut cols: Vec<Vec<f64>> = (0..phi_u.ncols()).map(|j| column(phi_u.as_ref(), j)).collect();
    cols.extend((0..s.ncols()).map(|j| column(s.as_ref(), j)));
    let stacked = Mat::from_fn(phi_u.nrows(), cols.len(), |i, j| cols[j][i]);
    let (basis, dropped) = gram_schmidt(&stacked, x);
    let sigma_min = reduced_coupling_sigma_min(&basis, phi_p, b_omega)?;
    if !(sigma_min > RANK_TOLERANCE) {
        return Err(RomError::EnrichmentInsufficient { sigma_min });
    }
    Ok(SupremizerSet { supremizers: s, basis, dropped, sigma_min })
}

/// Solves `[[A, -Bᵀ], [B, 0]] [u; p] = [l; k]` densely.
pub fn solve_reduced_stokes(a: &DMat, b: &DMat, l: &[f64], k: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let nu = a.nrows();
    let np = b.nrows();
    let m = Mat::from_fn(nu + np, nu + np, |i, j| match (i < nu, j < nu) {
        (true, true) => a[(i, j)],
        (true, false) => -b[(j - nu, i)],
        (false, true) => b[(i - nu, j)],
        (false, false) => 0.0,
    });
    let sv = singular_values(m.as_ref())?;
    let cond = match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (None, None) => 1.0,
        _ => f64::INFINITY,
    };
    if !(cond < SINGULAR_CONDITION) {
        let sb = singular_values(b.as_ref())?;
        let smin = if np > nu { 0.0 } else { sb.last().copied().unwrap_or(0.0) };
        return Err(RomError::Singular(format!("reduced saddle system with condition {cond:e}, coupling sigma_min {smin:e}")));
    }
    let rhs: Vec<f64> = l.iter().chain(k).copied().collect();
    let x = solve_dense(m.as_ref(), &rhs)?;
    Ok((x[..nu].to_vec(), x[nu..].to_vec()))
}

/// Condition estimate of the reduced saddle matrix, used by the
/// localized online solve.
pub fn reduced_stokes_condition(a: &DMat, b: &DMat) -> f64 {
    let nu = a.nrows();
    let np = b.nrows();
    let m = Mat::from_fn(nu + np, nu + np, |i, j| match (i < nu, j < nu) {
        (true, true) => a[(i, j)],
        (true, false) => -b[(j - nu, i)],
        (false, true) => b[(i - nu, j)],
        (false, false) => 0.0,
    });
    crate::linalg::condition_estimate(m.as_ref()).unwrap_or(f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn spd(n: usize, seed: u64) -> CsrMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g: DMat = Mat::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
        let m = &g * g.transpose() + Mat::<f64>::identity(n, n) * faer::Scale(n as f64);
        CsrMatrix::from_dense(m.as_ref())
    }

    #[test]
    fn gram_schmidt_orthonormalizes_and_drops_duplicates() {
        let x = spd(50, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v: DMat = Mat::from_fn(50, 8, |_, _| StandardNormal.sample(&mut rng));
        let (q, dropped) = gram_schmidt(&v, &x);
        assert_eq!(dropped, 0);
        let g = q.transpose() * x.mul_dense(q.as_ref());
        for i in 0..8 {
            for j in 0..8 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - e).abs() < 1e-8);
            }
        }
        let dup = Mat::from_fn(50, 3, |i, j| v[(i, j.min(1))]);
        assert_eq!(gram_schmidt(&dup, &x).1, 1);
        let (again, d) = gram_schmidt(&q, &x);
        assert_eq!(d, 0);
        assert!((&again - &q).norm_max() < 1e-12);
    }

    #[test]
    fn identity_norm_supremizers_are_coupling_columns() {
        let x = CsrMatrix::identity(6);
        let chol = CholeskyFactor::new(&x).unwrap();
        let b = CsrMatrix::from_dense(Mat::from_fn(2, 6, |i, j| (i * 6 + j) as f64 * 0.1 + if i == j { 1.0 } else { 0.0 }).as_ref());
        let phi_u = Mat::from_fn(6, 1, |i, _| if i == 5 { 1.0 } else { 0.0 });
        let phi_p = Mat::<f64>::identity(2, 2);
        let s = enrich(&phi_u, &phi_p, &x, &chol, &b, SupremizerKind::Whitened).unwrap();
        let bt = b.to_dense().transpose().to_owned();
        assert!((&s.supremizers - &bt).norm_max() < 1e-14);
        assert_eq!(s.basis.ncols(), 3);
        assert!(s.sigma_min > 0.0);
    }

    #[test]
    fn zero_coupling_fails_enrichment() {
        let x = CsrMatrix::identity(4);
        let chol = CholeskyFactor::new(&x).unwrap();
        let b = CsrMatrix::from_dense(Mat::<f64>::zeros(1, 4).as_ref());
        let phi_u = Mat::from_fn(4, 1, |i, _| if i == 0 { 1.0 } else { 0.0 });
        let phi_p = Mat::<f64>::identity(1, 1);
        assert!(matches!(enrich(&phi_u, &phi_p, &x, &chol, &b, SupremizerKind::Whitened), Err(RomError::EnrichmentInsufficient { .. })));
    }

    #[test]
    fn pure_velocity_reduces_to_plain_solve() {
        let a = Mat::from_fn(1, 1, |_, _| 4.0);
        let b = Mat::<f64>::zeros(0, 1);
        let (u, p) = solve_reduced_stokes(&a, &b, &[2.0], &[]).unwrap();
        assert_eq!(u, vec![0.5]);
        assert!(p.is_empty());
    }
}
