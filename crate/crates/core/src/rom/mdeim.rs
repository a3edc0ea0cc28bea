use faer::{Mat, MatRef};

use super::svd::{rsvd, SvdOptions};
use crate::error::{Result, RomError};
use crate::linalg::{column, solve_dense, DMat};

/// Collateral basis of an affine approximation with its interpolation
/// indices; `cells` is the reduced integration domain once attached.
#[derive(Clone, Debug)]
pub struct HyperReduction {
    pub basis: DMat,
    pub indices: Vec<usize>,
    pub cells: Vec<usize>,
}

impl HyperReduction {
    pub fn n_terms(&self) -> usize {
        self.indices.len()
    }

    /// `Pᵀ Φ`.
    pub fn interpolation_matrix(&self) -> DMat {
        Mat::from_fn(self.indices.len(), self.basis.ncols(), |i, j| self.basis[(self.indices[i], j)])
    }

    /// Values of the full vector at the sampled indices.
    pub fn sample(&self, full: &[f64]) -> Vec<f64> {
        self.indices.iter().map(|&i| full[i]).collect()
    }

    pub fn reconstruct(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.basis.nrows()).map(|i| (0..theta.len()).map(|q| self.basis[(i, q)] * theta[q]).sum()).collect()
    }
}

/// Greedy interpolation indices of the columns of `basis`; ties go to the
/// lowest index.
pub fn greedy_indices(basis: MatRef<'_, f64>) -> Result<Vec<usize>> {
    let mut idx: Vec<usize> = Vec::with_capacity(basis.ncols());
    for q in 0..basis.ncols() {
        let phi = column(basis, q);
        let residual = if q == 0 {
            phi
        } else {
            let p = Mat::from_fn(q, q, |i, j| basis[(idx[i], j)]);
            let rhs: Vec<f64> = idx.iter().map(|&i| phi[i]).collect();
            let c = solve_dense(p.as_ref(), &rhs)?;
            (0..phi.len()).map(|i| phi[i] - (0..q).map(|j| basis[(i, j)] * c[j]).sum::<f64>()).collect()
        };
        let mut best = 0;
        let mut best_val = -1.0;
        for (i, r) in residual.iter().enumerate() {
            if r.abs() > best_val {
                best_val = r.abs();
                best = i;
            }
        }
        if !(best_val > 0.0) || idx.contains(&best) {
            return Err(RomError::DegenerateSampling(format!("interpolation residual vanishes at step {q}")));
        }
        idx.push(best);
    }
    Ok(idx)
}

/// MDEIM on a snapshot matrix of vectorized operators (one column per
/// parameter) at tolerance `eps`.
pub fn mdeim(snapshots: MatRef<'_, f64>, eps: f64, opts: &SvdOptions) -> Result<HyperReduction> {
    if snapshots.ncols() == 0 {
        return Err(RomError::DegenerateSampling("no snapshots".into()));
    }
    let svd = rsvd(snapshots, eps, opts)?;
    let basis = if svd.rank() == 0 { Mat::zeros(snapshots.nrows(), 0) } else { svd.u };
    let indices = greedy_indices(basis.as_ref())?;
    Ok(HyperReduction { basis, indices, cells: Vec::new() })
}

/// Affine coefficients `θ = (PᵀΦ)⁻¹ sampled`.
pub fn online_coefficients(hr: &HyperReduction, sampled: &[f64]) -> Result<Vec<f64>> {
    if sampled.len() != hr.indices.len() {
        return Err(RomError::DimensionMismatch(format!("{} samples for {} interpolation indices", sampled.len(), hr.indices.len())));
    }
    solve_dense(hr.interpolation_matrix().as_ref(), sampled)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_family_is_recovered_exactly() {
        let n = 30;
        let f0: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let f1: Vec<f64> = (0..n).map(|i| (i as f64 * 0.17).cos()).collect();
        let s = Mat::from_fn(n, 8, |i, j| f0[i] + (j as f64 * 0.4) * f1[i]);
        let hr = mdeim(s.as_ref(), 1e-10, &SvdOptions::deterministic()).unwrap();
        assert_eq!(hr.n_terms(), 2);
        let target: Vec<f64> = (0..n).map(|i| f0[i] - 2.5 * f1[i]).collect();
        let theta = online_coefficients(&hr, &hr.sample(&target)).unwrap();
        let rec = hr.reconstruct(&theta);
        for i in 0..n {
            assert!((rec[i] - target[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn ties_choose_lowest_index() {
        let b = Mat::from_fn(4, 1, |_, _| 1.0);
        assert_eq!(greedy_indices(b.as_ref()).unwrap(), vec![0]);
    }
}
