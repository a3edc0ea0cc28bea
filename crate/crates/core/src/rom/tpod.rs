use faer::{Mat, MatRef};

use super::svd::{check_tolerance, rsvd, SvdOptions};
use crate::error::{Result, RomError};
use crate::linalg::{CholeskyFactor, CsrMatrix, DMat};

/// Reduced basis `Φ` (one column per mode) with the singular values of the
/// whitened snapshot matrix.
#[derive(Clone, Debug)]
pub struct ReducedBasis {
    pub basis: DMat,
    pub singular_values: Vec<f64>,
}

impl ReducedBasis {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn n_rows(&self) -> usize {
        self.basis.nrows()
    }

    /// `Φ Φᵀ X u`: the X-orthogonal projection of `u`.
    pub fn project(&self, x: &CsrMatrix, u: &[f64]) -> Vec<f64> {
        let xu = x.mul_vec(u);
        let c: Vec<f64> = (0..self.dim()).map(|j| (0..self.n_rows()).map(|i| self.basis[(i, j)] * xu[i]).sum()).collect();
        self.expand(&c)
    }

    pub fn expand(&self, coeffs: &[f64]) -> Vec<f64> {
        (0..self.n_rows()).map(|i| (0..self.dim()).map(|j| self.basis[(i, j)] * coeffs[j]).sum()).collect()
    }
}

/// Truncated POD of the columns of `snapshots`, orthonormal in the norm
/// whose Cholesky factor is given (Euclidean when `None`).
pub fn tpod(snapshots: MatRef<'_, f64>, norm: Option<&CholeskyFactor>, eps: f64, opts: &SvdOptions) -> Result<ReducedBasis> {
    check_tolerance(eps)?;
    if snapshots.ncols() == 0 {
        return Err(RomError::DegenerateSampling("no snapshots".into()));
    }
    if let Some(h) = norm {
        if h.dim() != snapshots.nrows() {
            return Err(RomError::DimensionMismatch(format!("norm of size {} for snapshots with {} rows", h.dim(), snapshots.nrows())));
        }
    }
    let whitened = match norm {
        Some(h) => h.apply_h(snapshots),
        None => snapshots.to_owned(),
    };
    let svd = rsvd(whitened.as_ref(), eps, opts)?;
    if svd.rank() == 0 {
        log::warn!("snapshot matrix is zero; returning an empty basis");
        return Ok(ReducedBasis { basis: Mat::zeros(snapshots.nrows(), 0), singular_values: Vec::new() });
    }
    let basis = match norm {
        Some(h) => h.solve_h(svd.u.as_ref()),
        None => svd.u,
    };
    Ok(ReducedBasis { basis, singular_values: svd.s })
}
