//! Tensor-train bases from split-axis snapshot tensors.

use faer::{Mat, Side};

use super::svd::{check_tolerance, rsvd, SvdOptions};
use crate::error::{Result, RomError};
use crate::linalg::{CholeskyFactor, CsrMatrix, DMat};

/// Third-order core; entry `(a, i, b)` is stored at `a + r_prev (i + n b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TtCore {
    pub r_prev: usize,
    pub n: usize,
    pub r_next: usize,
    pub data: Vec<f64>,
}

impl TtCore {
    pub fn get(&self, a: usize, i: usize, b: usize) -> f64 {
        self.data[a + self.r_prev * (i + self.n * b)]
    }

    /// Core unfolded as an `(r_prev n) x r_next` matrix.
    pub fn unfolding(&self) -> DMat {
        let rows = self.r_prev * self.n;
        Mat::from_fn(rows, self.r_next, |i, j| self.data[i + rows * j])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TtBasis {
    pub cores: Vec<TtCore>,
}

impl TtBasis {
    pub fn ranks(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.r_next).collect()
    }

    pub fn dim(&self) -> usize {
        self.cores.last().map_or(0, |c| c.r_next)
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.n).collect()
    }

    /// Contracts all cores into the `(Π n_k) x r_d` basis matrix; the
    /// first spatial index runs fastest.
    pub fn contract(&self) -> DMat {
        let mut phi = Mat::from_fn(1, 1, |_, _| 1.0);
        for core in &self.cores {
            let rows = phi.nrows();
            let mut next = Mat::zeros(rows * core.n, core.r_next);
            for i in 0..core.n {
                let g = Mat::from_fn(core.r_prev, core.r_next, |a, b| core.get(a, i, b));
                let block = &phi * &g;
                for r in 0..rows {
                    for b in 0..core.r_next {
                        next[(r + rows * i, b)] = block[(r, b)];
                    }
                }
            }
            phi = next;
        }
        phi
    }
}

/// TT-SVD of a tensor with dimensions `dims = [n_1, ..., n_d, n_params]`
/// stored column-major; returns the `d` spatial cores. Each unfolding is
/// truncated at tolerance `eps / sqrt(d)`.
pub fn ttsvd(tensor: &[f64], dims: &[usize], eps: f64, opts: &SvdOptions) -> Result<TtBasis> {
    check_tolerance(eps)?;
    if dims.len() < 2 {
        return Err(RomError::InvalidArgument("tensor needs at least one spatial axis and a parameter axis".into()));
    }
    if dims.iter().product::<usize>() != tensor.len() {
        return Err(RomError::DimensionMismatch(format!("tensor of {} entries with dims {dims:?}", tensor.len())));
    }
    let d = dims.len() - 1;
    let step_eps = eps / (d as f64).sqrt();
    let mut cores = Vec::with_capacity(d);
    let mut rest: Vec<f64> = tensor.to_vec();
    let mut r_prev = 1;
    for (k, &n) in dims.iter().take(d).enumerate() {
        let rows = r_prev * n;
        let cols = rest.len() / rows;
        let c = Mat::from_fn(rows, cols, |i, j| rest[i + rows * j]);
        let svd = rsvd(c.as_ref(), step_eps, &SvdOptions { seed: opts.seed.wrapping_add(k as u64), ..*opts })?;
        let r = svd.rank().max(1).min(rows.min(cols));
        let (u, s, v) = if svd.rank() == 0 {
            (Mat::from_fn(rows, 1, |i, _| if i == 0 { 1.0 } else { 0.0 }), vec![0.0], Mat::zeros(cols, 1))
        } else {
            (svd.u, svd.s, svd.v)
        };
        let mut data = vec![0.0; rows * r];
        for b in 0..r {
            for i in 0..rows {
                data[i + rows * b] = u[(i, b)];
            }
        }
        cores.push(TtCore { r_prev, n, r_next: r, data });
        rest = vec![0.0; r * cols];
        for j in 0..cols {
            for b in 0..r {
                rest[b + r * j] = s[b] * v[(j, b)];
            }
        }
        r_prev = r;
    }
    Ok(TtBasis { cores })
}

/// Tensor-train basis orthonormal in the norm `x` with
/// `Σ_k ‖u_k − Φ Φᵀ X u_k‖²_X ≤ d ε² Σ_k ‖u_k‖²_X`.
///
/// The leading `d − 1` cores come from TT-SVD sweeps whose tolerance is
/// halved until the X-orthogonal projection onto their span `S` loses at
/// most `(d − 1) ε²` of the snapshot energy. The last core is a POD in the
/// X inner product restricted to `S`.
pub fn ttsvd_weighted(tensor: &[f64], dims: &[usize], x: &CsrMatrix, eps: f64, opts: &SvdOptions) -> Result<TtBasis> {
    check_tolerance(eps)?;
    if dims.len() < 2 {
        return Err(RomError::InvalidArgument("tensor needs at least one spatial axis and a parameter axis".into()));
    }
    if dims.iter().product::<usize>() != tensor.len() {
        return Err(RomError::DimensionMismatch(format!("tensor of {} entries with dims {dims:?}", tensor.len())));
    }
    let d = dims.len() - 1;
    let n_params = dims[d];
    let n_last = dims[d - 1];
    let lead_size: usize = dims[..d - 1].iter().product();
    let rows = lead_size * n_last;
    if x.nrows() != rows {
        return Err(RomError::DimensionMismatch(format!("norm of size {} for {rows} spatial entries", x.nrows())));
    }
    let u = Mat::from_fn(rows, n_params, |i, j| tensor[i + rows * j]);
    let xu = x.mul_dense(u.as_ref());
    let total: f64 = (0..n_params).map(|j| (0..rows).map(|i| u[(i, j)] * xu[(i, j)]).sum::<f64>()).sum();
    if !(total > 0.0) {
        return Err(RomError::DegenerateSampling("snapshot tensor has zero norm".into()));
    }
    let budget = (d - 1) as f64 * eps * eps * total;

    let mut lead_dims: Vec<usize> = dims[..d - 1].to_vec();
    lead_dims.push(n_last * n_params);
    let mut tol = eps / (d as f64).sqrt();
    let (lead, l, gram, coeffs) = loop {
        let lead = if d == 1 { TtBasis { cores: Vec::new() } } else { ttsvd(tensor, &lead_dims, tol, opts)? };
        let l = if d == 1 { Mat::from_fn(1, 1, |_, _| 1.0) } else { lead.contract() };
        let r = l.ncols();
        let b = Mat::from_fn(rows, r * n_last, |i, c| {
            let (a, j) = (c % r, c / r);
            if i / lead_size == j {
                l[(i % lead_size, a)]
            } else {
                0.0
            }
        });
        let xb = x.mul_dense(b.as_ref());
        let gram: DMat = b.transpose() * &xb;
        let h = CholeskyFactor::from_dense(gram.as_ref())?;
        let coeffs = h.solve((xb.transpose() * &u).as_ref());
        let res = &u - &b * &coeffs;
        let xres = x.mul_dense(res.as_ref());
        let err: f64 = (0..n_params).map(|j| (0..rows).map(|i| res[(i, j)] * xres[(i, j)]).sum::<f64>()).sum();
        if err <= budget || r >= lead_size || tol < 1e-14 {
            break (lead, l, h, coeffs);
        }
        tol *= 0.5;
    };

    let r = l.ncols();
    let svd = rsvd(gram.apply_h(coeffs.as_ref()).as_ref(), eps, &SvdOptions { seed: opts.seed.wrapping_add(d as u64), ..*opts })?;
    if svd.rank() == 0 {
        return Err(RomError::DegenerateSampling("projected snapshots vanish".into()));
    }
    let last = gram.solve_h(svd.u.as_ref());
    let mut cores = lead.cores;
    cores.push(TtCore {
        r_prev: r,
        n: n_last,
        r_next: last.ncols(),
        data: (0..last.nrows() * last.ncols()).map(|k| last[(k % last.nrows(), k / last.nrows())]).collect(),
    });
    Ok(TtBasis { cores })
}

/// Re-orthonormalizes the contracted basis in the norm `x` by Cholesky-QR
/// of its Gram matrix, applying the triangular factor to the last core.
/// Directions with singular value below `1e-12 σ_1` are dropped.
pub fn tt_orthogonalize(basis: &TtBasis, x: &CsrMatrix) -> Result<TtBasis> {
    let mut out = basis.clone();
    for _ in 0..2 {
        let phi = out.contract();
        if phi.nrows() != x.nrows() {
            return Err(RomError::DimensionMismatch(format!("basis with {} rows, norm of size {}", phi.nrows(), x.nrows())));
        }
        let gram = phi.transpose() * x.mul_dense(phi.as_ref());
        let t = whitening_transform(&gram)?;
        let last = out.cores.last_mut().expect("at least one core");
        let unf = last.unfolding();
        let updated = &unf * &t;
        last.r_next = updated.ncols();
        let rows = updated.nrows();
        last.data = (0..rows * updated.ncols()).map(|k| updated[(k % rows, k / rows)]).collect();
    }
    Ok(out)
}

/// `T` with `Tᵀ G T = I`: inverse transposed Cholesky factor when `G` is
/// well conditioned, truncated eigen-decomposition otherwise.
fn whitening_transform(gram: &DMat) -> Result<DMat> {
    let r = gram.nrows();
    if r == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let max_diag = (0..r).map(|i| gram[(i, i)]).fold(0.0, f64::max);
    if let Ok(llt) = gram.llt(Side::Lower) {
        let l = llt.L();
        let min_piv = (0..r).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
        if min_piv > 1e-24 * max_diag {
            let mut t = Mat::<f64>::identity(r, r);
            faer::linalg::triangular_solve::solve_upper_triangular_in_place(l.transpose(), t.as_mut(), faer::Par::Seq);
            return Ok(t);
        }
    }
    let eig = gram.self_adjoint_eigen(Side::Lower).map_err(|e| RomError::Singular(format!("eigen decomposition failed: {e:?}")))?;
    let vals: Vec<f64> = eig.S().column_vector().iter().copied().collect();
    let lmax = vals.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..r).rev().filter(|&i| vals[i] > 1e-24 * lmax).collect();
    log::warn!("rank-deficient tensor-train basis: keeping {} of {} directions", keep.len(), r);
    let u = eig.U();
    Ok(Mat::from_fn(r, keep.len(), |i, j| u[(i, keep[j])] / vals[keep[j]].sqrt()))
}
