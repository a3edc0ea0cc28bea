//! Offline bound replays, cluster spread and online error metrics.

use std::time::Instant;

use rayon::prelude::*;

use super::alloc;
use super::benchmark::Benchmark;
use super::config::Method;
use crate::error::Result;
use crate::linalg::{CsrMatrix, DMat};
use crate::localization::{online, ClusterModel, FomSample};

/// Slack applied to the tensor-train accuracy bound.
pub const TT_SLACK: f64 = 1.5;

/// `Σ ‖u_k − Φ Φᵀ X u_k‖²_X` and `Σ ‖u_k‖²_X`.
pub fn projection_error(basis: &DMat, x: &CsrMatrix, cols: &[Vec<f64>]) -> (f64, f64) {
    let mut err = 0.0;
    let mut norm = 0.0;
    for u in cols {
        let xu = x.mul_vec(u);
        let c: Vec<f64> = (0..basis.ncols()).map(|j| (0..basis.nrows()).map(|i| basis[(i, j)] * xu[i]).sum()).collect();
        let r: Vec<f64> = (0..u.len()).map(|i| u[i] - (0..c.len()).map(|j| basis[(i, j)] * c[j]).sum::<f64>()).collect();
        err += x.quadratic_form(&r, &r);
        norm += x.quadratic_form(u, u);
    }
    (err, norm)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundCheck {
    pub eps: f64,
    pub cluster: usize,
    pub field: usize,
    pub members: usize,
    pub error_sq: f64,
    pub norm_sq: f64,
    /// Allowed `error_sq / (eps² norm_sq)`.
    pub factor: f64,
}

impl BoundCheck {
    pub fn ratio(&self) -> f64 {
        if self.norm_sq == 0.0 {
            0.0
        } else {
            self.error_sq / (self.eps * self.eps * self.norm_sq)
        }
    }

    pub fn holds(&self) -> bool {
        self.error_sq <= self.factor * self.eps * self.eps * self.norm_sq
    }
}

/// Replays the offline accuracy estimate of every cluster and field on its
/// training snapshots: in the reference norm for TPOD, in the background
/// norm with factor `d · TT_SLACK` for tensor-train bases.
pub fn offline_bounds(bench: &Benchmark, model: &ClusterModel, samples: &[FomSample]) -> Result<Vec<BoundCheck>> {
    let eps = model.eps;
    let svd = bench.config.svd_options();
    (0..model.n_clusters())
        .into_par_iter()
        .map(|j| {
            let idx = model.subspace_clustering.members(j);
            let members: Vec<&FomSample> = idx.iter().map(|&i| &samples[i]).collect();
            let mut out = Vec::new();
            if bench.config.method == Method::Ttrb {
                let tt = bench.tt_basis(&members, eps, &svd)?;
                let ext = bench.extended(&members)?;
                let xhat = bench.background_norm().expect("background norm");
                let (e, n) = projection_error(&tt.contract(), xhat, &ext);
                let d = tt.cores.len() as f64;
                out.push(BoundCheck { eps, cluster: j, field: 0, members: idx.len(), error_sq: e, norm_sq: n, factor: d * TT_SLACK });
            } else {
                for f in 0..bench.layout.n_fields {
                    let cols: Vec<Vec<f64>> = members.iter().map(|s| s.fields[f].clone()).collect();
                    let (e, n) = projection_error(&model.bases[j][f].basis, &bench.norms[f], &cols);
                    out.push(BoundCheck { eps, cluster: j, field: f, members: idx.len(), error_sq: e, norm_sq: n, factor: 1.0 });
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().flatten().collect())
}

/// Largest relative distance of a cluster member from the cluster mean,
/// per cluster and field, in the reference norms.
pub fn cluster_spread(bench: &Benchmark, model: &ClusterModel, samples: &[FomSample]) -> Vec<Vec<f64>> {
    (0..model.n_clusters())
        .map(|j| {
            let idx = model.subspace_clustering.members(j);
            (0..bench.layout.n_fields)
                .map(|f| {
                    let n = samples[idx[0]].fields[f].len();
                    let mut mean = vec![0.0; n];
                    for &i in &idx {
                        crate::linalg::axpy(1.0 / idx.len() as f64, &samples[i].fields[f], &mut mean);
                    }
                    let x = &bench.norms[f];
                    let mn = x.quadratic_form(&mean, &mean).sqrt();
                    idx.iter()
                        .map(|&i| {
                            let d: Vec<f64> = samples[i].fields[f].iter().zip(&mean).map(|(a, b)| a - b).collect();
                            let dn = x.quadratic_form(&d, &d).sqrt();
                            if mn > 0.0 {
                                dn / mn
                            } else {
                                dn
                            }
                        })
                        .fold(0.0, f64::max)
                })
                .collect()
        })
        .collect()
}

/// Relative error `‖a − b‖_X / ‖b‖_X`.
pub fn relative_error(x: &CsrMatrix, approx: &[f64], exact: &[f64]) -> f64 {
    let d: Vec<f64> = approx.iter().zip(exact).map(|(a, b)| a - b).collect();
    let den = x.quadratic_form(exact, exact).sqrt();
    let num = x.quadratic_form(&d, &d).sqrt();
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OnlineRecord {
    pub mu: Vec<f64>,
    pub subspace_cluster: usize,
    pub hyper_cluster: usize,
    pub rom_dim: usize,
    /// Relative error per field in `X(μ)` / `Y(μ)`.
    pub errors: Vec<f64>,
    pub fom_seconds: f64,
    pub rom_seconds: f64,
    pub fom_peak_bytes: usize,
    pub rom_peak_bytes: usize,
}

/// Full-order reference and localized reduced solve at every `mu`.
pub fn evaluate_online(bench: &Benchmark, model: &ClusterModel, mus: &[Vec<f64>]) -> Result<Vec<OnlineRecord>> {
    let mut out = Vec::with_capacity(mus.len());
    for mu in mus {
        let base = alloc::reset_peak();
        let t = Instant::now();
        let fom = bench.solve_fom(mu)?;
        let fom_seconds = t.elapsed().as_secs_f64();
        let fom_peak_bytes = alloc::peak_since(base);

        let base = alloc::reset_peak();
        let t = Instant::now();
        let sol = online(model, bench, mu).map_err(|e| crate::RomError::at(mu, e))?;
        let rom_seconds = t.elapsed().as_secs_f64();
        let rom_peak_bytes = alloc::peak_since(base);

        let rec = sol.reconstruct(model);
        let norms = bench.parameter_norms(mu)?;
        let errors = (0..rec.len()).map(|f| relative_error(&norms[f], &rec[f], &fom.fields[f])).collect();
        out.push(OnlineRecord {
            mu: mu.clone(),
            subspace_cluster: sol.subspace_cluster,
            hyper_cluster: sol.hyper_cluster,
            rom_dim: model.local_dim(sol.subspace_cluster),
            errors,
            fom_seconds,
            rom_seconds,
            fom_peak_bytes,
            rom_peak_bytes,
        });
    }
    Ok(out)
}

/// Mean relative error per field.
pub fn mean_errors(records: &[OnlineRecord]) -> Vec<f64> {
    let nf = records.first().map_or(0, |r| r.errors.len());
    (0..nf).map(|f| records.iter().map(|r| r.errors[f]).sum::<f64>() / records.len() as f64).collect()
}

/// Ratio of the mean full-order dimension to the largest local dimension.
pub fn reduction_factor(bench: &Benchmark, model: &ClusterModel) -> f64 {
    bench.fom_dim() as f64 / model.max_local_dim().max(1) as f64
}

/// Fraction of active cells in the reduced integration domain of each
/// hyper-reduction cluster.
pub fn cell_fractions(bench: &Benchmark, model: &ClusterModel) -> Vec<f64> {
    let n = bench.cells().len() as f64;
    model.hyper.iter().map(|h| h.cells().len() as f64 / n).collect()
}

/// Largest relative MDEIM reconstruction error of lhs and rhs blocks over
/// the training parameters, and the largest mismatch at sampled indices.
pub fn mdeim_training_errors(model: &ClusterModel, samples: &[FomSample]) -> Result<(f64, f64, f64)> {
    let mut lhs_err: f64 = 0.0;
    let mut rhs_err: f64 = 0.0;
    let mut interp: f64 = 0.0;
    for (i, s) in samples.iter().enumerate() {
        let hs = &model.hyper[model.hyper_clustering.assignments[i]];
        for (hrs, full, acc) in [(&hs.lhs, &s.lhs, &mut lhs_err), (&hs.rhs, &s.rhs, &mut rhs_err)] {
            for (hr, v) in hrs.iter().zip(full) {
                let theta = crate::rom::online_coefficients(hr, &hr.sample(v))?;
                let rec = hr.reconstruct(&theta);
                let nv = crate::linalg::norm2(v);
                let d: Vec<f64> = rec.iter().zip(v).map(|(a, b)| a - b).collect();
                *acc = acc.max(if nv > 0.0 { crate::linalg::norm2(&d) / nv } else { crate::linalg::norm2(&d) });
                let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
                for &k in &hr.indices {
                    interp = interp.max((rec[k] - v[k]).abs() / scale);
                }
            }
        }
    }
    Ok((lhs_err, rhs_err, interp))
}
