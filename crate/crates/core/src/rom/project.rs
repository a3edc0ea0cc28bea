use faer::{Mat, MatRef};

use super::mdeim::HyperReduction;
use crate::error::{Result, RomError};
use crate::linalg::{condition_estimate, solve_dense, CsrMatrix, DMat, SparsityPattern};

/// Affine components of a projected operator: `Φ_testᵀ M_i Φ_trial` and
/// `Φ_testᵀ f_i`.
#[derive(Clone, Debug, Default)]
pub struct ReducedOperator {
    pub lhs: Vec<DMat>,
    pub rhs: Vec<Vec<f64>>,
}

/// Condition estimate above which a reduced matrix counts as singular.
pub const SINGULAR_CONDITION: f64 = 1e14;

/// Projects every collateral basis column (a matrix over `pattern`).
pub fn project_matrix_components(test: MatRef<'_, f64>, trial: MatRef<'_, f64>, hr: &HyperReduction, pattern: &std::sync::Arc<SparsityPattern>) -> Result<Vec<DMat>> {
    let mut out = Vec::with_capacity(hr.basis.ncols());
    for q in 0..hr.basis.ncols() {
        let values: Vec<f64> = (0..hr.basis.nrows()).map(|i| hr.basis[(i, q)]).collect();
        let m = CsrMatrix::from_values(pattern.clone(), values)?;
        let mt = m.mul_dense(trial);
        out.push(test.transpose() * &mt);
    }
    Ok(out)
}

pub fn project_vector_components(test: MatRef<'_, f64>, hr: &HyperReduction) -> Vec<Vec<f64>> {
    let p = test.transpose() * &hr.basis;
    (0..p.ncols()).map(|q| (0..p.nrows()).map(|i| p[(i, q)]).collect()).collect()
}

pub fn combine_matrices(components: &[DMat], theta: &[f64]) -> Result<DMat> {
    if components.len() != theta.len() {
        return Err(RomError::DimensionMismatch(format!("{} components, {} coefficients", components.len(), theta.len())));
    }
    let (r, c) = components.first().map_or((0, 0), |m| (m.nrows(), m.ncols()));
    let mut out = Mat::zeros(r, c);
    for (m, &t) in components.iter().zip(theta) {
        out += faer::Scale(t) * m;
    }
    Ok(out)
}

pub fn combine_vectors(components: &[Vec<f64>], theta: &[f64]) -> Result<Vec<f64>> {
    if components.len() != theta.len() {
        return Err(RomError::DimensionMismatch(format!("{} components, {} coefficients", components.len(), theta.len())));
    }
    let n = components.first().map_or(0, |v| v.len());
    let mut out = vec![0.0; n];
    for (v, &t) in components.iter().zip(theta) {
        crate::linalg::axpy(t, v, &mut out);
    }
    Ok(out)
}

/// Dense reduced solve with a singularity check; on failure the error
/// carries the condition estimate.
pub fn reduced_solve(a: MatRef<'_, f64>, b: &[f64]) -> std::result::Result<Vec<f64>, f64> {
    let cond = condition_estimate(a).unwrap_or(f64::INFINITY);
    if !(cond < SINGULAR_CONDITION) {
        return Err(cond);
    }
    solve_dense(a, b).map_err(|_| cond)
}

/// Assembles `Σ θ^A_i A_i` and `Σ θ^l_i l_i` and solves the reduced system.
pub fn solve_online(op: &ReducedOperator, theta_a: &[f64], theta_l: &[f64]) -> Result<Vec<f64>> {
    let a = combine_matrices(&op.lhs, theta_a)?;
    let b = combine_vectors(&op.rhs, theta_l)?;
    reduced_solve(a.as_ref(), &b).map_err(|cond| RomError::Singular(format!("reduced matrix condition estimate {cond:e}")))
}
