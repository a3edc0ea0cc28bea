//! Norm (Gram) matrices: reference and pulled-back H¹ + Nitsche boundary
//! norms, L² mass, and the background norm used by the tensor-train basis.

use super::assembly::{CellShapes, LocalMatrix, MatrixAssembler};
use super::poisson::mapped_cell;
use super::space::FeSpace;
use crate::deformation::DeformationField;
use crate::error::Result;
use crate::geometry::{BoundaryTag, GeometryQuadrature};
use crate::linalg::CsrMatrix;
use crate::quadrature::square_rule;

fn block_add(k: &mut LocalMatrix, comps: usize, i: usize, j: usize, v: f64) {
    for c in 0..comps {
        k.add(i * comps + c, j * comps + c, v);
    }
}

/// `∫ ∇u:∇v + τ ∫_{Γ_D} u·v` on the configuration given by `def`
/// (reference configuration when `None`).
pub fn assemble_h1_norm(
    space: &FeSpace,
    asm: &MatrixAssembler,
    quad: &GeometryQuadrature,
    def: Option<&DeformationField>,
    tau: f64,
    dirichlet: &[BoundaryTag],
) -> Result<CsrMatrix> {
    let nc = space.components();
    asm.assemble(space, space, |pos| {
        let mc = mapped_cell(space, quad, def, space.cells()[pos])?;
        let sh = CellShapes::new(space.basis(), &mc);
        let n = space.basis().n_nodes();
        let mut k = LocalMatrix::zeros(n * nc, n * nc);
        for (q, s) in mc.bulk.iter().zip(&sh.bulk) {
            for i in 0..n {
                for j in 0..n {
                    let v = s.grads[i][0] * s.grads[j][0] + s.grads[i][1] * s.grads[j][1];
                    block_add(&mut k, nc, i, j, q.weight * v);
                }
            }
        }
        for (q, s) in mc.surface.iter().zip(&sh.surface) {
            if dirichlet.contains(&q.tag) {
                for i in 0..n {
                    for j in 0..n {
                        block_add(&mut k, nc, i, j, q.weight * tau * s.values[i] * s.values[j]);
                    }
                }
            }
        }
        Ok(k)
    })
}

/// `∫ u·v` on the configuration given by `def`.
pub fn assemble_mass(space: &FeSpace, asm: &MatrixAssembler, quad: &GeometryQuadrature, def: Option<&DeformationField>) -> Result<CsrMatrix> {
    let nc = space.components();
    asm.assemble(space, space, |pos| {
        let mc = mapped_cell(space, quad, def, space.cells()[pos])?;
        let sh = CellShapes::new(space.basis(), &mc);
        let n = space.basis().n_nodes();
        let mut k = LocalMatrix::zeros(n * nc, n * nc);
        for (q, s) in mc.bulk.iter().zip(&sh.bulk) {
            for i in 0..n {
                for j in 0..n {
                    block_add(&mut k, nc, i, j, q.weight * s.values[i] * s.values[j]);
                }
            }
        }
        Ok(k)
    })
}

/// Background norm: H¹ seminorm over all background cells plus `h^d` times
/// the identity.
pub fn assemble_background_norm(space: &FeSpace, asm: &MatrixAssembler) -> Result<CsrMatrix> {
    let grid = space.grid();
    let s = grid.spacing();
    let rule = square_rule(space.order() + 1);
    let basis = space.basis();
    let n = basis.n_nodes();
    let nc = space.components();
    let mut k = LocalMatrix::zeros(n * nc, n * nc);
    for (xi, w) in rule.points.iter().zip(&rule.weights) {
        let g: Vec<[f64; 2]> = basis.gradients(*xi).into_iter().map(|d| [d[0] / s[0], d[1] / s[1]]).collect();
        for i in 0..n {
            for j in 0..n {
                block_add(&mut k, nc, i, j, w * s[0] * s[1] * (g[i][0] * g[j][0] + g[i][1] * g[j][1]));
            }
        }
    }
    let mut m = asm.assemble(space, space, |_| Ok(k.clone()))?;
    let shift = grid.h().powi(2);
    let p = m.pattern().clone();
    for i in 0..m.nrows() {
        let k = p.position(i, i).expect("diagonal present");
        m.values_mut()[k] += shift;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::space::SpaceFlavor;
    use crate::geometry::{aggregate, classify_cells, BackgroundGrid, LevelSet};

    #[test]
    fn mass_integrates_area_and_h1_is_spd() {
        let g = BackgroundGrid::new([-1.0, -1.0], [1.0, 1.0], [10, 10]).unwrap();
        let ls = LevelSet::BallHole { center: [0.1, 0.1], radius: 0.3 };
        let cls = classify_cells(&g, &ls).unwrap();
        let agg = aggregate(&cls, &g, 2).unwrap();
        let space = FeSpace::new(&g, &cls, Some(&agg), 2, 1, SpaceFlavor::Aggregated).unwrap();
        let quad = GeometryQuadrature::build(&g, &cls, &ls, 4).unwrap();
        let asm = MatrixAssembler::new(&space, &space).unwrap();
        let m = assemble_mass(&space, &asm, &quad, None).unwrap();
        let one = vec![1.0; space.n_dofs()];
        assert!((m.quadratic_form(&one, &one) - quad.total_area()).abs() < 1e-12);
        let x = assemble_h1_norm(&space, &asm, &quad, None, 400.0, &[BoundaryTag::Interface]).unwrap();
        assert!(x.is_symmetric(1e-13));
        let per = quad.boundary_length(BoundaryTag::Interface);
        assert!((x.quadratic_form(&one, &one) - 400.0 * per).abs() < 1e-9);
        crate::linalg::CholeskyFactor::new(&x).unwrap();
    }
}
