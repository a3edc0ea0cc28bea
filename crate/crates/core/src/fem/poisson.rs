//! Poisson problem with Nitsche-imposed Dirichlet data on the (deformed)
//! physical domain, pulled back to the reference configuration.

use std::sync::Arc;

use super::assembly::{assemble_vector, map_cell, CellMotion, CellShapes, LocalMatrix, MappedCell, MatrixAssembler};
use super::space::FeSpace;
use crate::deformation::DeformationField;
use crate::error::Result;
use crate::geometry::{BoundaryTag, GeometryQuadrature};
use crate::linalg::CsrMatrix;
use crate::Point;

pub type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

pub fn constant(v: f64) -> ScalarFn {
    Arc::new(move |_| v)
}

/// Default Nitsche constant `10 p²`.
pub fn default_eta(order: usize) -> f64 {
    10.0 * (order * order) as f64
}

#[derive(Clone)]
pub struct PoissonData {
    pub forcing: ScalarFn,
    pub dirichlet_value: ScalarFn,
    pub neumann_value: ScalarFn,
    pub dirichlet_tags: Vec<BoundaryTag>,
}

impl PoissonData {
    pub fn is_dirichlet(&self, tag: BoundaryTag) -> bool {
        self.dirichlet_tags.contains(&tag)
    }
}

impl std::fmt::Debug for PoissonData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PoissonData").field("dirichlet_tags", &self.dirichlet_tags).finish_non_exhaustive()
    }
}

#[derive(Clone, Debug)]
pub struct AssembledSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

/// Local Nitsche-Poisson matrix and load vector of one mapped cell.
pub fn poisson_local(mc: &MappedCell, shapes: &CellShapes, data: &PoissonData, tau: f64) -> (LocalMatrix, Vec<f64>) {
    let n = shapes.bulk.first().or(shapes.surface.first()).map_or(0, |s| s.values.len());
    let mut k = LocalMatrix::zeros(n, n);
    let mut b = vec![0.0; n];
    for (q, s) in mc.bulk.iter().zip(&shapes.bulk) {
        let f = (data.forcing)(q.x);
        for i in 0..n {
            let gi = s.grads[i];
            for j in 0..n {
                let gj = s.grads[j];
                k.add(i, j, q.weight * (gi[0] * gj[0] + gi[1] * gj[1]));
            }
            b[i] += q.weight * f * s.values[i];
        }
    }
    for (q, s) in mc.surface.iter().zip(&shapes.surface) {
        if data.is_dirichlet(q.tag) {
            let g = (data.dirichlet_value)(q.x);
            let dn: Vec<f64> = s.grads.iter().map(|d| d[0] * q.normal[0] + d[1] * q.normal[1]).collect();
            for i in 0..n {
                for j in 0..n {
                    let v = tau * s.values[i] * s.values[j] - dn[j] * s.values[i] - dn[i] * s.values[j];
                    k.add(i, j, q.weight * v);
                }
                b[i] += q.weight * (tau * g * s.values[i] - dn[i] * g);
            }
        } else {
            let h = (data.neumann_value)(q.x);
            if h != 0.0 {
                for i in 0..n {
                    b[i] += q.weight * h * s.values[i];
                }
            }
        }
    }
    (k, b)
}

/// Maps cell `c` through the deformation (if any).
pub fn mapped_cell(space: &FeSpace, quad: &GeometryQuadrature, def: Option<&DeformationField>, c: usize) -> Result<MappedCell> {
    let cq = quad.cell(c)?;
    match def {
        None => map_cell(space.grid(), cq, None),
        Some(d) => {
            let nodal = d.cell_nodal(c);
            map_cell(space.grid(), cq, Some(CellMotion { basis: d.basis(), nodal: &nodal }))
        }
    }
}

/// Assembles the pulled-back Nitsche-Poisson system on the free dofs.
pub fn assemble_poisson(
    space: &FeSpace,
    asm: &MatrixAssembler,
    quad: &GeometryQuadrature,
    def: Option<&DeformationField>,
    data: &PoissonData,
    eta: f64,
) -> Result<AssembledSystem> {
    let tau = eta / space.grid().h();
    let mut loads: Vec<Vec<f64>> = Vec::with_capacity(space.cells().len());
    let matrix = asm.assemble(space, space, |pos| {
        let mc = mapped_cell(space, quad, def, space.cells()[pos])?;
        let shapes = CellShapes::new(space.basis(), &mc);
        let (k, b) = poisson_local(&mc, &shapes, data, tau);
        loads.push(b);
        Ok(k)
    })?;
    let rhs = assemble_vector(space, |pos| Ok(std::mem::take(&mut loads[pos])))?;
    Ok(AssembledSystem { matrix, rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::space::SpaceFlavor;
    use crate::geometry::{aggregate, classify_cells, BackgroundGrid, LevelSet, Side};
    use crate::linalg::solve_sparse;

    #[test]
    fn quadratic_solution_is_exact_on_uncut_grid() {
        let g = BackgroundGrid::new([0.0, 0.0], [1.0, 1.0], [4, 4]).unwrap();
        let ls = LevelSet::full_box();
        let cls = classify_cells(&g, &ls).unwrap();
        let agg = aggregate(&cls, &g, 2).unwrap();
        let space = FeSpace::new(&g, &cls, Some(&agg), 2, 1, SpaceFlavor::Aggregated).unwrap();
        let quad = GeometryQuadrature::build(&g, &cls, &ls, 4).unwrap();
        let asm = MatrixAssembler::new(&space, &space).unwrap();
        let data = PoissonData {
            forcing: constant(-4.0),
            dirichlet_value: Arc::new(|x| x[0] * x[0] + x[1] * x[1]),
            neumann_value: constant(0.0),
            dirichlet_tags: Side::all().iter().map(|s| BoundaryTag::Face(*s)).collect(),
        };
        let sys = assemble_poisson(&space, &asm, &quad, None, &data, default_eta(2)).unwrap();
        assert!(sys.matrix.is_symmetric(1e-12));
        let u = solve_sparse(&sys.matrix, &sys.rhs).unwrap();
        let exact = space.interpolate(|x| vec![x[0] * x[0] + x[1] * x[1]]);
        let err = u.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }
}
