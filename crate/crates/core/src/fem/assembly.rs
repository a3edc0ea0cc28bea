//! Cell mapping, shape-function evaluation, static condensation of local
//! matrices onto free dofs and global scatter over a fixed pattern.

use std::collections::BTreeSet;
use std::sync::Arc;

use super::basis::LagrangeBasis;
use super::space::{CellDofs, FeSpace};
use crate::deformation::{jacobian_at, pullback};
use crate::error::{Result, RomError};
use crate::geometry::{BackgroundGrid, BoundaryTag, CellQuadrature};
use crate::linalg::{CsrMatrix, SparsityPattern};
use crate::Point;

#[derive(Clone, Debug)]
pub struct MappedPoint {
    pub xi: Point,
    /// Physical (deformed) position.
    pub x: Point,
    /// Quadrature weight times `det J`.
    pub weight: f64,
    pub jinv_t: [[f64; 2]; 2],
}

#[derive(Clone, Debug)]
pub struct MappedSurfacePoint {
    pub xi: Point,
    pub x: Point,
    /// Surface measure of the deformed boundary.
    pub weight: f64,
    /// Unit normal of the deformed boundary.
    pub normal: Point,
    pub tag: BoundaryTag,
    pub jinv_t: [[f64; 2]; 2],
}

#[derive(Clone, Debug)]
pub struct MappedCell {
    pub cell: usize,
    pub spacing: [f64; 2],
    pub bulk: Vec<MappedPoint>,
    pub surface: Vec<MappedSurfacePoint>,
}

/// Nodal displacement of one cell together with its Lagrange basis.
#[derive(Clone, Copy, Debug)]
pub struct CellMotion<'a> {
    pub basis: &'a LagrangeBasis,
    pub nodal: &'a [Point],
}

/// Pulls the reference quadrature of a cell back through `x̃ + ψ(x̃)`.
pub fn map_cell(grid: &BackgroundGrid, quad: &CellQuadrature, motion: Option<CellMotion<'_>>) -> Result<MappedCell> {
    let spacing = grid.spacing();
    let c = quad.cell;
    let eval = |xi: Point| -> ([[f64; 2]; 2], Point) {
        let x0 = grid.to_global(c, xi);
        match motion {
            None => ([[1.0, 0.0], [0.0, 1.0]], x0),
            Some(m) => {
                let j = jacobian_at(m.basis, m.nodal, xi, spacing);
                let v = m.basis.values(xi);
                let mut d = [0.0; 2];
                for (k, n) in m.nodal.iter().enumerate() {
                    d[0] += v[k] * n[0];
                    d[1] += v[k] * n[1];
                }
                (j, [x0[0] + d[0], x0[1] + d[1]])
            }
        }
    };
    let mut bulk = Vec::with_capacity(quad.bulk_local.len());
    for (xi, w) in quad.bulk_local.iter().zip(&quad.bulk_weights) {
        let (j, x) = eval(*xi);
        let pb = pullback(j, [1.0, 0.0]);
        if !(pb.det > 0.0) {
            return Err(RomError::NotBijective { cell: c, det: pb.det });
        }
        bulk.push(MappedPoint { xi: *xi, x, weight: w * pb.det, jinv_t: pb.jinv_t });
    }
    let mut surface = Vec::with_capacity(quad.surface.len());
    for s in &quad.surface {
        let (j, x) = eval(s.local);
        let pb = pullback(j, s.normal);
        if !(pb.det > 0.0) {
            return Err(RomError::NotBijective { cell: c, det: pb.det });
        }
        surface.push(MappedSurfacePoint { xi: s.local, x, weight: s.weight * pb.surface_scale, normal: pb.normal, tag: s.tag, jinv_t: pb.jinv_t });
    }
    Ok(MappedCell { cell: c, spacing, bulk, surface })
}

/// Shape values and physical gradients at one point.
#[derive(Clone, Debug)]
pub struct ShapeEval {
    pub values: Vec<f64>,
    pub grads: Vec<Point>,
}

pub fn shape_at(basis: &LagrangeBasis, xi: Point, jinv_t: &[[f64; 2]; 2], spacing: [f64; 2]) -> ShapeEval {
    let values = basis.values(xi);
    let grads = basis
        .gradients(xi)
        .into_iter()
        .map(|g| {
            let r = [g[0] / spacing[0], g[1] / spacing[1]];
            [jinv_t[0][0] * r[0] + jinv_t[0][1] * r[1], jinv_t[1][0] * r[0] + jinv_t[1][1] * r[1]]
        })
        .collect();
    ShapeEval { values, grads }
}

/// Shape evaluations at every bulk and surface point of a mapped cell.
#[derive(Clone, Debug)]
pub struct CellShapes {
    pub bulk: Vec<ShapeEval>,
    pub surface: Vec<ShapeEval>,
}

impl CellShapes {
    pub fn new(basis: &LagrangeBasis, mc: &MappedCell) -> Self {
        CellShapes {
            bulk: mc.bulk.iter().map(|q| shape_at(basis, q.xi, &q.jinv_t, mc.spacing)).collect(),
            surface: mc.surface.iter().map(|q| shape_at(basis, q.xi, &q.jinv_t, mc.spacing)).collect(),
        }
    }
}

/// Dense row-major local matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl LocalMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        LocalMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] += v;
    }

    #[inline]
    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|v| *v *= a);
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

/// `E_testᵀ K E_trial` for local dofs `node * comps + comp`.
pub fn condense_matrix(local: &LocalMatrix, test: &CellDofs, ct: usize, trial: &CellDofs, cs: usize) -> LocalMatrix {
    let (nft, nfs) = (test.n_free(), trial.n_free());
    let mut ke = LocalMatrix::zeros(local.rows, nfs * cs);
    for r in 0..local.rows {
        for ls in 0..trial.n_local() {
            for c in 0..cs {
                let v = local.get(r, ls * cs + c);
                if v == 0.0 {
                    continue;
                }
                for m in 0..nfs {
                    let e = trial.expansion[ls * nfs + m];
                    if e != 0.0 {
                        ke.add(r, m * cs + c, v * e);
                    }
                }
            }
        }
    }
    let mut out = LocalMatrix::zeros(nft * ct, nfs * cs);
    for lt in 0..test.n_local() {
        for c in 0..ct {
            let r = lt * ct + c;
            for m in 0..nft {
                let e = test.expansion[lt * nft + m];
                if e == 0.0 {
                    continue;
                }
                let orow = (m * ct + c) * out.cols;
                let irow = r * ke.cols;
                for j in 0..ke.cols {
                    out.data[orow + j] += e * ke.data[irow + j];
                }
            }
        }
    }
    out
}

/// `E_testᵀ b`.
pub fn condense_vector(local: &[f64], test: &CellDofs, ct: usize) -> Vec<f64> {
    let nf = test.n_free();
    let mut out = vec![0.0; nf * ct];
    for l in 0..test.n_local() {
        for c in 0..ct {
            let v = local[l * ct + c];
            if v == 0.0 {
                continue;
            }
            for m in 0..nf {
                let e = test.expansion[l * nf + m];
                if e != 0.0 {
                    out[m * ct + c] += e * v;
                }
            }
        }
    }
    out
}

/// Scatter plan of a bilinear form between two spaces on the same cells.
#[derive(Clone, Debug)]
pub struct MatrixAssembler {
    pattern: Arc<SparsityPattern>,
    slots: Vec<Vec<usize>>,
    test_components: usize,
    trial_components: usize,
}

impl MatrixAssembler {
    pub fn new(test: &FeSpace, trial: &FeSpace) -> Result<Self> {
        if test.cells() != trial.cells() {
            return Err(RomError::InvalidArgument("test and trial spaces live on different cells".into()));
        }
        let mut rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); test.n_dofs()];
        let mut cell_rows = Vec::with_capacity(test.cells().len());
        let mut cell_cols = Vec::with_capacity(test.cells().len());
        for pos in 0..test.cells().len() {
            let r = test.cell_free_dofs(pos);
            let c = trial.cell_free_dofs(pos);
            for &i in &r {
                rows[i].extend(c.iter().copied());
            }
            cell_rows.push(r);
            cell_cols.push(c);
        }
        let pattern = Arc::new(SparsityPattern::from_row_sets(trial.n_dofs(), &rows));
        let slots = cell_rows
            .iter()
            .zip(&cell_cols)
            .map(|(r, c)| {
                let mut s = Vec::with_capacity(r.len() * c.len());
                for &i in r {
                    for &j in c {
                        s.push(pattern.position(i, j).expect("entry in pattern"));
                    }
                }
                s
            })
            .collect();
        Ok(MatrixAssembler { pattern, slots, test_components: test.components(), trial_components: trial.components() })
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    /// Pattern positions touched by cell position `pos`.
    pub fn cell_slots(&self, pos: usize) -> &[usize] {
        &self.slots[pos]
    }

    pub fn n_cells(&self) -> usize {
        self.slots.len()
    }

    /// Assembles the form from uncondensed local matrices.
    pub fn assemble(&self, test: &FeSpace, trial: &FeSpace, mut local: impl FnMut(usize) -> Result<LocalMatrix>) -> Result<CsrMatrix> {
        let mut m = CsrMatrix::zeros(self.pattern.clone());
        for pos in 0..self.slots.len() {
            let k = local(pos)?;
            let cond = condense_matrix(&k, test.cell_dofs(pos), self.test_components, trial.cell_dofs(pos), self.trial_components);
            let vals = m.values_mut();
            for (s, v) in self.slots[pos].iter().zip(&cond.data) {
                vals[*s] += v;
            }
        }
        Ok(m)
    }
}

/// Assembles a linear form from uncondensed local vectors.
pub fn assemble_vector(space: &FeSpace, mut local: impl FnMut(usize) -> Result<Vec<f64>>) -> Result<Vec<f64>> {
    let mut out = vec![0.0; space.n_dofs()];
    for pos in 0..space.cells().len() {
        let b = local(pos)?;
        let cond = condense_vector(&b, space.cell_dofs(pos), space.components());
        for (i, v) in space.cell_free_dofs(pos).into_iter().zip(cond) {
            out[i] += v;
        }
    }
    Ok(out)
}
