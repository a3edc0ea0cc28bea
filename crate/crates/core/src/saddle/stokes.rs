//! Taylor-Hood Stokes discretization with Nitsche-imposed velocity data.

use std::sync::Arc;

use crate::deformation::DeformationField;
use crate::error::Result;
use crate::fem::assembly::{assemble_vector, CellShapes, LocalMatrix, MappedCell, MatrixAssembler};
use crate::fem::poisson::mapped_cell;
use crate::fem::space::{FeSpace, SpaceFlavor};
use crate::geometry::{aggregate, BackgroundGrid, BoundaryTag, CellClassification, GeometryQuadrature};
use crate::linalg::{CsrMatrix, SparseLu, TripletBuilder};
use crate::Point;

pub type VectorFn = Arc<dyn Fn(Point) -> Point + Send + Sync>;

#[derive(Clone)]
pub struct StokesData {
    pub forcing: VectorFn,
    pub dirichlet_value: VectorFn,
    pub dirichlet_tags: Vec<BoundaryTag>,
}

impl StokesData {
    pub fn is_dirichlet(&self, tag: BoundaryTag) -> bool {
        self.dirichlet_tags.contains(&tag)
    }
}

impl std::fmt::Debug for StokesData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StokesData").field("dirichlet_tags", &self.dirichlet_tags).finish_non_exhaustive()
    }
}

/// Aggregated `Q2`/`Q1` pair with the scatter plans of both blocks.
#[derive(Clone, Debug)]
pub struct StokesSpaces {
    pub velocity: FeSpace,
    pub pressure: FeSpace,
    pub asm_uu: MatrixAssembler,
    pub asm_pu: MatrixAssembler,
    pub asm_pp: MatrixAssembler,
}

impl StokesSpaces {
    pub fn new(grid: &BackgroundGrid, cls: &CellClassification) -> Result<Self> {
        let agg2 = aggregate(cls, grid, 2)?;
        let agg1 = aggregate(cls, grid, 1)?;
        let velocity = FeSpace::new(grid, cls, Some(&agg2), 2, 2, SpaceFlavor::Aggregated)?;
        let pressure = FeSpace::new(grid, cls, Some(&agg1), 1, 1, SpaceFlavor::Aggregated)?;
        let asm_uu = MatrixAssembler::new(&velocity, &velocity)?;
        let asm_pu = MatrixAssembler::new(&pressure, &velocity)?;
        let asm_pp = MatrixAssembler::new(&pressure, &pressure)?;
        Ok(StokesSpaces { velocity, pressure, asm_uu, asm_pu, asm_pp })
    }

    pub fn n_velocity(&self) -> usize {
        self.velocity.n_dofs()
    }

    pub fn n_pressure(&self) -> usize {
        self.pressure.n_dofs()
    }
}

/// Blocks of `[[A, -Bᵀ], [B, 0]] [u; p] = [l; k]`.
#[derive(Clone, Debug)]
pub struct StokesSystem {
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    pub l: Vec<f64>,
    pub k: Vec<f64>,
}

impl StokesSystem {
    pub fn saddle_matrix(&self) -> TripletBuilder {
        let nu = self.a.nrows();
        let np = self.b.nrows();
        let mut t = TripletBuilder::new(nu + np);
        t.add_csr(&self.a, 0, 0, 1.0, false);
        t.add_csr(&self.b, 0, nu, -1.0, true);
        t.add_csr(&self.b, nu, 0, 1.0, false);
        t
    }

    pub fn rhs(&self) -> Vec<f64> {
        self.l.iter().chain(&self.k).copied().collect()
    }

    /// Direct solve; returns `(u, p)`.
    pub fn solve(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let lu = SparseLu::new(self.saddle_matrix().build()?)?;
        let x = lu.solve(&self.rhs())?;
        let nu = self.a.nrows();
        Ok((x[..nu].to_vec(), x[nu..].to_vec()))
    }
}

/// Uncondensed local blocks of one cell.
#[derive(Clone, Debug)]
pub struct StokesLocal {
    pub a: LocalMatrix,
    pub b: LocalMatrix,
    pub l: Vec<f64>,
    pub k: Vec<f64>,
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Local Stokes blocks; velocity dofs are `node * 2 + component`.
pub fn stokes_local(mc: &MappedCell, su: &CellShapes, sp: &CellShapes, data: &StokesData, tau: f64, bulk_coupling_only: bool) -> StokesLocal {
    let nu = su.bulk.first().or(su.surface.first()).map_or(0, |s| s.values.len());
    let np = sp.bulk.first().or(sp.surface.first()).map_or(0, |s| s.values.len());
    let mut a = LocalMatrix::zeros(2 * nu, 2 * nu);
    let mut b = LocalMatrix::zeros(np, 2 * nu);
    let mut l = vec![0.0; 2 * nu];
    let mut k = vec![0.0; np];
    for ((q, u), p) in mc.bulk.iter().zip(&su.bulk).zip(&sp.bulk) {
        let f = (data.forcing)(q.x);
        for i in 0..nu {
            for j in 0..nu {
                let v = q.weight * dot(u.grads[i], u.grads[j]);
                a.add(2 * i, 2 * j, v);
                a.add(2 * i + 1, 2 * j + 1, v);
            }
            l[2 * i] += q.weight * f[0] * u.values[i];
            l[2 * i + 1] += q.weight * f[1] * u.values[i];
        }
        for m in 0..np {
            for j in 0..nu {
                for c in 0..2 {
                    b.add(m, 2 * j + c, q.weight * p.values[m] * u.grads[j][c]);
                }
            }
        }
    }
    for ((q, u), p) in mc.surface.iter().zip(&su.surface).zip(&sp.surface) {
        if !data.is_dirichlet(q.tag) {
            continue;
        }
        let n = q.normal;
        let g = (data.dirichlet_value)(q.x);
        let dn: Vec<f64> = u.grads.iter().map(|d| dot(*d, n)).collect();
        if !bulk_coupling_only {
            for i in 0..nu {
                for j in 0..nu {
                    let v = q.weight * (tau * u.values[i] * u.values[j] - dn[j] * u.values[i] - dn[i] * u.values[j]);
                    a.add(2 * i, 2 * j, v);
                    a.add(2 * i + 1, 2 * j + 1, v);
                }
                for c in 0..2 {
                    l[2 * i + c] += q.weight * (tau * g[c] * u.values[i] - dn[i] * g[c]);
                }
            }
        }
        for m in 0..np {
            if !bulk_coupling_only {
                for j in 0..nu {
                    for c in 0..2 {
                        b.add(m, 2 * j + c, -q.weight * p.values[m] * u.values[j] * n[c]);
                    }
                }
            }
            k[m] -= q.weight * p.values[m] * dot(g, n);
        }
    }
    StokesLocal { a, b, l, k }
}

fn assemble_blocks(
    spaces: &StokesSpaces,
    quad: &GeometryQuadrature,
    def: Option<&DeformationField>,
    data: &StokesData,
    tau: f64,
    bulk_only: bool,
) -> Result<StokesSystem> {
    let v = &spaces.velocity;
    let p = &spaces.pressure;
    let n = v.cells().len();
    let mut locals: Vec<Option<StokesLocal>> = Vec::with_capacity(n);
    for pos in 0..n {
        let mc = mapped_cell(v, quad, def, v.cells()[pos])?;
        let su = CellShapes::new(v.basis(), &mc);
        let sp = CellShapes::new(p.basis(), &mc);
        locals.push(Some(stokes_local(&mc, &su, &sp, data, tau, bulk_only)));
    }
    let a = spaces.asm_uu.assemble(v, v, |pos| Ok(locals[pos].as_ref().expect("local").a.clone()))?;
    let b = spaces.asm_pu.assemble(p, v, |pos| Ok(locals[pos].as_ref().expect("local").b.clone()))?;
    let l = assemble_vector(v, |pos| Ok(locals[pos].as_ref().expect("local").l.clone()))?;
    let k = assemble_vector(p, |pos| Ok(locals[pos].take().expect("local").k))?;
    Ok(StokesSystem { a, b, l, k })
}

/// Assembles the pulled-back Stokes system with `τ = η / h`.
pub fn assemble_stokes(spaces: &StokesSpaces, quad: &GeometryQuadrature, def: Option<&DeformationField>, data: &StokesData, eta: f64) -> Result<StokesSystem> {
    if !(eta > 0.0) {
        return Err(crate::RomError::InvalidArgument(format!("Nitsche constant must be positive, got {eta}")));
    }
    assemble_blocks(spaces, quad, def, data, eta / spaces.velocity.grid().h(), false)
}

/// Bulk coupling `∫ q ∇·v` on the reference configuration.
pub fn reference_coupling_bulk(spaces: &StokesSpaces, quad: &GeometryQuadrature) -> Result<CsrMatrix> {
    let data = StokesData { forcing: Arc::new(|_| [0.0, 0.0]), dirichlet_value: Arc::new(|_| [0.0, 0.0]), dirichlet_tags: Vec::new() };
    Ok(assemble_blocks(spaces, quad, None, &data, 0.0, true)?.b)
}

/// Velocity norm `∫∇u:∇v + τ∫_{Γ_D} u·v` and pressure mass `∫ p q`.
pub fn stokes_norms(spaces: &StokesSpaces, quad: &GeometryQuadrature, def: Option<&DeformationField>, tau: f64, dirichlet: &[BoundaryTag]) -> Result<(CsrMatrix, CsrMatrix)> {
    let x = crate::fem::norms::assemble_h1_norm(&spaces.velocity, &spaces.asm_uu, quad, def, tau, dirichlet)?;
    let y = crate::fem::norms::assemble_mass(&spaces.pressure, &spaces.asm_pp, quad, def)?;
    Ok((x, y))
}
