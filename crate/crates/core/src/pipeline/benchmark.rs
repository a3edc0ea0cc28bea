//! Poisson and Stokes benchmarks on a box with a moving circular hole.

use std::collections::HashMap;
use std::sync::Arc;

use crate::deformation::{DeformationField, DeformationModes, ElasticMaterial, ElasticitySolver};
use crate::error::{Result, RomError};
use crate::fem::assembly::{condense_matrix, condense_vector};
use crate::fem::norms::{assemble_background_norm, assemble_h1_norm};
use crate::fem::poisson::poisson_local;
use crate::fem::{map_cell, CellMotion, CellShapes, FeSpace, HarmonicExtension, LagrangeBasis, MappedCell, MatrixAssembler, PoissonData, SpaceFlavor};
use crate::geometry::{aggregate, classify_cells, BackgroundGrid, BoundaryTag, CellClassification, GeometryQuadrature, LevelSet, Side};
use crate::linalg::{from_columns, solve_sparse, CholeskyFactor, CsrMatrix, DMat};
use crate::localization::{solve_single_block, FomSample, HyperSet, LhsBlock, OfflineProblem, OnlineProblem, ProblemLayout};
use crate::rom::project::SINGULAR_CONDITION;
use crate::rom::{tpod, ttsvd_weighted, ReducedBasis, SvdOptions, TtBasis};
use crate::saddle::{enrich, reduced_coupling_sigma_min, reduced_stokes_condition, reference_coupling_bulk, solve_reduced_stokes, stokes_local, stokes_norms, StokesData, StokesSpaces, StokesSystem};
use crate::Point;

use super::config::{Config, Method, Problem};

/// Per-cell deformation data for online assembly.
pub trait NodalSource: Sync {
    fn basis(&self) -> &LagrangeBasis;

    /// Local nodal displacement of cell `c` at `mu`.
    fn cell_nodal(&self, mu: &[f64], c: usize) -> Result<Vec<Point>>;
}

impl NodalSource for DeformationModes {
    fn basis(&self) -> &LagrangeBasis {
        self.modes[0].basis()
    }

    fn cell_nodal(&self, mu: &[f64], c: usize) -> Result<Vec<Point>> {
        DeformationModes::cell_nodal(self, mu, c)
    }
}

/// Background grid, reference geometry and deformation modes.
pub struct Geometry {
    pub grid: BackgroundGrid,
    pub level_set: LevelSet,
    pub classification: CellClassification,
    pub quadrature: GeometryQuadrature,
    pub modes: DeformationModes,
}

impl Geometry {
    pub fn new(cfg: &Config) -> Result<Self> {
        let grid = BackgroundGrid::new(cfg.lower, cfg.upper, cfg.cells)?;
        let (center, radius) = cfg.hole.center_radius(&cfg.mu_ref);
        let level_set = LevelSet::BallHole { center, radius };
        level_set.validate(&grid)?;
        let classification = classify_cells(&grid, &level_set)?;
        let quadrature = GeometryQuadrature::build(&grid, &classification, &level_set, cfg.quad_points)?;
        let solver = ElasticitySolver::new(&grid, &classification, 2, ElasticMaterial::new(cfg.young, cfg.poisson_ratio)?.with_stiffening(cfg.stiffening)?)?;
        let modes = DeformationModes::new(&solver, cfg.hole, &cfg.mu_ref)?;
        Ok(Geometry { grid, level_set, classification, quadrature, modes })
    }

    /// Deformation at `mu`, checked for bijectivity on the active cells.
    pub fn deformation(&self, mu: &[f64]) -> Result<DeformationField> {
        let d = self.modes.field(mu)?;
        d.check_bijective(&self.classification.active_cells)?;
        Ok(d)
    }
}

pub struct BackgroundParts {
    pub space: FeSpace,
    pub extension: HarmonicExtension,
    pub norm: CsrMatrix,
}

pub struct PoissonParts {
    pub space: FeSpace,
    pub asm: MatrixAssembler,
    pub data: PoissonData,
    pub background: Option<BackgroundParts>,
}

pub struct StokesParts {
    pub spaces: StokesSpaces,
    pub data: StokesData,
    /// Bulk coupling on the reference configuration.
    pub coupling: CsrMatrix,
}

pub enum Physics {
    Poisson(PoissonParts),
    Stokes(StokesParts),
}

pub fn poisson_data() -> PoissonData {
    PoissonData {
        forcing: Arc::new(|x| 2.0 * x[0] * x[1]),
        dirichlet_value: Arc::new(|_| 0.0),
        neumann_value: Arc::new(|_| 0.0),
        dirichlet_tags: vec![BoundaryTag::Face(Side::Left), BoundaryTag::Interface],
    }
}

/// Parabolic inflow on the left face, no slip on the walls and the hole.
pub fn stokes_data(lower: Point, upper: Point) -> StokesData {
    let width = upper[1] - lower[1];
    let tol = 1e-12 * (upper[0] - lower[0]);
    StokesData {
        forcing: Arc::new(|_| [0.0, 0.0]),
        dirichlet_value: Arc::new(move |x| {
            if (x[0] - lower[0]).abs() <= tol {
                let y = x[1] - lower[1];
                [y * (width - y), 0.0]
            } else {
                [0.0, 0.0]
            }
        }),
        dirichlet_tags: vec![BoundaryTag::Face(Side::Left), BoundaryTag::Face(Side::Bottom), BoundaryTag::Face(Side::Top), BoundaryTag::Interface],
    }
}

/// Condensed local blocks of one cell, aligned with the assembler slots
/// and the cell free dofs.
struct CellBlocks {
    lhs: Vec<Vec<f64>>,
    rhs: Vec<Vec<f64>>,
}

pub struct Benchmark {
    pub config: Config,
    pub geometry: Geometry,
    pub physics: Physics,
    pub layout: ProblemLayout,
    pub tau: f64,
    /// Reference norm of every field.
    pub norms: Vec<CsrMatrix>,
    factors: Vec<CholeskyFactor>,
    /// `lhs_owners[block][slot]`: cells contributing to a pattern entry.
    lhs_owners: Vec<Vec<Vec<usize>>>,
    /// `rhs_owners[block][dof]`.
    rhs_owners: Vec<Vec<Vec<usize>>>,
    rhs_dofs: Vec<Vec<Vec<usize>>>,
}

fn owners(n: usize, cells: &[usize], entries: impl Fn(usize) -> Vec<usize>) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); n];
    for (pos, &c) in cells.iter().enumerate() {
        for s in entries(pos) {
            out[s].push(c);
        }
    }
    out
}

impl Benchmark {
    pub fn new(cfg: &Config) -> Result<Self> {
        cfg.validate()?;
        let geometry = Geometry::new(cfg)?;
        let grid = &geometry.grid;
        let cls = &geometry.classification;
        let quad = &geometry.quadrature;
        let tau = cfg.eta / grid.h();
        let (physics, layout, norms) = match cfg.problem {
            Problem::Poisson => {
                let agg = aggregate(cls, grid, cfg.order)?;
                let space = FeSpace::new(grid, cls, Some(&agg), cfg.order, 1, SpaceFlavor::Aggregated)?;
                let asm = MatrixAssembler::new(&space, &space)?;
                let data = poisson_data();
                let x = assemble_h1_norm(&space, &asm, quad, None, tau, &data.dirichlet_tags)?;
                let background = if cfg.method == Method::Ttrb {
                    let bg = FeSpace::background(grid, cfg.order, 1);
                    let bg_asm = MatrixAssembler::new(&bg, &bg)?;
                    let norm = assemble_background_norm(&bg, &bg_asm)?;
                    let extension = HarmonicExtension::new(grid, cls, cfg.order)?;
                    Some(BackgroundParts { space: bg, extension, norm })
                } else {
                    None
                };
                let layout = ProblemLayout {
                    n_fields: 1,
                    lhs_blocks: vec![LhsBlock { test_field: 0, trial_field: 0, pattern: asm.pattern().clone() }],
                    rhs_blocks: vec![0],
                };
                (Physics::Poisson(PoissonParts { space, asm, data, background }), layout, vec![x])
            }
            Problem::Stokes => {
                let spaces = StokesSpaces::new(grid, cls)?;
                let data = stokes_data(cfg.lower, cfg.upper);
                let (x, y) = stokes_norms(&spaces, quad, None, tau, &data.dirichlet_tags)?;
                let coupling = reference_coupling_bulk(&spaces, quad)?;
                let layout = ProblemLayout {
                    n_fields: 2,
                    lhs_blocks: vec![
                        LhsBlock { test_field: 0, trial_field: 0, pattern: spaces.asm_uu.pattern().clone() },
                        LhsBlock { test_field: 1, trial_field: 0, pattern: spaces.asm_pu.pattern().clone() },
                    ],
                    rhs_blocks: vec![0, 1],
                };
                (Physics::Stokes(StokesParts { spaces, data, coupling }), layout, vec![x, y])
            }
        };
        let factors = norms.iter().map(CholeskyFactor::new).collect::<Result<Vec<_>>>()?;
        let mut b = Benchmark {
            config: cfg.clone(),
            geometry,
            physics,
            layout,
            tau,
            norms,
            factors,
            lhs_owners: Vec::new(),
            rhs_owners: Vec::new(),
            rhs_dofs: Vec::new(),
        };
        b.build_owners();
        Ok(b)
    }

    fn build_owners(&mut self) {
        let cells = self.cells().to_vec();
        let (asms, spaces): (Vec<&MatrixAssembler>, Vec<&FeSpace>) = match &self.physics {
            Physics::Poisson(p) => (vec![&p.asm], vec![&p.space]),
            Physics::Stokes(s) => (vec![&s.spaces.asm_uu, &s.spaces.asm_pu], vec![&s.spaces.velocity, &s.spaces.pressure]),
        };
        self.lhs_owners = asms.iter().map(|a| owners(a.pattern().nnz(), &cells, |pos| a.cell_slots(pos).to_vec())).collect();
        self.rhs_owners = spaces.iter().map(|s| owners(s.n_dofs(), &cells, |pos| s.cell_free_dofs(pos))).collect();
        self.rhs_dofs = spaces.iter().map(|s| (0..cells.len()).map(|pos| s.cell_free_dofs(pos)).collect()).collect();
    }

    /// Active cells in assembly order.
    pub fn cells(&self) -> &[usize] {
        match &self.physics {
            Physics::Poisson(p) => p.space.cells(),
            Physics::Stokes(s) => s.spaces.velocity.cells(),
        }
    }

    fn cell_position(&self, c: usize) -> Option<usize> {
        match &self.physics {
            Physics::Poisson(p) => p.space.cell_position(c),
            Physics::Stokes(s) => s.spaces.velocity.cell_position(c),
        }
    }

    fn lhs_slots(&self, block: usize, pos: usize) -> &[usize] {
        match &self.physics {
            Physics::Poisson(p) => p.asm.cell_slots(pos),
            Physics::Stokes(s) => [&s.spaces.asm_uu, &s.spaces.asm_pu][block].cell_slots(pos),
        }
    }

    /// Solution spaces, one per field.
    pub fn spaces(&self) -> Vec<&FeSpace> {
        match &self.physics {
            Physics::Poisson(p) => vec![&p.space],
            Physics::Stokes(s) => vec![&s.spaces.velocity, &s.spaces.pressure],
        }
    }

    pub fn field_names(&self) -> &'static [&'static str] {
        match self.physics {
            Physics::Poisson(_) => &["u"],
            Physics::Stokes(_) => &["u", "p"],
        }
    }

    /// Number of full-order unknowns.
    pub fn fom_dim(&self) -> usize {
        self.spaces().iter().map(|s| s.n_dofs()).sum()
    }

    pub fn norm_factor(&self, field: usize) -> &CholeskyFactor {
        &self.factors[field]
    }

    fn cell_blocks(&self, basis: &LagrangeBasis, nodal: &[Point], pos: usize) -> Result<CellBlocks> {
        let grid = &self.geometry.grid;
        let c = self.cells()[pos];
        let mc: MappedCell = map_cell(grid, self.geometry.quadrature.cell(c)?, Some(CellMotion { basis, nodal }))?;
        match &self.physics {
            Physics::Poisson(p) => {
                let sh = CellShapes::new(p.space.basis(), &mc);
                let (k, b) = poisson_local(&mc, &sh, &p.data, self.tau);
                let cd = p.space.cell_dofs(pos);
                Ok(CellBlocks { lhs: vec![condense_matrix(&k, cd, 1, cd, 1).data], rhs: vec![condense_vector(&b, cd, 1)] })
            }
            Physics::Stokes(s) => {
                let (v, q) = (&s.spaces.velocity, &s.spaces.pressure);
                let su = CellShapes::new(v.basis(), &mc);
                let sp = CellShapes::new(q.basis(), &mc);
                let loc = stokes_local(&mc, &su, &sp, &s.data, self.tau, false);
                let (vd, qd) = (v.cell_dofs(pos), q.cell_dofs(pos));
                Ok(CellBlocks {
                    lhs: vec![condense_matrix(&loc.a, vd, 2, vd, 2).data, condense_matrix(&loc.b, qd, 1, vd, 2).data],
                    rhs: vec![condense_vector(&loc.l, vd, 2), condense_vector(&loc.k, qd, 1)],
                })
            }
        }
    }

    /// Full assembly of every block at `mu` (vectorized matrices).
    pub fn assemble(&self, source: &dyn NodalSource, mu: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let mut lhs: Vec<Vec<f64>> = self.layout.lhs_blocks.iter().map(|b| vec![0.0; b.pattern.nnz()]).collect();
        let mut rhs: Vec<Vec<f64>> = self.spaces().iter().map(|s| vec![0.0; s.n_dofs()]).collect();
        for (pos, &c) in self.cells().iter().enumerate() {
            let nodal = source.cell_nodal(mu, c)?;
            let cb = self.cell_blocks(source.basis(), &nodal, pos)?;
            for (b, vals) in cb.lhs.iter().enumerate() {
                for (s, v) in self.lhs_slots(b, pos).iter().zip(vals) {
                    lhs[b][*s] += v;
                }
            }
            for (b, vals) in cb.rhs.iter().enumerate() {
                for (i, v) in self.rhs_dofs[b][pos].iter().zip(vals) {
                    rhs[b][*i] += v;
                }
            }
        }
        Ok((lhs, rhs))
    }

    /// Sampled entries of every block, assembled on the reduced
    /// integration domain of `hyper` only.
    pub fn sample_entries(&self, source: &dyn NodalSource, hyper: &HyperSet, mu: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let index = |h: &crate::rom::HyperReduction| -> HashMap<usize, usize> { h.indices.iter().enumerate().map(|(k, &i)| (i, k)).collect() };
        let lmaps: Vec<HashMap<usize, usize>> = hyper.lhs.iter().map(index).collect();
        let rmaps: Vec<HashMap<usize, usize>> = hyper.rhs.iter().map(index).collect();
        let mut ls: Vec<Vec<f64>> = hyper.lhs.iter().map(|h| vec![0.0; h.n_terms()]).collect();
        let mut rs: Vec<Vec<f64>> = hyper.rhs.iter().map(|h| vec![0.0; h.n_terms()]).collect();
        for c in hyper.cells() {
            let pos = self.cell_position(c).ok_or_else(|| RomError::InvalidArgument(format!("cell {c} is not active")))?;
            let nodal = source.cell_nodal(mu, c)?;
            let cb = self.cell_blocks(source.basis(), &nodal, pos)?;
            for (b, vals) in cb.lhs.iter().enumerate() {
                for (s, v) in self.lhs_slots(b, pos).iter().zip(vals) {
                    if let Some(&k) = lmaps[b].get(s) {
                        ls[b][k] += v;
                    }
                }
            }
            for (b, vals) in cb.rhs.iter().enumerate() {
                for (i, v) in self.rhs_dofs[b][pos].iter().zip(vals) {
                    if let Some(&k) = rmaps[b].get(i) {
                        rs[b][k] += v;
                    }
                }
            }
        }
        Ok((ls, rs))
    }

    /// Full-order solve at `mu`.
    pub fn solve_fom(&self, mu: &[f64]) -> Result<FomSample> {
        self.solve_fom_inner(mu).map_err(|e| RomError::at(mu, e))
    }

    fn solve_fom_inner(&self, mu: &[f64]) -> Result<FomSample> {
        self.geometry.deformation(mu)?;
        let (lhs, rhs) = self.assemble(&self.geometry.modes, mu)?;
        let fields = match &self.physics {
            Physics::Poisson(_) => {
                let a = CsrMatrix::from_values(self.layout.lhs_blocks[0].pattern.clone(), lhs[0].clone())?;
                vec![solve_sparse(&a, &rhs[0])?]
            }
            Physics::Stokes(_) => {
                let sys = StokesSystem {
                    a: CsrMatrix::from_values(self.layout.lhs_blocks[0].pattern.clone(), lhs[0].clone())?,
                    b: CsrMatrix::from_values(self.layout.lhs_blocks[1].pattern.clone(), lhs[1].clone())?,
                    l: rhs[0].clone(),
                    k: rhs[1].clone(),
                };
                let (u, p) = sys.solve()?;
                vec![u, p]
            }
        };
        Ok(FomSample { fields, lhs, rhs })
    }

    /// Error norms `X(μ)` (and `Y(μ)`) on the deformed configuration.
    pub fn parameter_norms(&self, mu: &[f64]) -> Result<Vec<CsrMatrix>> {
        let def = self.geometry.deformation(mu)?;
        let quad = &self.geometry.quadrature;
        match &self.physics {
            Physics::Poisson(p) => Ok(vec![assemble_h1_norm(&p.space, &p.asm, quad, Some(&def), self.tau, &p.data.dirichlet_tags)?]),
            Physics::Stokes(s) => {
                let (x, y) = stokes_norms(&s.spaces, quad, Some(&def), self.tau, &s.data.dirichlet_tags)?;
                Ok(vec![x, y])
            }
        }
    }

    /// Background-extended snapshots of field 0.
    pub fn extended(&self, samples: &[&FomSample]) -> Result<Vec<Vec<f64>>> {
        match &self.physics {
            Physics::Poisson(PoissonParts { space, background: Some(bg), .. }) => samples.iter().map(|s| bg.extension.extend(space, &s.fields[0])).collect(),
            _ => Err(RomError::Config("background extension requires method ttrb".into())),
        }
    }

    /// Tensor-train basis on the background grid, orthonormal in the
    /// background norm.
    pub fn tt_basis(&self, samples: &[&FomSample], eps: f64, opts: &SvdOptions) -> Result<TtBasis> {
        let bg = match &self.physics {
            Physics::Poisson(PoissonParts { background: Some(bg), .. }) => bg,
            _ => return Err(RomError::Config("method ttrb requires problem poisson".into())),
        };
        let ext = self.extended(samples)?;
        let nd = self.geometry.grid.node_dims(self.config.order);
        let tensor: Vec<f64> = ext.concat();
        ttsvd_weighted(&tensor, &[nd[0], nd[1], ext.len()], &bg.norm, eps, opts)
    }

    pub fn background_norm(&self) -> Option<&CsrMatrix> {
        match &self.physics {
            Physics::Poisson(PoissonParts { background: Some(bg), .. }) => Some(&bg.norm),
            _ => None,
        }
    }

    /// Per-field TPOD bases without supremizer enrichment.
    pub fn plain_bases(&self, samples: &[&FomSample], eps: f64, opts: &SvdOptions) -> Result<Vec<ReducedBasis>> {
        (0..self.layout.n_fields)
            .map(|f| {
                let cols: Vec<Vec<f64>> = samples.iter().map(|s| s.fields[f].clone()).collect();
                let u = from_columns(cols[0].len(), &cols);
                tpod(u.as_ref(), Some(&self.factors[f]), eps, opts)
            })
            .collect()
    }

    /// `σ_min` of the reduced bulk coupling of Stokes bases.
    pub fn coupling_sigma_min(&self, bases: &[ReducedBasis]) -> Result<Option<f64>> {
        match &self.physics {
            Physics::Stokes(s) => Ok(Some(reduced_coupling_sigma_min(&bases[0].basis, &bases[1].basis, &s.coupling)?)),
            Physics::Poisson(_) => Ok(None),
        }
    }

    /// Online evaluator reading deformation data from `source`.
    pub fn online_with<'a>(&'a self, source: &'a dyn NodalSource) -> OnlineEvaluator<'a> {
        OnlineEvaluator { bench: self, source }
    }

    fn reduced_solve(&self, lhs: &[DMat], rhs: &[Vec<f64>]) -> std::result::Result<Vec<f64>, f64> {
        match self.physics {
            Physics::Poisson(_) => solve_single_block(lhs, rhs),
            Physics::Stokes(_) => {
                let cond = reduced_stokes_condition(&lhs[0], &lhs[1]);
                if !(cond < SINGULAR_CONDITION) {
                    return Err(cond);
                }
                let (u, p) = solve_reduced_stokes(&lhs[0], &lhs[1], &rhs[0], &rhs[1]).map_err(|_| cond)?;
                Ok(u.into_iter().chain(p).collect())
            }
        }
    }
}

fn union_cells(owners: &[Vec<usize>], indices: &[usize]) -> Vec<usize> {
    let mut c: Vec<usize> = indices.iter().flat_map(|&i| owners[i].iter().copied()).collect();
    c.sort_unstable();
    c.dedup();
    c
}

impl OfflineProblem for Benchmark {
    fn layout(&self) -> &ProblemLayout {
        &self.layout
    }

    fn build_bases(&self, samples: &[&FomSample], eps: f64, opts: &SvdOptions) -> Result<Vec<ReducedBasis>> {
        match (&self.physics, self.config.method) {
            (Physics::Poisson(p), Method::Ttrb) => {
                let tt = self.tt_basis(samples, eps, opts)?;
                let full = tt.contract();
                let rows = p.space.free_nodes();
                let basis = DMat::from_fn(rows.len(), full.ncols(), |i, j| full[(rows[i], j)]);
                Ok(vec![ReducedBasis { basis, singular_values: Vec::new() }])
            }
            (Physics::Poisson(_), Method::Tpod) => self.plain_bases(samples, eps, opts),
            (Physics::Stokes(s), _) => {
                let mut bases = self.plain_bases(samples, eps, opts)?;
                if self.config.enrichment {
                    let set = enrich(&bases[0].basis, &bases[1].basis, &self.norms[0], &self.factors[0], &s.coupling, self.config.supremizer)?;
                    bases[0].basis = set.basis;
                }
                Ok(bases)
            }
        }
    }

    fn lhs_cells(&self, block: usize, indices: &[usize]) -> Vec<usize> {
        union_cells(&self.lhs_owners[block], indices)
    }

    fn rhs_cells(&self, block: usize, indices: &[usize]) -> Vec<usize> {
        union_cells(&self.rhs_owners[block], indices)
    }
}

impl OnlineProblem for Benchmark {
    fn sample(&self, hyper: &HyperSet, mu: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        self.sample_entries(&self.geometry.modes, hyper, mu)
    }

    fn solve_reduced(&self, lhs: &[DMat], rhs: &[Vec<f64>]) -> std::result::Result<Vec<f64>, f64> {
        self.reduced_solve(lhs, rhs)
    }
}

/// Online problem with an explicit deformation source.
pub struct OnlineEvaluator<'a> {
    bench: &'a Benchmark,
    source: &'a dyn NodalSource,
}

impl OnlineProblem for OnlineEvaluator<'_> {
    fn sample(&self, hyper: &HyperSet, mu: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        self.bench.sample_entries(self.source, hyper, mu)
    }

    fn solve_reduced(&self, lhs: &[DMat], rhs: &[Vec<f64>]) -> std::result::Result<Vec<f64>, f64> {
        self.bench.reduced_solve(lhs, rhs)
    }
}
