//! Elastic deformation of the reference configuration onto the parametrized
//! domain, and pull-back of derivatives and measures through it.
//!
//! The map is `x = x̃ + ψ(x̃)` where `ψ` solves linear elasticity on the
//! internal cells with affine Dirichlet data on the cut cells (hole) and on
//! the box boundary.

use std::collections::BTreeSet;

use crate::error::{Result, RomError};
use crate::fem::assembly::MatrixAssembler;
use crate::fem::basis::LagrangeBasis;
use crate::fem::space::{FeSpace, SpaceFlavor};
use crate::geometry::{BackgroundGrid, CellClassification, CellLabel, GeometryQuadrature};
use crate::linalg::{SparseLu, TripletBuilder};
use crate::quadrature::square_rule;
use crate::Point;

/// Lamé parameters `(λ, γ)` from Young's modulus and Poisson's ratio.
pub fn lame_coefficients(young: f64, poisson: f64) -> Result<(f64, f64)> {
    if poisson >= 0.5 {
        return Err(RomError::IncompressibleLimit(poisson));
    }
    if !(young > 0.0) || !(poisson > -1.0) {
        return Err(RomError::InvalidMaterial(format!("E = {young}, nu = {poisson}")));
    }
    let lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
    let gamma = young / (2.0 * (1.0 + poisson));
    Ok((lambda, gamma))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElasticMaterial {
    pub young: f64,
    pub poisson: f64,
    pub lambda: f64,
    pub gamma: f64,
    /// Exponent `χ` of the distance-based stiffening `(h / d_K)^χ`, where
    /// `d_K` is the distance from cell `K` to the nearest cut cell.
    pub stiffening: f64,
}

impl ElasticMaterial {
    pub fn new(young: f64, poisson: f64) -> Result<Self> {
        let (lambda, gamma) = lame_coefficients(young, poisson)?;
        Ok(ElasticMaterial { young, poisson, lambda, gamma, stiffening: 0.0 })
    }

    pub fn with_stiffening(mut self, chi: f64) -> Result<Self> {
        if !(chi >= 0.0) {
            return Err(RomError::InvalidMaterial(format!("stiffening exponent {chi}")));
        }
        self.stiffening = chi;
        Ok(self)
    }
}

/// Per-cell stiffness scaling `(h / max(d_K, h))^χ`, where `d_K` is the
/// distance between the centers of `K` and the nearest cut cell.
fn stiffening_factors(grid: &BackgroundGrid, cells: &[usize], cut: &[usize], chi: f64) -> Vec<f64> {
    let h = grid.h();
    cells
        .iter()
        .map(|&c| {
            if chi == 0.0 || cut.is_empty() {
                return 1.0;
            }
            let x = grid.cell_center(c);
            let d = cut
                .iter()
                .map(|&k| {
                    let y = grid.cell_center(k);
                    ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            (h / d.max(h)).powf(chi)
        })
        .collect()
}

/// Displacement `linear * x + offset`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineDisplacement {
    pub linear: [[f64; 2]; 2],
    pub offset: Point,
}

impl AffineDisplacement {
    pub fn zero() -> Self {
        AffineDisplacement { linear: [[0.0; 2]; 2], offset: [0.0; 2] }
    }

    pub fn translation(t: Point) -> Self {
        AffineDisplacement { linear: [[0.0; 2]; 2], offset: t }
    }

    pub fn eval(&self, x: Point) -> Point {
        let l = &self.linear;
        [l[0][0] * x[0] + l[0][1] * x[1] + self.offset[0], l[1][0] * x[0] + l[1][1] * x[1] + self.offset[1]]
    }

    /// Coefficients `[L00, L01, L10, L11, b0, b1]`.
    pub fn coefficients(&self) -> [f64; 6] {
        let l = &self.linear;
        [l[0][0], l[0][1], l[1][0], l[1][1], self.offset[0], self.offset[1]]
    }

    pub fn from_coefficients(c: [f64; 6]) -> Self {
        AffineDisplacement { linear: [[c[0], c[1]], [c[2], c[3]]], offset: [c[4], c[5]] }
    }
}

/// Dirichlet data of the deformation problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryDisplacement {
    pub hole: AffineDisplacement,
    pub outer: AffineDisplacement,
}

/// How the hole moves with the parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HoleMotion {
    /// Center `(μ1, μ1)`, radius `μ2`.
    DiagonalCenterRadius,
    /// Center `(μ1, μ2)`, fixed radius.
    Center { radius: f64 },
}

impl HoleMotion {
    pub fn center_radius(&self, mu: &[f64]) -> (Point, f64) {
        match self {
            HoleMotion::DiagonalCenterRadius => ([mu[0], mu[0]], mu[1]),
            HoleMotion::Center { radius } => ([mu[0], mu[1]], *radius),
        }
    }

    /// Affine hole displacement carrying the reference circle onto the
    /// circle of `mu`.
    pub fn hole_displacement(&self, mu: &[f64], mu_ref: &[f64]) -> Result<AffineDisplacement> {
        if mu.len() != 2 || mu_ref.len() != 2 {
            return Err(RomError::DimensionMismatch("hole parameters have two entries".into()));
        }
        match self {
            HoleMotion::DiagonalCenterRadius => {
                if !(mu_ref[1] > 0.0) || !(mu[1] > 0.0) {
                    return Err(RomError::InvalidArgument("hole radius must be positive".into()));
                }
                let s = mu[1] / mu_ref[1];
                let b = mu[0] - s * mu_ref[0];
                Ok(AffineDisplacement { linear: [[s - 1.0, 0.0], [0.0, s - 1.0]], offset: [b, b] })
            }
            HoleMotion::Center { .. } => Ok(AffineDisplacement::translation([mu[0] - mu_ref[0], mu[1] - mu_ref[1]])),
        }
    }
}

/// Boundary data moving the hole of `mu_ref` to the hole of `mu` with a
/// fixed outer box.
pub fn hole_boundary_displacement(motion: HoleMotion, mu: &[f64], mu_ref: &[f64]) -> Result<BoundaryDisplacement> {
    Ok(BoundaryDisplacement { hole: motion.hole_displacement(mu, mu_ref)?, outer: AffineDisplacement::zero() })
}

/// `J = I + ∇̃ψ` at local point `xi` of a cell with nodal displacement `nodal`.
pub fn jacobian_at(basis: &LagrangeBasis, nodal: &[Point], xi: Point, spacing: [f64; 2]) -> [[f64; 2]; 2] {
    let g = basis.gradients(xi);
    let mut j = [[1.0, 0.0], [0.0, 1.0]];
    for (k, n) in nodal.iter().enumerate() {
        let d = [g[k][0] / spacing[0], g[k][1] / spacing[1]];
        for a in 0..2 {
            for b in 0..2 {
                j[a][b] += n[a] * d[b];
            }
        }
    }
    j
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pullback {
    pub det: f64,
    pub jinv_t: [[f64; 2]; 2],
    /// `‖J^{-T} ñ‖ det J`.
    pub surface_scale: f64,
    pub normal: Point,
}

impl Pullback {
    /// Physical gradient from a reference gradient.
    pub fn gradient(&self, g: Point) -> Point {
        let m = &self.jinv_t;
        [m[0][0] * g[0] + m[0][1] * g[1], m[1][0] * g[0] + m[1][1] * g[1]]
    }
}

pub fn pullback(j: [[f64; 2]; 2], ref_normal: Point) -> Pullback {
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let jinv_t = [[j[1][1] / det, -j[1][0] / det], [-j[0][1] / det, j[0][0] / det]];
    let m = [jinv_t[0][0] * ref_normal[0] + jinv_t[0][1] * ref_normal[1], jinv_t[1][0] * ref_normal[0] + jinv_t[1][1] * ref_normal[1]];
    let len = (m[0] * m[0] + m[1] * m[1]).sqrt();
    Pullback { det, jinv_t, surface_scale: len * det, normal: [m[0] / len, m[1] / len] }
}

/// Singular values of a 2x2 matrix, largest first.
pub fn singular_values_2x2(j: [[f64; 2]; 2]) -> (f64, f64) {
    let t = j[0][0].powi(2) + j[0][1].powi(2) + j[1][0].powi(2) + j[1][1].powi(2);
    let d = (j[0][0] * j[1][1] - j[0][1] * j[1][0]).abs();
    let disc = (t * t - 4.0 * d * d).max(0.0).sqrt();
    let s1 = ((t + disc) / 2.0).sqrt();
    let s2 = if s1 > 0.0 { d / s1 } else { 0.0 };
    (s1, s2)
}

/// Nodal displacement on the order-`p` lattice of the background grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DeformationField {
    grid: BackgroundGrid,
    basis: LagrangeBasis,
    nodal: Vec<Point>,
}

impl DeformationField {
    pub fn zero(grid: &BackgroundGrid, order: usize) -> Self {
        DeformationField { grid: grid.clone(), basis: LagrangeBasis::new(order), nodal: vec![[0.0; 2]; grid.n_nodes(order)] }
    }

    pub fn from_nodal(grid: &BackgroundGrid, order: usize, nodal: Vec<Point>) -> Result<Self> {
        if nodal.len() != grid.n_nodes(order) {
            return Err(RomError::DimensionMismatch(format!("{} nodal values for {} nodes", nodal.len(), grid.n_nodes(order))));
        }
        Ok(DeformationField { grid: grid.clone(), basis: LagrangeBasis::new(order), nodal })
    }

    pub fn grid(&self) -> &BackgroundGrid {
        &self.grid
    }

    pub fn basis(&self) -> &LagrangeBasis {
        &self.basis
    }

    pub fn order(&self) -> usize {
        self.basis.order()
    }

    pub fn nodal(&self) -> &[Point] {
        &self.nodal
    }

    pub fn cell_nodal(&self, c: usize) -> Vec<Point> {
        self.grid.cell_nodes(self.order(), c).into_iter().map(|n| self.nodal[n]).collect()
    }

    pub fn eval(&self, c: usize, xi: Point) -> Point {
        let v = self.basis.values(xi);
        let mut d = [0.0; 2];
        for (k, n) in self.grid.cell_nodes(self.order(), c).into_iter().enumerate() {
            d[0] += v[k] * self.nodal[n][0];
            d[1] += v[k] * self.nodal[n][1];
        }
        d
    }

    pub fn jacobian(&self, c: usize, xi: Point) -> [[f64; 2]; 2] {
        jacobian_at(&self.basis, &self.cell_nodal(c), xi, self.grid.spacing())
    }

    /// Deformed position of a local point.
    pub fn map_point(&self, c: usize, xi: Point) -> Point {
        let x = self.grid.to_global(c, xi);
        let d = self.eval(c, xi);
        [x[0] + d[0], x[1] + d[1]]
    }

    /// Linear combination of fields with identical layout.
    pub fn combine(fields: &[DeformationField], coeffs: &[f64]) -> Result<DeformationField> {
        let first = fields.first().ok_or_else(|| RomError::InvalidArgument("no fields to combine".into()))?;
        if fields.len() != coeffs.len() {
            return Err(RomError::DimensionMismatch(format!("{} fields, {} coefficients", fields.len(), coeffs.len())));
        }
        let mut nodal = vec![[0.0; 2]; first.nodal.len()];
        for (f, &c) in fields.iter().zip(coeffs) {
            if c == 0.0 {
                continue;
            }
            for (o, v) in nodal.iter_mut().zip(&f.nodal) {
                o[0] += c * v[0];
                o[1] += c * v[1];
            }
        }
        Ok(DeformationField { grid: first.grid.clone(), basis: first.basis, nodal })
    }

    /// Fails if `det J <= 0` at the `(p + 2)²` Gauss points of any cell in `cells`.
    pub fn check_bijective(&self, cells: &[usize]) -> Result<()> {
        let rule = square_rule(self.order() + 2);
        for &c in cells {
            let nodal = self.cell_nodal(c);
            for xi in &rule.points {
                let j = jacobian_at(&self.basis, &nodal, *xi, self.grid.spacing());
                let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                if !(det > 0.0) {
                    return Err(RomError::NotBijective { cell: c, det });
                }
            }
        }
        Ok(())
    }
}

/// Extreme singular values of `J` over the sampled points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JacobianBounds {
    pub c1: f64,
    pub cd: f64,
}

impl JacobianBounds {
    /// Upper factor of `‖v‖²_{X(μ)} ≤ κ · factor · ‖v‖²_X` in 2D.
    pub fn upper_factor(&self, kappa: f64) -> f64 {
        kappa * self.cd.max(1.0) / self.c1
    }

    /// Upper factor of `‖v‖²_X ≤ κ · factor · ‖v‖²_{X(μ)}` in 2D.
    pub fn lower_factor(&self, kappa: f64) -> f64 {
        kappa * self.cd / self.c1.min(1.0)
    }
}

/// Bounds from the bulk and surface quadrature points of all active cells.
pub fn jacobian_bounds(def: &DeformationField, quad: &GeometryQuadrature) -> JacobianBounds {
    let mut c1 = f64::INFINITY;
    let mut cd: f64 = 0.0;
    for cq in &quad.cells {
        let nodal = def.cell_nodal(cq.cell);
        for xi in cq.bulk_local.iter().chain(cq.surface.iter().map(|s| &s.local)) {
            let (s1, s2) = singular_values_2x2(jacobian_at(def.basis(), &nodal, *xi, def.grid().spacing()));
            cd = cd.max(s1);
            c1 = c1.min(s2);
        }
    }
    JacobianBounds { c1, cd }
}

/// Factorized elasticity operator on the internal cells of a fixed
/// reference configuration.
pub struct ElasticitySolver {
    grid: BackgroundGrid,
    order: usize,
    space: FeSpace,
    /// Dofs of `space` that are solved for; the rest carry Dirichlet data.
    free: Vec<usize>,
    free_pos: Vec<Option<usize>>,
    stiffness: crate::linalg::CsrMatrix,
    lu: Option<SparseLu>,
    hole_nodes: BTreeSet<usize>,
    active_nodes: Vec<usize>,
    active_cells: Vec<usize>,
}

impl ElasticitySolver {
    pub fn new(grid: &BackgroundGrid, cls: &CellClassification, order: usize, material: ElasticMaterial) -> Result<Self> {
        let space = FeSpace::new(grid, cls, None, order, 2, SpaceFlavor::Internal)?;
        let hole_nodes: BTreeSet<usize> = cls.nodes_of(grid, order, &[CellLabel::Cut]).into_iter().collect();
        let mut free = Vec::new();
        let mut free_pos = vec![None; space.n_dofs()];
        for (k, &n) in space.free_nodes().iter().enumerate() {
            if !hole_nodes.contains(&n) && !grid.node_on_boundary(order, n) {
                for c in 0..2 {
                    free_pos[2 * k + c] = Some(free.len());
                    free.push(2 * k + c);
                }
            }
        }
        let asm = MatrixAssembler::new(&space, &space)?;
        let basis = LagrangeBasis::new(order);
        let rule = square_rule(order + 1);
        let s = grid.spacing();
        let (lam, gam) = (material.lambda, material.gamma);
        let nl = basis.n_nodes();
        let grads: Vec<Vec<Point>> = rule
            .points
            .iter()
            .map(|xi| basis.gradients(*xi).into_iter().map(|g| [g[0] / s[0], g[1] / s[1]]).collect())
            .collect();
        let mut kloc = crate::fem::assembly::LocalMatrix::zeros(2 * nl, 2 * nl);
        for (q, w) in rule.weights.iter().enumerate() {
            let w = w * s[0] * s[1];
            let g = &grads[q];
            for i in 0..nl {
                for j in 0..nl {
                    let gg = g[i][0] * g[j][0] + g[i][1] * g[j][1];
                    for a in 0..2 {
                        for b in 0..2 {
                            let mut v = lam * g[i][a] * g[j][b] + gam * g[j][a] * g[i][b];
                            if a == b {
                                v += gam * gg;
                            }
                            kloc.add(2 * i + a, 2 * j + b, w * v);
                        }
                    }
                }
            }
        }
        let factors = stiffening_factors(grid, space.cells(), &cls.cells_with(CellLabel::Cut), material.stiffening);
        let stiffness = asm.assemble(&space, &space, |pos| {
            let mut k = kloc.clone();
            k.scale(factors[pos]);
            Ok(k)
        })?;
        let lu = if free.is_empty() {
            None
        } else {
            let mut tb = TripletBuilder::new(free.len());
            let p = stiffness.pattern();
            for (r, &i) in free.iter().enumerate() {
                for k in p.row_range(i) {
                    if let Some(c) = free_pos[p.col_idx()[k]] {
                        tb.push(r, c, stiffness.values()[k]);
                    }
                }
            }
            Some(SparseLu::new(tb.build()?)?)
        };
        Ok(ElasticitySolver {
            grid: grid.clone(),
            order,
            space,
            free,
            free_pos,
            stiffness,
            lu,
            hole_nodes,
            active_nodes: cls.active_nodes(grid, order),
            active_cells: cls.active_cells.clone(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_free_dofs(&self) -> usize {
        self.free.len()
    }

    /// Solves for the deformation with the given boundary data.
    pub fn solve(&self, bc: &BoundaryDisplacement) -> Result<DeformationField> {
        let field = self.solve_raw(self.dirichlet_nodal(bc))?;
        field.check_bijective(&self.active_cells)?;
        Ok(field)
    }

    fn dirichlet_nodal(&self, bc: &BoundaryDisplacement) -> Vec<Point> {
        let p = self.order;
        let mut nodal = vec![[0.0; 2]; self.grid.n_nodes(p)];
        for &n in &self.active_nodes {
            let x = self.grid.node_coord(p, n);
            if self.hole_nodes.contains(&n) {
                nodal[n] = bc.hole.eval(x);
            } else if self.grid.node_on_boundary(p, n) {
                nodal[n] = bc.outer.eval(x);
            }
        }
        nodal
    }

    fn solve_raw(&self, mut nodal: Vec<Point>) -> Result<DeformationField> {
        if let Some(lu) = &self.lu {
            let mut u = vec![0.0; self.space.n_dofs()];
            for (k, &n) in self.space.free_nodes().iter().enumerate() {
                u[2 * k] = nodal[n][0];
                u[2 * k + 1] = nodal[n][1];
            }
            for &d in &self.free {
                u[d] = 0.0;
            }
            let ku = self.stiffness.mul_vec(&u);
            let rhs: Vec<f64> = self.free.iter().map(|&d| -ku[d]).collect();
            let sol = lu.solve(&rhs)?;
            for (d, pos) in self.free_pos.iter().enumerate() {
                if let Some(r) = pos {
                    let n = self.space.free_nodes()[d / 2];
                    nodal[n][d % 2] = sol[*r];
                }
            }
        }
        DeformationField::from_nodal(&self.grid, self.order, nodal)
    }
}

/// Deformation as a superposition of six unit-coefficient solves, one per
/// coefficient of the affine hole displacement.
#[derive(Clone, Debug)]
pub struct DeformationModes {
    pub motion: HoleMotion,
    pub mu_ref: Vec<f64>,
    pub modes: Vec<DeformationField>,
}

impl DeformationModes {
    pub fn new(solver: &ElasticitySolver, motion: HoleMotion, mu_ref: &[f64]) -> Result<Self> {
        let mut modes = Vec::with_capacity(6);
        for k in 0..6 {
            let mut c = [0.0; 6];
            c[k] = 1.0;
            let bc = BoundaryDisplacement { hole: AffineDisplacement::from_coefficients(c), outer: AffineDisplacement::zero() };
            // unit modes need not be bijective on their own
            modes.push(solver.solve_raw(solver.dirichlet_nodal(&bc))?);
        }
        Ok(DeformationModes { motion, mu_ref: mu_ref.to_vec(), modes })
    }

    pub fn coefficients(&self, mu: &[f64]) -> Result<[f64; 6]> {
        Ok(self.motion.hole_displacement(mu, &self.mu_ref)?.coefficients())
    }

    pub fn field(&self, mu: &[f64]) -> Result<DeformationField> {
        DeformationField::combine(&self.modes, &self.coefficients(mu)?)
    }

    /// Local nodal displacement of one cell at `mu`.
    pub fn cell_nodal(&self, mu: &[f64], c: usize) -> Result<Vec<Point>> {
        let coeffs = self.coefficients(mu)?;
        let locals: Vec<Vec<Point>> = self.modes.iter().map(|m| m.cell_nodal(c)).collect();
        Ok(combine_local(&locals, &coeffs))
    }
}

/// Coefficient-weighted sum of local nodal fields, summed in mode order.
pub fn combine_local(locals: &[Vec<Point>], coeffs: &[f64]) -> Vec<Point> {
    let mut out = vec![[0.0; 2]; locals.first().map_or(0, |l| l.len())];
    for (l, &c) in locals.iter().zip(coeffs) {
        if c == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(l) {
            o[0] += c * v[0];
            o[1] += c * v[1];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{classify_cells, LevelSet};

    #[test]
    fn lame_values() {
        let (l, g) = lame_coefficients(1.0, 0.3).unwrap();
        assert!((l - 0.3 / (1.3 * 0.4)).abs() < 1e-15);
        assert!((g - 1.0 / 2.6).abs() < 1e-15);
        assert!(matches!(lame_coefficients(1.0, 0.5), Err(RomError::IncompressibleLimit(_))));
        assert!(lame_coefficients(-1.0, 0.3).is_err());
    }

    #[test]
    fn pullback_of_dilation() {
        let pb = pullback([[2.0, 0.0], [0.0, 2.0]], [1.0, 0.0]);
        assert!((pb.det - 4.0).abs() < 1e-15);
        assert!((pb.surface_scale - 2.0).abs() < 1e-15);
        assert_eq!(pb.gradient([1.0, 1.0]), [0.5, 0.5]);
    }

    #[test]
    fn singular_values_of_shear() {
        let (s1, s2) = singular_values_2x2([[1.0, 1.0], [0.0, 1.0]]);
        let g = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((s1 - g).abs() < 1e-14 && (s2 - 1.0 / g).abs() < 1e-14);
    }

    #[test]
    fn affine_data_is_reproduced() {
        let g = BackgroundGrid::new([-1.0, -1.0], [1.0, 1.0], [10, 10]).unwrap();
        let cls = classify_cells(&g, &LevelSet::BallHole { center: [0.1, 0.1], radius: 0.3 }).unwrap();
        let solver = ElasticitySolver::new(&g, &cls, 2, ElasticMaterial::new(1.0, 0.3).unwrap()).unwrap();
        let a = AffineDisplacement { linear: [[0.05, -0.02], [0.01, 0.03]], offset: [0.02, -0.01] };
        let field = solver.solve(&BoundaryDisplacement { hole: a, outer: a }).unwrap();
        for &n in &cls.active_nodes(&g, 2) {
            let e = a.eval(g.node_coord(2, n));
            assert!((field.nodal()[n][0] - e[0]).abs() < 1e-12 && (field.nodal()[n][1] - e[1]).abs() < 1e-12);
        }
    }
}
