use std::sync::OnceLock;

use proptest::prelude::*;
use romcut::deformation::{
    hole_boundary_displacement, jacobian_bounds, lame_coefficients, pullback, singular_values_2x2, AffineDisplacement, BoundaryDisplacement, ElasticMaterial,
    ElasticitySolver, HoleMotion,
};
use romcut::geometry::{classify_cells, BoundaryTag, BackgroundGrid, GeometryQuadrature, LevelSet};
use romcut::pipeline::{Config, Geometry};
use romcut::RomError;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn lame_coefficients_by_direct_evaluation() {
    let (l, g) = lame_coefficients(1.0, 0.3).unwrap();
    assert!(close(l, 0.576923, 1e-6) && close(g, 0.384615, 1e-6));
    let (l, _) = lame_coefficients(2.6, 0.3).unwrap();
    assert!(close(l, 1.5, 1e-14));
    assert!(matches!(lame_coefficients(1.0, 0.5), Err(RomError::IncompressibleLimit(_))));
    assert!(ElasticMaterial::new(1.0, 0.3).unwrap().with_stiffening(-1.0).is_err());
}

#[test]
fn hole_map_moves_and_scales_the_circle() {
    let d = HoleMotion::DiagonalCenterRadius.hole_displacement(&[0.6, 0.15], &[0.5, 0.12]).unwrap();
    let u = d.eval([0.62, 0.5]);
    assert!(close(u[0], 0.13, 1e-14) && close(u[1], 0.10, 1e-14));
    assert!(close(0.62 + u[0], 0.75, 1e-14) && close(0.5 + u[1], 0.60, 1e-14));
    for k in 0..16 {
        let t = k as f64 * 0.4;
        let x = [0.5 + 0.12 * t.cos(), 0.5 + 0.12 * t.sin()];
        let u = d.eval(x);
        assert!(close(x[0] + u[0], 0.6 + 0.15 * t.cos(), 1e-14));
        assert!(close(x[1] + u[1], 0.6 + 0.15 * t.sin(), 1e-14));
    }
}

#[test]
fn dilation_pullback_and_singular_values() {
    let a = 1.7;
    let j = [[a, 0.0], [0.0, a]];
    let p = pullback(j, [0.6, 0.8]);
    assert!(close(p.det, a * a, 1e-14));
    assert!(close(p.surface_scale, a, 1e-14));
    let g = p.gradient([2.0, -1.0]);
    assert!(close(g[0], 2.0 / a, 1e-14) && close(g[1], -1.0 / a, 1e-14));
    let (s1, s2) = singular_values_2x2(j);
    assert!(close(s1, a, 1e-14) && close(s2, a, 1e-14));
}

fn solver_on(grid: &BackgroundGrid, center: [f64; 2], radius: f64, chi: f64) -> ElasticitySolver {
    let cls = classify_cells(grid, &LevelSet::BallHole { center, radius }).unwrap();
    ElasticitySolver::new(grid, &cls, 2, ElasticMaterial::new(1.0, 0.3).unwrap().with_stiffening(chi).unwrap()).unwrap()
}

#[test]
fn homogeneous_material_passes_the_patch_test() {
    let grid = BackgroundGrid::new([0.0, 0.0], [1.0, 1.0], [10, 10]).unwrap();
    let a = AffineDisplacement { linear: [[0.05, -0.02], [0.03, 0.01]], offset: [0.01, -0.02] };
    let cls = classify_cells(&grid, &LevelSet::BallHole { center: [0.5, 0.5], radius: 0.2 }).unwrap();
    let def = solver_on(&grid, [0.5, 0.5], 0.2, 0.0).solve(&BoundaryDisplacement { hole: a, outer: a }).unwrap();
    for n in cls.active_nodes(&grid, 2) {
        let v = def.nodal()[n];
        let e = a.eval(grid.node_coord(2, n));
        assert!(close(v[0], e[0], 1e-12) && close(v[1], e[1], 1e-12), "node {n}");
    }
}

#[test]
fn discrete_hole_boundary_lands_on_target_circle() {
    let grid = BackgroundGrid::new([0.0, 0.0], [1.0, 1.0], [16, 16]).unwrap();
    let solver = solver_on(&grid, [0.5, 0.5], 0.12, 1.0);
    let bc = hole_boundary_displacement(HoleMotion::DiagonalCenterRadius, &[0.6, 0.15], &[0.5, 0.12]).unwrap();
    let def = solver.solve(&bc).unwrap();
    let cls = classify_cells(&grid, &LevelSet::BallHole { center: [0.5, 0.5], radius: 0.12 }).unwrap();
    let quad = GeometryQuadrature::build(&grid, &cls, &LevelSet::BallHole { center: [0.5, 0.5], radius: 0.12 }, 3).unwrap();
    for cq in &quad.cells {
        for s in cq.surface.iter().filter(|s| s.tag == BoundaryTag::Interface) {
            let y = def.map_point(cq.cell, s.local);
            let x = grid.to_global(cq.cell, s.local);
            let expected = 1.25 * ((x[0] - 0.5).hypot(x[1] - 0.5));
            assert!(close((y[0] - 0.6).hypot(y[1] - 0.6), expected, 1e-10));
        }
    }
    for k in 0..64 {
        let t = std::f64::consts::TAU * k as f64 / 64.0;
        let x = [0.5 + 0.12 * t.cos(), 0.5 + 0.12 * t.sin()];
        let c = grid.cell_index((x[0] * 16.0) as usize, (x[1] * 16.0) as usize);
        let y = def.map_point(c, grid.to_local(c, x));
        assert!(close((y[0] - 0.6).hypot(y[1] - 0.6), 0.15, 1e-10));
    }
}

#[test]
fn jacobian_bounds_bracket_every_point() {
    let geo = poisson_geometry();
    let def = geo.modes.field(&[0.3, 0.27]).unwrap();
    let b = jacobian_bounds(&def, &geo.quadrature);
    for cq in &geo.quadrature.cells {
        for xi in &cq.bulk_local {
            let j = def.jacobian(cq.cell, *xi);
            // eigenvalues of JᵀJ
            let m = [
                j[0][0] * j[0][0] + j[1][0] * j[1][0],
                j[0][0] * j[0][1] + j[1][0] * j[1][1],
                j[0][1] * j[0][1] + j[1][1] * j[1][1],
            ];
            let tr = m[0] + m[2];
            let disc = ((m[0] - m[2]).powi(2) + 4.0 * m[1] * m[1]).sqrt();
            let (hi, lo) = (((tr + disc) / 2.0).sqrt(), ((tr - disc) / 2.0).max(0.0).sqrt());
            assert!(lo >= b.c1 * (1.0 - 1e-12) && hi <= b.cd * (1.0 + 1e-12));
        }
    }
}

#[test]
fn stiffening_changes_the_interior_extension() {
    let grid = BackgroundGrid::new([-1.0, -1.0], [1.0, 1.0], [12, 12]).unwrap();
    let bc = hole_boundary_displacement(HoleMotion::Center { radius: 0.3 }, &[0.1, 0.0], &[0.0, 0.0]).unwrap();
    let plain = solver_on(&grid, [0.0, 0.0], 0.3, 0.0).solve(&bc).unwrap();
    let stiff = solver_on(&grid, [0.0, 0.0], 0.3, 1.0).solve(&bc).unwrap();
    let diff = plain.nodal().iter().zip(stiff.nodal()).map(|(a, b)| (a[0] - b[0]).abs() + (a[1] - b[1]).abs()).fold(0.0, f64::max);
    assert!(diff > 1e-6);
}

fn poisson_geometry() -> &'static Geometry {
    static GEO: OnceLock<Geometry> = OnceLock::new();
    GEO.get_or_init(|| Geometry::new(&Config::poisson_benchmark()).unwrap())
}

fn stokes_geometry() -> &'static Geometry {
    static GEO: OnceLock<Geometry> = OnceLock::new();
    GEO.get_or_init(|| Geometry::new(&Config::stokes_benchmark()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn poisson_box_maps_are_bijective(t1 in 0.0f64..=1.0, t2 in 0.0f64..=1.0) {
        let cfg = Config::poisson_benchmark();
        let mu = [cfg.param_lo[0] + t1 * (cfg.param_hi[0] - cfg.param_lo[0]), cfg.param_lo[1] + t2 * (cfg.param_hi[1] - cfg.param_lo[1])];
        prop_assert!(poisson_geometry().deformation(&mu).is_ok());
    }

    #[test]
    fn stokes_box_maps_are_bijective(t1 in 0.0f64..=1.0, t2 in 0.0f64..=1.0) {
        let cfg = Config::stokes_benchmark();
        let mu = [cfg.param_lo[0] + t1 * (cfg.param_hi[0] - cfg.param_lo[0]), cfg.param_lo[1] + t2 * (cfg.param_hi[1] - cfg.param_lo[1])];
        prop_assert!(stokes_geometry().deformation(&mu).is_ok());
    }

    #[test]
    fn superposition_is_linear_in_the_hole_coefficients(a in -0.05f64..0.05, b in -0.05f64..0.05) {
        let geo = stokes_geometry();
        let f1 = geo.modes.field(&[0.625 + a, 0.625]).unwrap();
        let f2 = geo.modes.field(&[0.625, 0.625 + b]).unwrap();
        let f12 = geo.modes.field(&[0.625 + a, 0.625 + b]).unwrap();
        for ((x, y), z) in f1.nodal().iter().zip(f2.nodal()).zip(f12.nodal()) {
            prop_assert!((x[0] + y[0] - z[0]).abs() < 1e-12 && (x[1] + y[1] - z[1]).abs() < 1e-12);
        }
    }
}
