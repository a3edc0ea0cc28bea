use std::sync::{Arc, OnceLock};

use faer::linalg::triangular_solve::solve_lower_triangular_in_place;
use faer::{Mat, Par, Side as EigSide};
use romcut::deformation::jacobian_bounds;
use romcut::fem::{assemble_h1_norm, assemble_poisson, default_eta, FeSpace, HarmonicExtension, MatrixAssembler, PoissonData, SpaceFlavor};
use romcut::geometry::{aggregate, classify_cells, BackgroundGrid, BoundaryTag, GeometryQuadrature, LevelSet, Side};
use romcut::linalg::{solve_sparse, CholeskyFactor, SparseLu, TripletBuilder};
use romcut::pipeline::{poisson_data, Benchmark, Config, Physics};

fn ball(center: [f64; 2], radius: f64) -> LevelSet {
    LevelSet::BallHole { center, radius }
}

fn all_dirichlet() -> Vec<BoundaryTag> {
    Side::all().iter().map(|s| BoundaryTag::Face(*s)).chain([BoundaryTag::Interface]).collect()
}

struct Problem {
    grid: BackgroundGrid,
    space: FeSpace,
    asm: MatrixAssembler,
    quad: GeometryQuadrature,
}

fn problem(n: usize, p: usize, ls: &LevelSet) -> Problem {
    let grid = BackgroundGrid::new([0.0, 0.0], [1.0, 1.0], [n, n]).unwrap();
    let cls = classify_cells(&grid, ls).unwrap();
    let agg = aggregate(&cls, &grid, p).unwrap();
    let space = FeSpace::new(&grid, &cls, Some(&agg), p, 1, SpaceFlavor::Aggregated).unwrap();
    let asm = MatrixAssembler::new(&space, &space).unwrap();
    let quad = GeometryQuadrature::build(&grid, &cls, ls, p + 2).unwrap();
    Problem { grid, space, asm, quad }
}

#[test]
fn free_dofs_are_the_internal_nodes() {
    let ls = ball([0.5, 0.5], 0.3);
    let pb = problem(4, 1, &ls);
    let cls = classify_cells(&pb.grid, &ls).unwrap();
    let internal = cls.internal_nodes(&pb.grid, 1);
    assert_eq!(pb.space.n_dofs(), internal.len());
    assert_eq!(pb.space.free_nodes(), internal.as_slice());
}

#[test]
fn quadratic_solution_is_exact_on_a_cut_domain() {
    let ls = ball([0.47, 0.52], 0.23);
    let pb = problem(8, 2, &ls);
    let data = PoissonData {
        forcing: Arc::new(|_| -4.0),
        dirichlet_value: Arc::new(|x| x[0] * x[0] + x[1] * x[1]),
        neumann_value: Arc::new(|_| 0.0),
        dirichlet_tags: all_dirichlet(),
    };
    let sys = assemble_poisson(&pb.space, &pb.asm, &pb.quad, None, &data, default_eta(2)).unwrap();
    let u = solve_sparse(&sys.matrix, &sys.rhs).unwrap();
    let exact = pb.space.interpolate(|x| vec![x[0] * x[0] + x[1] * x[1]]);
    let err = u.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-9, "{err}");
}

/// Broken H¹ seminorm error against `grad`.
fn h1_error(pb: &Problem, u: &[f64], grad: impl Fn([f64; 2]) -> [f64; 2]) -> f64 {
    let s = pb.grid.spacing();
    let basis = pb.space.basis();
    let mut err = 0.0;
    for (pos, &c) in pb.space.cells().iter().enumerate() {
        let local = pb.space.local_values(pos, u);
        let cq = pb.quad.cell(c).unwrap();
        for (xi, w) in cq.bulk_local.iter().zip(&cq.bulk_weights) {
            let g = basis.gradients(*xi);
            let mut gh = [0.0; 2];
            for (v, d) in local.iter().zip(&g) {
                gh[0] += v * d[0] / s[0];
                gh[1] += v * d[1] / s[1];
            }
            let ge = grad(pb.grid.to_global(c, *xi));
            err += w * ((gh[0] - ge[0]).powi(2) + (gh[1] - ge[1]).powi(2));
        }
    }
    err.sqrt()
}

#[test]
fn energy_error_converges_at_the_optimal_rate() {
    use std::f64::consts::PI;
    let ls = ball([0.513, 0.487], 0.21);
    let u = |x: [f64; 2]| (PI * x[0]).sin() * (PI * x[1]).cos() + x[0] * x[1];
    let grad = |x: [f64; 2]| [PI * (PI * x[0]).cos() * (PI * x[1]).cos() + x[1], -PI * (PI * x[0]).sin() * (PI * x[1]).sin() + x[0]];
    for p in [1, 2] {
        let errors: Vec<f64> = [5, 10, 20]
            .iter()
            .map(|&n| {
                let pb = problem(n, p, &ls);
                let data = PoissonData {
                    forcing: Arc::new(|x| 2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).cos()),
                    dirichlet_value: Arc::new(u),
                    neumann_value: Arc::new(|_| 0.0),
                    dirichlet_tags: all_dirichlet(),
                };
                let sys = assemble_poisson(&pb.space, &pb.asm, &pb.quad, None, &data, default_eta(p)).unwrap();
                let uh = solve_sparse(&sys.matrix, &sys.rhs).unwrap();
                h1_error(&pb, &uh, grad)
            })
            .collect();
        let rate = (errors[1] / errors[2]).log2();
        assert!(rate >= p as f64 - 0.3, "p = {p}: {errors:?}");
    }
}

#[test]
fn matrix_pattern_is_shared_across_parameters() {
    let bench = poisson();
    let data = poisson_data();
    let pb = match &bench.physics {
        Physics::Poisson(p) => p,
        _ => unreachable!(),
    };
    let mut first = None;
    for mu in [[-0.1, 0.26], [0.3, 0.34], [0.1, 0.3]] {
        let def = bench.geometry.deformation(&mu).unwrap();
        let sys = assemble_poisson(&pb.space, &pb.asm, &bench.geometry.quadrature, Some(&def), &data, default_eta(bench.config.order)).unwrap();
        assert!(sys.matrix.is_symmetric(1e-12));
        CholeskyFactor::new(&sys.matrix).unwrap();
        let pat = sys.matrix.pattern().clone();
        match &first {
            None => first = Some(pat),
            Some(p0) => assert!(Arc::ptr_eq(p0, &pat)),
        }
    }
}

fn poisson() -> &'static Benchmark {
    static B: OnceLock<Benchmark> = OnceLock::new();
    B.get_or_init(|| Benchmark::new(&Config::poisson_benchmark()).unwrap())
}

#[test]
fn norm_ratio_spectrum_lies_within_the_jacobian_factors() {
    let bench = poisson();
    let x_ref = &bench.norms[0];
    let l = CholeskyFactor::new(x_ref).unwrap();
    for mu in [[-0.15, 0.25], [0.35, 0.35], [0.2, 0.28]] {
        let x_mu = &bench.parameter_norms(&mu).unwrap()[0];
        let jb = jacobian_bounds(&bench.geometry.deformation(&mu).unwrap(), &bench.geometry.quadrature);
        // L⁻¹ X_μ L⁻ᵀ
        let mut left = x_mu.to_dense();
        solve_lower_triangular_in_place(l.lower(), left.as_mut(), Par::Seq);
        let mut left = left.transpose().to_owned();
        solve_lower_triangular_in_place(l.lower(), left.as_mut(), Par::Seq);
        let sym = Mat::from_fn(left.nrows(), left.ncols(), |i, j| 0.5 * (left[(i, j)] + left[(j, i)]));
        let eig = sym.self_adjoint_eigen(EigSide::Lower).unwrap();
        let vals: Vec<f64> = eig.S().column_vector().iter().copied().collect();
        let (lo, hi) = vals.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(hi <= jb.upper_factor(1.0) * (1.0 + 1e-9), "{hi} vs {}", jb.upper_factor(1.0));
        assert!(1.0 / lo <= jb.lower_factor(1.0) * (1.0 + 1e-9), "{} vs {}", 1.0 / lo, jb.lower_factor(1.0));
    }
}

#[test]
fn tridiagonal_solve_matches_the_closed_form_inverse() {
    let n = 9;
    let mut tb = TripletBuilder::new(n);
    for i in 0..n {
        tb.push(i, i, 2.0);
        if i + 1 < n {
            tb.push(i, i + 1, -1.0);
            tb.push(i + 1, i, -1.0);
        }
    }
    let lu = SparseLu::new(tb.build().unwrap()).unwrap();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = lu.solve(&e).unwrap();
        for (i, v) in col.iter().enumerate() {
            let exact = ((i.min(j) + 1) * (n - i.max(j))) as f64 / (n + 1) as f64;
            assert!((v - exact).abs() < 1e-12);
        }
    }
}

#[test]
fn harmonic_extension_satisfies_the_exterior_equations() {
    let ls = ball([0.5, 0.5], 0.27);
    let pb = problem(10, 2, &ls);
    let cls = classify_cells(&pb.grid, &ls).unwrap();
    let ext = HarmonicExtension::new(&pb.grid, &cls, 2).unwrap();
    let u = pb.space.interpolate(|x| vec![(3.0 * x[0]).sin() + x[1] * x[1]]);
    let nodal = ext.extend(&pb.space, &u).unwrap();
    // Laplacian on the external cells through the full-box quadrature.
    let full = LevelSet::full_box();
    let quad = GeometryQuadrature::build(&pb.grid, &classify_cells(&pb.grid, &full).unwrap(), &full, 3).unwrap();
    let ext_space = FeSpace::new(&pb.grid, &cls, None, 2, 1, SpaceFlavor::External).unwrap();
    let asm = MatrixAssembler::new(&ext_space, &ext_space).unwrap();
    let lap = assemble_h1_norm(&ext_space, &asm, &quad, None, 0.0, &[]).unwrap();
    let active: std::collections::HashSet<usize> = cls.active_nodes(&pb.grid, 2).into_iter().collect();
    let values: Vec<f64> = ext_space.free_nodes().iter().map(|&n| nodal[n]).collect();
    let r = lap.mul_vec(&values);
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut checked = 0;
    for (k, &n) in ext_space.free_nodes().iter().enumerate() {
        if !active.contains(&n) {
            assert!(r[k].abs() <= 1e-10 * scale.max(1.0), "node {n}: {}", r[k]);
            checked += 1;
        }
    }
    assert_eq!(checked, ext.n_unknowns());
}
