use faer::Mat;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use romcut::linalg::{from_columns, CholeskyFactor, CsrMatrix, DMat};
use romcut::pipeline::projection_error;
use romcut::rom::{
    combine_matrices, combine_vectors, energy_rank, greedy_indices, mdeim, online_coefficients, project_matrix_components, project_vector_components, read_array, rsvd,
    tpod, ttsvd, ttsvd_weighted, write_array, HyperReduction, StoredArray, SvdOptions,
};

fn gaussian(rows: usize, cols: usize, seed: u64) -> DMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Mat::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

/// Matrix with singular values `decay^k` and random singular vectors.
fn decaying(rows: usize, cols: usize, decay: f64, seed: u64) -> DMat {
    let q1 = gaussian(rows, cols, seed).qr().compute_thin_Q();
    let q2 = gaussian(cols, cols, seed + 1).qr().compute_thin_Q();
    let s = Mat::from_fn(cols, cols, |i, j| if i == j { decay.powi(i as i32) } else { 0.0 });
    &q1 * &s * q2.transpose()
}

fn max_abs(m: &DMat) -> f64 {
    (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| (i, j))).fold(0.0, |a, (i, j)| a.max(m[(i, j)].abs()))
}

fn spd(n: usize) -> CsrMatrix {
    CsrMatrix::from_dense(Mat::from_fn(n, n, |i, j| if i == j { 2.5 + (i % 3) as f64 } else if i.abs_diff(j) == 1 { -0.7 } else { 0.0 }).as_ref())
}

#[test]
fn energy_rank_of_a_short_spectrum() {
    assert_eq!(energy_rank(&[10.0, 1.0, 0.1], 0.05), 2);
    assert_eq!(energy_rank(&[10.0, 1.0, 0.1], 0.5), 1);
    assert_eq!(energy_rank(&[0.0, 0.0], 0.1), 0);
}

#[test]
fn randomized_rank_matches_the_exact_rank() {
    let m = decaying(300, 80, 0.7, 3);
    for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
        let exact = rsvd(m.as_ref(), eps, &SvdOptions::deterministic()).unwrap().rank();
        let fast = rsvd(m.as_ref(), eps, &SvdOptions { seed: 11, ..SvdOptions::default() }).unwrap();
        assert!(fast.rank().abs_diff(exact) <= 1, "eps {eps}: {} vs {exact}", fast.rank());
        let err = &m - fast.reconstruct();
        assert!(romcut::linalg::frobenius_sq(err.as_ref()) <= eps * eps * romcut::linalg::frobenius_sq(m.as_ref()) * (1.0 + 1e-10));
    }
}

#[test]
fn euclidean_pod_spans_the_leading_singular_vectors() {
    let m = decaying(40, 12, 0.5, 7);
    let b = tpod(m.as_ref(), None, 1e-2, &SvdOptions::deterministic()).unwrap();
    let svd = m.thin_svd().unwrap();
    let u = svd.U().subcols(0, b.dim()).to_owned();
    let p1 = &b.basis * b.basis.transpose();
    let p2 = &u * u.transpose();
    assert!(max_abs(&(&p1 - &p2)) < 1e-10);
    for (k, s) in b.singular_values.iter().enumerate() {
        assert!((s - svd.S().column_vector()[k]).abs() < 1e-12);
    }
}

#[test]
fn rank_three_snapshots_are_reproduced() {
    let n = 25;
    let x = spd(n);
    let h = CholeskyFactor::new(&x).unwrap();
    let m = gaussian(n, 3, 1) * gaussian(3, 10, 2);
    let b = tpod(m.as_ref(), Some(&h), 1e-8, &SvdOptions::deterministic()).unwrap();
    assert_eq!(b.dim(), 3);
    let gram = b.basis.transpose() * x.mul_dense(b.basis.as_ref());
    assert!(max_abs(&(gram - Mat::<f64>::identity(3, 3))) < 1e-12);
    let rec = &b.basis * (b.basis.transpose() * x.mul_dense(m.as_ref()));
    assert!(max_abs(&(&rec - &m)) < 1e-10 * max_abs(&m));
}

#[test]
fn tensor_train_meets_the_energy_bound_on_a_random_tensor() {
    let dims = [8, 8, 20];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let t: Vec<f64> = (0..dims.iter().product::<usize>()).map(|_| StandardNormal.sample(&mut rng)).collect();
    for eps in [0.3, 0.1, 1e-2] {
        let tt = ttsvd(&t, &dims, eps, &SvdOptions::deterministic()).unwrap();
        let phi = tt.contract();
        let u = Mat::from_fn(64, 20, |i, j| t[i + 64 * j]);
        let gram = phi.transpose() * &phi;
        assert!(max_abs(&(gram - Mat::<f64>::identity(phi.ncols(), phi.ncols()))) < 1e-10);
        let r = &u - &phi * (phi.transpose() * &u);
        let e = romcut::linalg::frobenius_sq(r.as_ref());
        assert!(e <= eps * eps * romcut::linalg::frobenius_sq(u.as_ref()) * (1.0 + 1e-10), "eps {eps}");
    }
}

#[test]
fn weighted_tensor_train_is_orthonormal_and_bounded() {
    let dims = [6, 7, 15];
    let rows = 42;
    let x = spd(rows);
    let smooth = decaying(rows, 15, 0.6, 9);
    let t: Vec<f64> = (0..15).flat_map(|j| (0..rows).map(move |i| (i, j))).map(|(i, j)| smooth[(i, j)]).collect();
    for eps in [0.2, 1e-2, 1e-3] {
        let tt = ttsvd_weighted(&t, &dims, &x, eps, &SvdOptions::deterministic()).unwrap();
        let phi = tt.contract();
        let gram = phi.transpose() * x.mul_dense(phi.as_ref());
        assert!(max_abs(&(gram - Mat::<f64>::identity(phi.ncols(), phi.ncols()))) < 1e-9);
        let cols: Vec<Vec<f64>> = (0..15).map(|j| t[j * rows..(j + 1) * rows].to_vec()).collect();
        let (err, total) = projection_error(&phi, &x, &cols);
        assert!(err <= 2.0 * eps * eps * total * (1.0 + 1e-9), "eps {eps}: {err} vs {total}");
    }
}

#[test]
fn projected_components_combine_to_the_projected_operator() {
    let n = 12;
    let band = |i: usize, j: usize| i.abs_diff(j) <= 1;
    let a0 = Mat::from_fn(n, n, |i, j| if band(i, j) { 1.0 + (i + 2 * j) as f64 * 0.1 } else { 0.0 });
    let a1 = Mat::from_fn(n, n, |i, j| if band(i, j) { ((i * j) as f64).cos() } else { 0.0 });
    let c0 = CsrMatrix::from_dense(a0.as_ref());
    let pattern = c0.pattern().clone();
    let vals = |m: &DMat| -> Vec<f64> { (0..pattern.nnz()).map(|k| { let (r, c) = pattern.entry(k); m[(r, c)] }).collect() };
    let basis = from_columns(pattern.nnz(), &[vals(&a0), vals(&a1)]);
    let indices = greedy_indices(basis.as_ref()).unwrap();
    let hr = HyperReduction { basis, indices, cells: Vec::new() };
    let phi = gaussian(n, 4, 4);
    let comps = project_matrix_components(phi.as_ref(), phi.as_ref(), &hr, &pattern).unwrap();
    let full = &a0 + Mat::from_fn(n, n, |i, j| -1.5 * a1[(i, j)]);
    let theta = online_coefficients(&hr, &hr.sample(&vals(&full))).unwrap();
    let reduced = combine_matrices(&comps, &theta).unwrap();
    let expected = phi.transpose() * &full * &phi;
    assert!(max_abs(&(&reduced - &expected)) < 1e-11);

    let f = from_columns(n, &[(0..n).map(|i| i as f64).collect(), (0..n).map(|i| 1.0 / (1.0 + i as f64)).collect()]);
    let hv = HyperReduction { indices: greedy_indices(f.as_ref()).unwrap(), basis: f.clone(), cells: Vec::new() };
    let target: Vec<f64> = (0..n).map(|i| 2.0 * f[(i, 0)] + 3.0 * f[(i, 1)]).collect();
    let th = online_coefficients(&hv, &hv.sample(&target)).unwrap();
    let got = combine_vectors(&project_vector_components(phi.as_ref(), &hv), &th).unwrap();
    for k in 0..4 {
        let e: f64 = (0..n).map(|i| phi[(i, k)] * target[i]).sum();
        assert!((got[k] - e).abs() < 1e-10);
    }
}

#[test]
fn stored_arrays_round_trip_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let m = gaussian(7, 3, 8);
    let mut a = StoredArray::from_matrix("basis", m.as_ref()).with_meta("eps", 1e-3).with_meta("cluster", 2);
    a.parameters = vec![vec![0.25, -1e-300], vec![f64::MIN_POSITIVE, 3.0]];
    write_array(dir.path(), &a).unwrap();
    let b = read_array(dir.path()).unwrap();
    assert_eq!(a.kind, b.kind);
    assert_eq!(a.shape, b.shape);
    assert_eq!(a.meta, b.meta);
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.data), bits(&b.data));
    for (p, q) in a.parameters.iter().zip(&b.parameters) {
        assert_eq!(bits(p), bits(q));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mdeim_recovers_a_two_dimensional_family(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..1000) {
        let n = 40;
        let g = gaussian(n, 2, seed);
        let snaps = Mat::from_fn(n, 9, |i, j| g[(i, 0)] * (1.0 + j as f64) + g[(i, 1)] * (j as f64 * 0.37).sin());
        let hr = mdeim(snaps.as_ref(), 1e-10, &SvdOptions::deterministic()).unwrap();
        prop_assert_eq!(hr.n_terms(), 2, "{:?}", rsvd(snaps.as_ref(), 1e-10, &SvdOptions::deterministic()).unwrap().s);
        let target: Vec<f64> = (0..n).map(|i| a * g[(i, 0)] + b * g[(i, 1)]).collect();
        let rec = hr.reconstruct(&online_coefficients(&hr, &hr.sample(&target)).unwrap());
        let scale = target.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (r, t) in rec.iter().zip(&target) {
            prop_assert!((r - t).abs() < 1e-10 * scale);
        }
    }

    #[test]
    fn interpolant_matches_at_the_magic_points(v in proptest::collection::vec(-5.0f64..5.0, 30), seed in 0u64..1000) {
        let snaps = gaussian(30, 5, seed);
        let hr = mdeim(snaps.as_ref(), 1e-12, &SvdOptions::deterministic()).unwrap();
        let rec = hr.reconstruct(&online_coefficients(&hr, &hr.sample(&v)).unwrap());
        for &i in &hr.indices {
            prop_assert!((rec[i] - v[i]).abs() < 1e-9 * (1.0 + v[i].abs()));
        }
    }
}
