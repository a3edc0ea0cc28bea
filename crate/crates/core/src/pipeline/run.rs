//! Offline, online, full-order and report drivers with their file outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use super::benchmark::{Benchmark, Physics};
use super::config::{Config, Method, Problem};
use super::metrics::{cell_fractions, cluster_spread, evaluate_online, offline_bounds, reduction_factor, BoundCheck, OnlineRecord};
use super::sampling::{halton, uniform};
use crate::error::{Result, RomError};
use crate::fem::export::{write_nodal_csv, write_vtu, PointField, VtuMesh};
use crate::geometry::BackgroundGrid;
use crate::localization::{offline, ClusterModel, FomSample, LocalizationSettings};
use crate::rom::{write_array, SnapshotKind, SnapshotSet, StoredArray};
use crate::saddle::coupling_constant_check;

/// Random pairs per cell in the coupling-constant diagnostic.
const COUPLING_SAMPLES: usize = 5;

/// Sequential dense kernels so that repeated runs are bit-identical.
pub fn init_numerics() {
    faer::set_global_parallelism(faer::Par::Seq);
}

pub fn training_parameters(cfg: &Config) -> Result<Vec<Vec<f64>>> {
    halton(cfg.n_offline, &cfg.param_lo, &cfg.param_hi, cfg.halton_skip)
}

pub fn online_parameters(cfg: &Config) -> Vec<Vec<f64>> {
    uniform(cfg.n_online, &cfg.param_lo, &cfg.param_hi, cfg.online_seed)
}

/// Runs `f` on a pool of `workers` threads (the global pool when zero).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| RomError::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Full-order snapshots at every parameter, computed concurrently.
pub fn compute_snapshots(bench: &Benchmark, params: &[Vec<f64>]) -> Result<Vec<FomSample>> {
    params.par_iter().map(|mu| bench.solve_fom(mu)).collect()
}

pub fn settings(cfg: &Config, eps: f64) -> LocalizationSettings {
    LocalizationSettings {
        n_clusters: cfg.n_clusters,
        n_clusters_hyper: cfg.n_clusters_hyper,
        eps,
        hyper_factor: cfg.hyper_factor,
        svd: cfg.svd_options(),
        kmeans_seed: cfg.kmeans_seed,
    }
}

/// One localized model per tolerance.
pub fn build_models(bench: &Benchmark, params: &[Vec<f64>], samples: &[FomSample]) -> Result<Vec<ClusterModel>> {
    bench.config.tolerances.iter().map(|&eps| offline(params, samples, bench, &settings(&bench.config, eps))).collect()
}

pub struct OfflineOutput {
    pub params: Vec<Vec<f64>>,
    pub samples: Vec<FomSample>,
    pub models: Vec<ClusterModel>,
    pub bounds: Vec<BoundCheck>,
    pub snapshot_seconds: f64,
    pub model_seconds: f64,
}

pub fn model_dir(cfg: &Config, eps: f64) -> PathBuf {
    cfg.output.join("model").join(format!("eps_{eps:e}"))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(p) = path.parent() {
        fs::create_dir_all(p)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn manifest_text(cfg: &Config, extra: &[(&str, String)]) -> String {
    let mut s = format!("config_hash = {}\nproblem = {}\nmethod = {}\n", cfg.model_hash(), problem_name(cfg.problem), method_name(cfg.method));
    for (k, v) in extra {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

fn problem_name(p: Problem) -> &'static str {
    match p {
        Problem::Poisson => "poisson",
        Problem::Stokes => "stokes",
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Tpod => "tpod",
        Method::Ttrb => "ttrb",
    }
}

fn save_snapshots(bench: &Benchmark, dir: &Path, params: &[Vec<f64>], samples: &[FomSample]) -> Result<()> {
    let names = bench.field_names();
    for f in 0..bench.layout.n_fields {
        let cols: Vec<Vec<f64>> = samples.iter().map(|s| s.fields[f].clone()).collect();
        SnapshotSet::new(SnapshotKind::Solution, &cols, params.to_vec())?.save(&dir.join(format!("solution_{}", names[f])))?;
    }
    for b in 0..bench.layout.lhs_blocks.len() {
        let cols: Vec<Vec<f64>> = samples.iter().map(|s| s.lhs[b].clone()).collect();
        SnapshotSet::new(SnapshotKind::LhsVectorized, &cols, params.to_vec())?.save(&dir.join(format!("lhs_{b}")))?;
    }
    for b in 0..bench.layout.rhs_blocks.len() {
        let cols: Vec<Vec<f64>> = samples.iter().map(|s| s.rhs[b].clone()).collect();
        SnapshotSet::new(SnapshotKind::Rhs, &cols, params.to_vec())?.save(&dir.join(format!("rhs_{b}")))?;
    }
    if bench.config.method == Method::Ttrb {
        let refs: Vec<&FomSample> = samples.iter().collect();
        let mut set = SnapshotSet::new(SnapshotKind::Solution, &bench.extended(&refs)?, params.to_vec())?;
        set.split_axes = Some(bench.geometry.grid.node_dims(bench.config.order).to_vec());
        set.save(&dir.join("solution_extended"))?;
    }
    Ok(())
}

/// Offline phase: snapshots, one localized model per tolerance, bound
/// replays and diagnostics, all written below `cfg.output`.
pub fn run_offline(cfg: &Config) -> Result<OfflineOutput> {
    init_numerics();
    let bench = Benchmark::new(cfg)?;
    let params = training_parameters(cfg)?;
    let t = Instant::now();
    let samples = with_workers(cfg.workers, || compute_snapshots(&bench, &params))??;
    let snapshot_seconds = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let models = with_workers(cfg.workers, || build_models(&bench, &params, &samples))??;
    let model_seconds = t.elapsed().as_secs_f64();
    let mut bounds = Vec::new();
    for m in &models {
        bounds.extend(with_workers(cfg.workers, || offline_bounds(&bench, m, &samples))??);
    }

    let out = &cfg.output;
    fs::create_dir_all(out)?;
    write_text(&out.join("config.txt"), &cfg.canonical())?;
    let tol: Vec<String> = cfg.tolerances.iter().map(|e| format!("{e:e}")).collect();
    write_text(&out.join("manifest.txt"), &manifest_text(cfg, &[("tolerances", tol.join(",")), ("n_offline", cfg.n_offline.to_string())]))?;
    save_snapshots(&bench, &out.join("snapshots"), &params, &samples)?;
    save_parameters(&out.join("snapshots").join("parameters"), &params)?;
    for m in &models {
        let dir = model_dir(cfg, m.eps);
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        m.save(&dir)?;
        write_text(&dir.join("manifest.txt"), &manifest_text(cfg, &[("eps", format!("{:e}", m.eps))]))?;
    }

    let mut csv = String::from("eps,cluster,field,members,error_sq,norm_sq,ratio,factor,holds\n");
    for b in &bounds {
        let _ = writeln!(csv, "{:e},{},{},{},{:e},{:e},{:e},{},{}", b.eps, b.cluster, b.field, b.members, b.error_sq, b.norm_sq, b.ratio(), b.factor, b.holds());
    }
    write_text(&out.join("bounds.csv"), &csv)?;

    let mut spread = String::from("eps,cluster,field,spread\n");
    let mut summary = String::from("eps,fom_dim,max_local_dim,reduction_factor,cell_fraction_mean,cell_fraction_max\n");
    let mut sigma = String::from("eps,cluster,n_u,n_p,sigma_min,sigma_min_without_supremizers\n");
    for m in &models {
        for (j, row) in cluster_spread(&bench, m, &samples).iter().enumerate() {
            for (f, s) in row.iter().enumerate() {
                let _ = writeln!(spread, "{:e},{j},{f},{s:e}", m.eps);
            }
        }
        let fr = cell_fractions(&bench, m);
        let mean = fr.iter().sum::<f64>() / fr.len() as f64;
        let max = fr.iter().copied().fold(0.0, f64::max);
        let _ = writeln!(summary, "{:e},{},{},{:e},{mean:e},{max:e}", m.eps, bench.fom_dim(), m.max_local_dim(), reduction_factor(&bench, m));
        if let Physics::Stokes(_) = bench.physics {
            for j in 0..m.n_clusters() {
                let members: Vec<&FomSample> = m.subspace_clustering.members(j).into_iter().map(|i| &samples[i]).collect();
                let s = bench.coupling_sigma_min(&m.bases[j])?.unwrap_or(f64::NAN);
                let plain = bench.coupling_sigma_min(&bench.plain_bases(&members, m.eps, &cfg.svd_options())?)?.unwrap_or(f64::NAN);
                let _ = writeln!(sigma, "{:e},{j},{},{},{s:e},{plain:e}", m.eps, m.bases[j][0].dim(), m.bases[j][1].dim());
            }
        }
    }
    write_text(&out.join("spread.csv"), &spread)?;
    write_text(&out.join("offline_summary.csv"), &summary)?;
    if cfg.problem == Problem::Stokes {
        write_text(&out.join("sigma_min.csv"), &sigma)?;
    }
    write_text(&out.join("offline_timings.csv"), &format!("stage,seconds\nsnapshots,{snapshot_seconds:e}\nmodels,{model_seconds:e}\n"))?;
    Ok(OfflineOutput { params, samples, models, bounds, snapshot_seconds, model_seconds })
}

fn read_manifest(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| RomError::Config(format!("{}: {e}; run the offline phase first", path.display())))?;
    Ok(text.lines().filter_map(|l| l.split_once('=')).map(|(k, v)| (k.trim().to_string(), v.trim().to_string())).collect())
}

/// Fails unless the model below `cfg.output` was built from `cfg`.
pub fn check_model_hash(cfg: &Config) -> Result<()> {
    let m = read_manifest(&cfg.output.join("manifest.txt"))?;
    let found = m.iter().find(|(k, _)| k == "config_hash").map(|(_, v)| v.clone()).unwrap_or_default();
    let expected = cfg.model_hash();
    if found != expected {
        return Err(RomError::ConfigMismatch { expected, found });
    }
    Ok(())
}

/// Q1 nodal values interpolated to the Q2 nodes of the same grid.
fn q1_to_q2(grid: &BackgroundGrid, q1: &[f64]) -> Vec<f64> {
    (0..grid.n_nodes(2))
        .map(|n| {
            let (i, j) = grid.node_ij(2, n);
            let is = if i % 2 == 0 { vec![i / 2] } else { vec![i / 2, i / 2 + 1] };
            let js = if j % 2 == 0 { vec![j / 2] } else { vec![j / 2, j / 2 + 1] };
            let mut s = 0.0;
            for &a in &is {
                for &b in &js {
                    s += q1[grid.node_index(1, a, b)];
                }
            }
            s / (is.len() * js.len()) as f64
        })
        .collect()
}

/// Writes VTK and CSV of full-order (and optionally reduced) fields on
/// the deformed active mesh.
pub fn export_fields(bench: &Benchmark, mu: &[f64], dir: &Path, stem: &str, fields: &[(&str, &[Vec<f64>])]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let grid = &bench.geometry.grid;
    let def = bench.geometry.deformation(mu)?;
    let cells = bench.cells();
    let mesh = VtuMesh::from_cells(grid, 2, cells, Some(&def))?;
    let spaces = bench.spaces();
    let mut out = Vec::new();
    for (name, values) in fields {
        for (f, v) in values.iter().enumerate() {
            let sp = spaces[f];
            let nodal = sp.nodal_values(v);
            let (values, components) = match (sp.order(), sp.components()) {
                (2, c) => (nodal, c),
                (1, 1) => (q1_to_q2(grid, &nodal), 1),
                (o, c) => return Err(RomError::InvalidArgument(format!("export of order {o} with {c} components"))),
            };
            out.push(PointField { name: format!("{name}_{}", bench.field_names()[f]), components, values });
        }
    }
    write_vtu(&dir.join(format!("{stem}.vtu")), &mesh, &out)?;
    let mut nodes: Vec<usize> = cells.iter().flat_map(|&c| grid.cell_nodes(2, c)).collect();
    nodes.sort_unstable();
    nodes.dedup();
    write_nodal_csv(&dir.join(format!("{stem}.csv")), &mesh.points, &out, &nodes)
}

/// Full-order solve at `mu` (the reference parameter when `None`).
pub fn run_fom(cfg: &Config, mu: Option<Vec<f64>>) -> Result<FomSample> {
    init_numerics();
    let bench = Benchmark::new(cfg)?;
    let mu = mu.unwrap_or_else(|| cfg.mu_ref.clone());
    if mu.len() != 2 {
        return Err(RomError::Config(format!("expected two parameter values, got {}", mu.len())));
    }
    let s = bench.solve_fom(&mu)?;
    export_fields(&bench, &mu, &cfg.output.join("fom"), "fom", &[("fom", &s.fields)])?;
    Ok(s)
}

pub struct OnlineOutput {
    pub mus: Vec<Vec<f64>>,
    /// `(eps, records)` per tolerance.
    pub results: Vec<(f64, Vec<OnlineRecord>)>,
    pub report: String,
}

/// Online phase against the stored models: reference solves, reduced
/// solves, metrics, fields and the report.
pub fn run_online(cfg: &Config, mu: Option<Vec<f64>>) -> Result<OnlineOutput> {
    init_numerics();
    check_model_hash(cfg)?;
    let bench = Benchmark::new(cfg)?;
    let mus = match mu {
        Some(m) if m.len() == 2 => vec![m],
        Some(m) => return Err(RomError::Config(format!("expected two parameter values, got {}", m.len()))),
        None => online_parameters(cfg),
    };
    let names = bench.field_names();
    let mut metrics = String::from("eps,sample,mu_1,mu_2,subspace_cluster,hyper_cluster,rom_dim");
    let mut timings = String::from("eps,sample,fom_seconds,rom_seconds,speedup,fom_peak_bytes,rom_peak_bytes\n");
    for n in names {
        let _ = write!(metrics, ",error_{n}");
    }
    metrics.push('\n');
    let mut results = Vec::new();
    for &eps in &cfg.tolerances {
        let model = ClusterModel::load(&model_dir(cfg, eps), &bench.layout)?;
        let records = evaluate_online(&bench, &model, &mus)?;
        for (i, r) in records.iter().enumerate() {
            let _ = write!(metrics, "{eps:e},{i},{:e},{:e},{},{},{}", r.mu[0], r.mu[1], r.subspace_cluster, r.hyper_cluster, r.rom_dim);
            for e in &r.errors {
                let _ = write!(metrics, ",{e:e}");
            }
            metrics.push('\n');
            let _ = writeln!(
                timings,
                "{eps:e},{i},{:e},{:e},{:e},{},{}",
                r.fom_seconds,
                r.rom_seconds,
                r.fom_seconds / r.rom_seconds.max(f64::MIN_POSITIVE),
                r.fom_peak_bytes,
                r.rom_peak_bytes
            );
        }
        if let Some(first) = mus.first() {
            let fom = bench.solve_fom(first)?;
            let rom = crate::localization::online(&model, &bench, first)?.reconstruct(&model);
            let err: Vec<Vec<f64>> = rom.iter().zip(&fom.fields).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect()).collect();
            export_fields(&bench, first, &cfg.output.join("online"), &format!("eps_{eps:e}"), &[("fom", &fom.fields), ("rom", &rom), ("error", &err)])?;
        }
        results.push((eps, records));
    }
    write_text(&cfg.output.join("metrics.csv"), &metrics)?;
    write_text(&cfg.output.join("timings.csv"), &timings)?;
    if let Physics::Stokes(s) = &bench.physics {
        let mut csv = String::from("sample,mu_1,mu_2,cells,c_k_min,c_k_max,c_k_mean,max_deviation\n");
        for (i, mu) in mus.iter().enumerate() {
            let def = bench.geometry.deformation(mu)?;
            let chk = coupling_constant_check(&s.spaces, &bench.geometry.quadrature, &def, COUPLING_SAMPLES, cfg.online_seed.wrapping_add(i as u64))?;
            let _ = writeln!(csv, "{i},{:e},{:e},{},{:e},{:e},{:e},{:e}", mu[0], mu[1], chk.cells.len(), chk.min(), chk.max(), chk.mean(), chk.max_deviation());
        }
        write_text(&cfg.output.join("coupling.csv"), &csv)?;
    }
    let report = report(cfg)?;
    Ok(OnlineOutput { mus, results, report })
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = fs::read_to_string(path).map_err(|e| RomError::Config(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    let head: Vec<String> = lines.next().unwrap_or("").split(',').map(str::to_string).collect();
    Ok((head, lines.filter(|l| !l.is_empty()).map(|l| l.split(',').map(str::to_string).collect()).collect()))
}

fn column_of(head: &[String], name: &str) -> Result<usize> {
    head.iter().position(|h| h == name).ok_or_else(|| RomError::Store(format!("missing column '{name}'")))
}

fn num(s: &str) -> Result<f64> {
    s.parse().map_err(|_| RomError::Store(format!("invalid number '{s}'")))
}

/// Per-tolerance table built from the offline summary and the online
/// metrics; also written to `report.txt`.
pub fn report(cfg: &Config) -> Result<String> {
    let out = &cfg.output;
    let (sh, srows) = read_csv(&out.join("offline_summary.csv"))?;
    let (mh, mrows) = read_csv(&out.join("metrics.csv"))?;
    let (th, trows) = read_csv(&out.join("timings.csv"))?;
    let err_cols: Vec<(String, usize)> = mh.iter().enumerate().filter_map(|(i, h)| h.strip_prefix("error_").map(|n| (n.to_string(), i))).collect();
    let mut s = format!("problem = {}, method = {}, config_hash = {}\n", problem_name(cfg.problem), method_name(cfg.method), cfg.model_hash());
    let mut head = format!("{:>8}", "eps");
    for (n, _) in &err_cols {
        let _ = write!(head, " {:>12}", format!("E_{n}/eps"));
    }
    let _ = writeln!(
        s,
        "{head} {:>8} {:>8} {:>10} {:>12} {:>12} {:>9} {:>14} {:>14}",
        "RF", "max_n", "cells_max", "fom_s", "rom_s", "SU-WT", "fom_bytes", "rom_bytes"
    );
    let (se, srf, sn, scf) = (column_of(&sh, "eps")?, column_of(&sh, "reduction_factor")?, column_of(&sh, "max_local_dim")?, column_of(&sh, "cell_fraction_max")?);
    let (me, te) = (column_of(&mh, "eps")?, column_of(&th, "eps")?);
    let (tf, tr, tfb, trb) = (column_of(&th, "fom_seconds")?, column_of(&th, "rom_seconds")?, column_of(&th, "fom_peak_bytes")?, column_of(&th, "rom_peak_bytes")?);
    for row in &srows {
        let eps = num(&row[se])?;
        let m: Vec<&Vec<String>> = mrows.iter().filter(|r| r[me] == row[se]).collect();
        let t: Vec<&Vec<String>> = trows.iter().filter(|r| r[te] == row[se]).collect();
        if m.is_empty() {
            continue;
        }
        let mean = |rows: &[&Vec<String>], c: usize| -> Result<f64> { Ok(rows.iter().map(|r| num(&r[c])).collect::<Result<Vec<_>>>()?.iter().sum::<f64>() / rows.len().max(1) as f64) };
        let mut line = format!("{eps:>8.0e}");
        for (_, c) in &err_cols {
            let _ = write!(line, " {:>12.4}", mean(&m, *c)? / eps);
        }
        let (fs_, rs_) = (mean(&t, tf)?, mean(&t, tr)?);
        let _ = writeln!(
            s,
            "{line} {:>8.1} {:>8} {:>10.3} {:>12.3e} {:>12.3e} {:>9.2} {:>14.0} {:>14.0}",
            num(&row[srf])?,
            row[sn],
            num(&row[scf])?,
            fs_,
            rs_,
            fs_ / rs_.max(f64::MIN_POSITIVE),
            mean(&t, tfb)?,
            mean(&t, trb)?
        );
    }
    s.push_str("bytes are peak heap allocation during each solve (memory proxy; zero when the counting allocator is not installed)\n");
    write_text(&out.join("report.txt"), &s)?;
    Ok(s)
}

/// Stores an arbitrary list of parameters in the snapshot-store format.
pub fn save_parameters(dir: &Path, params: &[Vec<f64>]) -> Result<()> {
    let flat: Vec<f64> = params.concat();
    let mut a = StoredArray::from_vector("parameters", &flat);
    a.shape = vec![params.first().map_or(0, |p| p.len()), params.len()];
    write_array(dir, &a)
}
