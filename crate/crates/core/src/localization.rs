//! Parameter-space clustering and the local offline/online algorithms.
//!
//! Two independent k-means partitions of the training parameters are
//! built: one selects the local reduced subspace, the other the local
//! hyper-reduction. Every pair of clusters gets its own projected affine
//! components.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Result, RomError};
use crate::linalg::{from_columns, DMat, SparsityPattern};
use crate::rom::project::reduced_solve;
use crate::rom::{
    combine_matrices, combine_vectors, mdeim, online_coefficients, project_matrix_components, project_vector_components, read_array, write_array,
    HyperReduction, ReducedBasis, StoredArray, SvdOptions,
};

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid; ties go to the lowest index.
pub fn nearest(centroids: &[Vec<f64>], x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, c) in centroids.iter().enumerate() {
        let d = dist2(c, x);
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub iterations: usize,
}

impl KMeans {
    /// Sum of squared distances to the assigned centroids.
    pub fn distortion(&self, points: &[Vec<f64>]) -> f64 {
        points.iter().zip(&self.assignments).map(|(p, &a)| dist2(p, &self.centroids[a])).sum()
    }

    pub fn members(&self, k: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] == k).collect()
    }

    pub fn n_clusters(&self) -> usize {
        self.centroids.len()
    }
}

/// k-means++ seeding.
pub fn kmeans_plus_plus_init(points: &[Vec<f64>], k: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if k == 0 {
        return Err(RomError::InvalidArgument("number of clusters must be positive".into()));
    }
    if k > points.len() {
        return Err(RomError::InvalidArgument(format!("{k} clusters for {} points", points.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![rng.gen_range(0..points.len())];
    while chosen.len() < k {
        let d: Vec<f64> = points.iter().map(|p| chosen.iter().map(|&c| dist2(p, &points[c])).fold(f64::INFINITY, f64::min)).collect();
        let total: f64 = d.iter().sum();
        let next = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = d.iter().rposition(|&v| v > 0.0).expect("positive weight");
            for (i, &v) in d.iter().enumerate() {
                acc += v;
                if acc > target && v > 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            (0..points.len()).find(|i| !chosen.contains(i)).expect("k <= number of points")
        };
        chosen.push(next);
    }
    Ok(chosen.into_iter().map(|c| points[c].clone()).collect())
}

/// Lloyd iterations from `init`; an empty cluster is re-seeded with the
/// point farthest from its centroid.
pub fn lloyd(points: &[Vec<f64>], init: Vec<Vec<f64>>, max_iters: usize) -> KMeans {
    let k = init.len();
    let dim = points.first().map_or(0, |p| p.len());
    let mut centroids = init;
    let mut assignments: Vec<usize> = points.iter().map(|p| nearest(&centroids, p)).collect();
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let mut far = 0;
                let mut far_d = -1.0;
                for (i, p) in points.iter().enumerate() {
                    let d = dist2(p, &centroids[assignments[i]]);
                    if d > far_d {
                        far_d = d;
                        far = i;
                    }
                }
                centroids[c] = points[far].clone();
                assignments[far] = c;
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(&centroids, p)).collect();
        if next == assignments {
            break;
        }
        assignments = next;
    }
    KMeans { centroids, assignments, iterations }
}

pub const KMEANS_MAX_ITERS: usize = 100;

pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeans> {
    let init = kmeans_plus_plus_init(points, k, seed)?;
    Ok(lloyd(points, init, KMEANS_MAX_ITERS))
}

/// Full-order data of one training parameter: solution fields, vectorized
/// operator blocks and right-hand-side blocks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FomSample {
    pub fields: Vec<Vec<f64>>,
    pub lhs: Vec<Vec<f64>>,
    pub rhs: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct LhsBlock {
    pub test_field: usize,
    pub trial_field: usize,
    pub pattern: Arc<SparsityPattern>,
}

/// Fields and operator blocks of a problem.
#[derive(Clone, Debug)]
pub struct ProblemLayout {
    pub n_fields: usize,
    pub lhs_blocks: Vec<LhsBlock>,
    pub rhs_blocks: Vec<usize>,
}

/// Problem-specific pieces of the offline phase.
pub trait OfflineProblem: Sync {
    fn layout(&self) -> &ProblemLayout;

    /// Local bases (one per field) from the snapshots of one cluster.
    fn build_bases(&self, samples: &[&FomSample], eps: f64, opts: &SvdOptions) -> Result<Vec<ReducedBasis>>;

    /// Cells needed to evaluate the sampled entries of an operator block.
    fn lhs_cells(&self, block: usize, indices: &[usize]) -> Vec<usize>;

    fn rhs_cells(&self, block: usize, indices: &[usize]) -> Vec<usize>;
}

/// Problem-specific pieces of the online phase.
pub trait OnlineProblem {
    /// Sampled entries of every operator and right-hand-side block,
    /// evaluated on the reduced integration domain of `hyper`.
    fn sample(&self, hyper: &HyperSet, mu: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)>;

    /// Solves the reduced system built from combined blocks; on
    /// singularity returns the condition estimate.
    fn solve_reduced(&self, lhs: &[DMat], rhs: &[Vec<f64>]) -> std::result::Result<Vec<f64>, f64>;
}

/// Hyper-reductions of every block for one hyper-reduction cluster.
#[derive(Clone, Debug)]
pub struct HyperSet {
    pub lhs: Vec<HyperReduction>,
    pub rhs: Vec<HyperReduction>,
}

impl HyperSet {
    /// Union of the reduced integration domains of all blocks.
    pub fn cells(&self) -> Vec<usize> {
        let mut c: Vec<usize> = self.lhs.iter().chain(&self.rhs).flat_map(|h| h.cells.iter().copied()).collect();
        c.sort_unstable();
        c.dedup();
        c
    }
}

#[derive(Clone, Debug, Default)]
pub struct ProjectedBlocks {
    pub lhs: Vec<Vec<DMat>>,
    pub rhs: Vec<Vec<Vec<f64>>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalizationSettings {
    pub n_clusters: usize,
    pub n_clusters_hyper: usize,
    pub eps: f64,
    /// Hyper-reduction tolerance as a fraction of `eps`.
    pub hyper_factor: f64,
    pub svd: SvdOptions,
    pub kmeans_seed: u64,
}

#[derive(Clone, Debug)]
pub struct ClusterModel {
    pub eps: f64,
    pub subspace_clustering: KMeans,
    pub hyper_clustering: KMeans,
    /// `bases[j][field]`.
    pub bases: Vec<Vec<ReducedBasis>>,
    pub hyper: Vec<HyperSet>,
    /// `projections[j][k]`.
    pub projections: Vec<Vec<ProjectedBlocks>>,
}

impl ClusterModel {
    pub fn n_clusters(&self) -> usize {
        self.bases.len()
    }

    pub fn n_clusters_hyper(&self) -> usize {
        self.hyper.len()
    }

    /// Total reduced dimension of cluster `j`.
    pub fn local_dim(&self, j: usize) -> usize {
        self.bases[j].iter().map(|b| b.dim()).sum()
    }

    pub fn max_local_dim(&self) -> usize {
        (0..self.n_clusters()).map(|j| self.local_dim(j)).max().unwrap_or(0)
    }
}

fn hyper_for(problem: &dyn OfflineProblem, samples: &[&FomSample], eps_hr: f64, opts: &SvdOptions) -> Result<HyperSet> {
    let layout = problem.layout();
    let mut lhs = Vec::with_capacity(layout.lhs_blocks.len());
    for b in 0..layout.lhs_blocks.len() {
        let cols: Vec<Vec<f64>> = samples.iter().map(|s| s.lhs[b].clone()).collect();
        let m = from_columns(cols[0].len(), &cols);
        let mut hr = mdeim(m.as_ref(), eps_hr, opts)?;
        hr.cells = problem.lhs_cells(b, &hr.indices);
        lhs.push(hr);
    }
    let mut rhs = Vec::with_capacity(layout.rhs_blocks.len());
    for b in 0..layout.rhs_blocks.len() {
        let cols: Vec<Vec<f64>> = samples.iter().map(|s| s.rhs[b].clone()).collect();
        let m = from_columns(cols[0].len(), &cols);
        let mut hr = mdeim(m.as_ref(), eps_hr, opts)?;
        hr.cells = problem.rhs_cells(b, &hr.indices);
        rhs.push(hr);
    }
    Ok(HyperSet { lhs, rhs })
}

/// Projects every block of `hyper` onto the bases of one subspace cluster.
pub fn project_blocks(layout: &ProblemLayout, bases: &[ReducedBasis], hyper: &HyperSet) -> Result<ProjectedBlocks> {
    let mut out = ProjectedBlocks::default();
    for (b, blk) in layout.lhs_blocks.iter().enumerate() {
        out.lhs.push(project_matrix_components(
            bases[blk.test_field].basis.as_ref(),
            bases[blk.trial_field].basis.as_ref(),
            &hyper.lhs[b],
            &blk.pattern,
        )?);
    }
    for (b, &f) in layout.rhs_blocks.iter().enumerate() {
        out.rhs.push(project_vector_components(bases[f].basis.as_ref(), &hyper.rhs[b]));
    }
    Ok(out)
}

/// Local offline phase on precomputed full-order samples.
pub fn offline(params: &[Vec<f64>], samples: &[FomSample], problem: &dyn OfflineProblem, s: &LocalizationSettings) -> Result<ClusterModel> {
    if params.len() != samples.len() {
        return Err(RomError::DimensionMismatch(format!("{} parameters, {} samples", params.len(), samples.len())));
    }
    if s.n_clusters > params.len() || s.n_clusters_hyper > params.len() {
        return Err(RomError::InvalidArgument(format!(
            "{} / {} clusters for {} training parameters",
            s.n_clusters,
            s.n_clusters_hyper,
            params.len()
        )));
    }
    let alpha = kmeans(params, s.n_clusters, s.kmeans_seed)?;
    let beta = kmeans(params, s.n_clusters_hyper, s.kmeans_seed.wrapping_add(1))?;
    let bases: Vec<Vec<ReducedBasis>> = (0..s.n_clusters)
        .into_par_iter()
        .map(|j| {
            let members: Vec<&FomSample> = alpha.members(j).into_iter().map(|i| &samples[i]).collect();
            problem.build_bases(&members, s.eps, &s.svd)
        })
        .collect::<Result<_>>()?;
    let eps_hr = s.eps * s.hyper_factor;
    let hyper: Vec<HyperSet> = (0..s.n_clusters_hyper)
        .into_par_iter()
        .map(|k| {
            let members: Vec<&FomSample> = beta.members(k).into_iter().map(|i| &samples[i]).collect();
            hyper_for(problem, &members, eps_hr, &s.svd)
        })
        .collect::<Result<_>>()?;
    let projections: Vec<Vec<ProjectedBlocks>> = (0..s.n_clusters)
        .into_par_iter()
        .map(|j| hyper.iter().map(|h| project_blocks(problem.layout(), &bases[j], h)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    Ok(ClusterModel { eps: s.eps, subspace_clustering: alpha, hyper_clustering: beta, bases, hyper, projections })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OnlineSolution {
    pub subspace_cluster: usize,
    pub hyper_cluster: usize,
    /// Reduced coefficients per field.
    pub coefficients: Vec<Vec<f64>>,
}

impl OnlineSolution {
    /// Full-order reconstruction `Φ_j u_n` per field.
    pub fn reconstruct(&self, model: &ClusterModel) -> Vec<Vec<f64>> {
        model.bases[self.subspace_cluster].iter().zip(&self.coefficients).map(|(b, c)| b.expand(c)).collect()
    }
}

/// Reduced solve for given clusters.
pub fn solve_with_clusters(model: &ClusterModel, problem: &dyn OnlineProblem, mu: &[f64], j: usize, k: usize) -> Result<OnlineSolution> {
    let hyper = &model.hyper[k];
    let (ls, rs) = problem.sample(hyper, mu)?;
    let proj = &model.projections[j][k];
    let mut lhs = Vec::with_capacity(ls.len());
    for (b, vals) in ls.iter().enumerate() {
        let theta = online_coefficients(&hyper.lhs[b], vals)?;
        lhs.push(combine_matrices(&proj.lhs[b], &theta)?);
    }
    let mut rhs = Vec::with_capacity(rs.len());
    for (b, vals) in rs.iter().enumerate() {
        let theta = online_coefficients(&hyper.rhs[b], vals)?;
        rhs.push(combine_vectors(&proj.rhs[b], &theta)?);
    }
    let x = problem.solve_reduced(&lhs, &rhs).map_err(|cond| RomError::SingularReduced { j, k, cond })?;
    let mut coefficients = Vec::with_capacity(model.bases[j].len());
    let mut off = 0;
    for b in &model.bases[j] {
        coefficients.push(x[off..off + b.dim()].to_vec());
        off += b.dim();
    }
    Ok(OnlineSolution { subspace_cluster: j, hyper_cluster: k, coefficients })
}

/// Local online phase: dispatch to the nearest clusters and solve.
pub fn online(model: &ClusterModel, problem: &dyn OnlineProblem, mu: &[f64]) -> Result<OnlineSolution> {
    let j = nearest(&model.subspace_clustering.centroids, mu);
    let k = nearest(&model.hyper_clustering.centroids, mu);
    solve_with_clusters(model, problem, mu, j, k)
}

/// Single-subspace, single-hyper-reduction model built directly from all
/// samples without clustering.
#[derive(Clone, Debug)]
pub struct GlobalModel {
    pub bases: Vec<ReducedBasis>,
    pub hyper: HyperSet,
    pub projection: ProjectedBlocks,
}

pub fn global_offline(samples: &[FomSample], problem: &dyn OfflineProblem, eps: f64, hyper_factor: f64, svd: &SvdOptions) -> Result<GlobalModel> {
    let all: Vec<&FomSample> = samples.iter().collect();
    let bases = problem.build_bases(&all, eps, svd)?;
    let hyper = hyper_for(problem, &all, eps * hyper_factor, svd)?;
    let projection = project_blocks(problem.layout(), &bases, &hyper)?;
    Ok(GlobalModel { bases, hyper, projection })
}

pub fn global_online(model: &GlobalModel, problem: &dyn OnlineProblem, mu: &[f64]) -> Result<Vec<Vec<f64>>> {
    let (ls, rs) = problem.sample(&model.hyper, mu)?;
    let mut lhs = Vec::new();
    for (b, vals) in ls.iter().enumerate() {
        lhs.push(combine_matrices(&model.projection.lhs[b], &online_coefficients(&model.hyper.lhs[b], vals)?)?);
    }
    let mut rhs = Vec::new();
    for (b, vals) in rs.iter().enumerate() {
        rhs.push(combine_vectors(&model.projection.rhs[b], &online_coefficients(&model.hyper.rhs[b], vals)?)?);
    }
    let x = problem.solve_reduced(&lhs, &rhs).map_err(|cond| RomError::SingularReduced { j: 0, k: 0, cond })?;
    let mut out = Vec::new();
    let mut off = 0;
    for b in &model.bases {
        out.push(b.expand(&x[off..off + b.dim()]));
        off += b.dim();
    }
    Ok(out)
}

/// Default reduced solve of a single elliptic block.
pub fn solve_single_block(lhs: &[DMat], rhs: &[Vec<f64>]) -> std::result::Result<Vec<f64>, f64> {
    reduced_solve(lhs[0].as_ref(), &rhs[0])
}

fn write_points(out: &mut String, tag: &str, pts: &[Vec<f64>]) {
    for (k, c) in pts.iter().enumerate() {
        let s: Vec<String> = c.iter().map(|v| v.to_string()).collect();
        out.push_str(&format!("{tag} {k}: {}\n", s.join(",")));
    }
}

fn matrix_stack(kind: &str, ms: &[DMat], rows: usize, cols: usize) -> StoredArray {
    let mut data = Vec::with_capacity(rows * cols * ms.len());
    for m in ms {
        for j in 0..cols {
            for i in 0..rows {
                data.push(m[(i, j)]);
            }
        }
    }
    StoredArray { kind: kind.into(), shape: vec![rows, cols, ms.len()], parameters: Vec::new(), meta: Default::default(), data }
}

fn unstack(a: &StoredArray) -> Result<Vec<DMat>> {
    if a.shape.len() != 3 {
        return Err(RomError::Store(format!("expected a 3-axis array, found shape {:?}", a.shape)));
    }
    let (r, c, q) = (a.shape[0], a.shape[1], a.shape[2]);
    Ok((0..q).map(|k| Mat::from_fn(r, c, |i, j| a.data[i + r * (j + c * k)])).collect())
}

fn indices_array(kind: &str, idx: &[usize]) -> StoredArray {
    StoredArray::from_vector(kind, &idx.iter().map(|&i| i as f64).collect::<Vec<_>>())
}

fn to_indices(a: &StoredArray) -> Vec<usize> {
    a.data.iter().map(|&v| v as usize).collect()
}

impl ClusterModel {
    /// Writes `clusters.txt`, `basis_j/`, `hyper_k/` and `proj_j_k/`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut txt = String::new();
        txt.push_str(&format!("eps={}\nsubspace_clusters={}\nhyper_clusters={}\n", self.eps, self.n_clusters(), self.n_clusters_hyper()));
        write_points(&mut txt, "alpha", &self.subspace_clustering.centroids);
        write_points(&mut txt, "beta", &self.hyper_clustering.centroids);
        let a: Vec<String> = self.subspace_clustering.assignments.iter().map(|v| v.to_string()).collect();
        let b: Vec<String> = self.hyper_clustering.assignments.iter().map(|v| v.to_string()).collect();
        txt.push_str(&format!("alpha_assignments={}\nbeta_assignments={}\n", a.join(","), b.join(",")));
        fs::write(dir.join("clusters.txt"), txt)?;
        for (j, bases) in self.bases.iter().enumerate() {
            for (f, b) in bases.iter().enumerate() {
                let d = dir.join(format!("basis_{j}")).join(format!("field_{f}"));
                write_array(&d.join("basis"), &StoredArray::from_matrix("basis", b.basis.as_ref()))?;
                write_array(&d.join("singular_values"), &StoredArray::from_vector("singular-values", &b.singular_values))?;
            }
        }
        for (k, h) in self.hyper.iter().enumerate() {
            for (tag, list) in [("lhs", &h.lhs), ("rhs", &h.rhs)] {
                for (b, hr) in list.iter().enumerate() {
                    let d = dir.join(format!("hyper_{k}")).join(format!("{tag}_{b}"));
                    write_array(&d.join("basis"), &StoredArray::from_matrix("collateral-basis", hr.basis.as_ref()))?;
                    write_array(&d.join("indices"), &indices_array("indices", &hr.indices))?;
                    write_array(&d.join("cells"), &indices_array("cells", &hr.cells))?;
                }
            }
        }
        for (j, row) in self.projections.iter().enumerate() {
            for (k, p) in row.iter().enumerate() {
                let d = dir.join(format!("proj_{j}_{k}"));
                for (b, comps) in p.lhs.iter().enumerate() {
                    let (r, c) = comps.first().map_or((0, 0), |m| (m.nrows(), m.ncols()));
                    write_array(&d.join(format!("lhs_{b}")), &matrix_stack("projected-lhs", comps, r, c))?;
                }
                for (b, comps) in p.rhs.iter().enumerate() {
                    let r = comps.first().map_or(0, |v| v.len());
                    let m = from_columns(r, comps);
                    write_array(&d.join(format!("rhs_{b}")), &StoredArray::from_matrix("projected-rhs", m.as_ref()))?;
                }
            }
        }
        Ok(())
    }

    /// Reads a model written by [`ClusterModel::save`]; `layout` gives the
    /// number of fields and blocks.
    pub fn load(dir: &Path, layout: &ProblemLayout) -> Result<Self> {
        let txt = fs::read_to_string(dir.join("clusters.txt")).map_err(|e| RomError::Store(format!("{}: {e}", dir.display())))?;
        let mut eps = 0.0;
        let mut alpha = Vec::new();
        let mut beta = Vec::new();
        let mut aa = Vec::new();
        let mut ba = Vec::new();
        let parse_f = |s: &str| -> Result<Vec<f64>> { s.split(',').filter(|t| !t.is_empty()).map(|t| t.trim().parse().map_err(|_| RomError::Store(format!("bad number '{t}'")))).collect() };
        let parse_u = |s: &str| -> Result<Vec<usize>> { s.split(',').filter(|t| !t.is_empty()).map(|t| t.trim().parse().map_err(|_| RomError::Store(format!("bad index '{t}'")))).collect() };
        for line in txt.lines() {
            if let Some(v) = line.strip_prefix("eps=") {
                eps = v.parse().map_err(|_| RomError::Store("bad eps".into()))?;
            } else if let Some(v) = line.strip_prefix("alpha_assignments=") {
                aa = parse_u(v)?;
            } else if let Some(v) = line.strip_prefix("beta_assignments=") {
                ba = parse_u(v)?;
            } else if let Some(rest) = line.strip_prefix("alpha ") {
                alpha.push(parse_f(rest.split_once(": ").map_or("", |x| x.1))?);
            } else if let Some(rest) = line.strip_prefix("beta ") {
                beta.push(parse_f(rest.split_once(": ").map_or("", |x| x.1))?);
            }
        }
        let mut bases = Vec::new();
        for j in 0..alpha.len() {
            let mut fields = Vec::new();
            for f in 0..layout.n_fields {
                let d = dir.join(format!("basis_{j}")).join(format!("field_{f}"));
                let basis = read_array(&d.join("basis"))?.to_matrix()?;
                let singular_values = read_array(&d.join("singular_values"))?.data;
                fields.push(ReducedBasis { basis, singular_values });
            }
            bases.push(fields);
        }
        let mut hyper = Vec::new();
        for k in 0..beta.len() {
            let mut sets = [Vec::new(), Vec::new()];
            for (t, (tag, n)) in [("lhs", layout.lhs_blocks.len()), ("rhs", layout.rhs_blocks.len())].into_iter().enumerate() {
                for b in 0..n {
                    let d = dir.join(format!("hyper_{k}")).join(format!("{tag}_{b}"));
                    sets[t].push(HyperReduction {
                        basis: read_array(&d.join("basis"))?.to_matrix()?,
                        indices: to_indices(&read_array(&d.join("indices"))?),
                        cells: to_indices(&read_array(&d.join("cells"))?),
                    });
                }
            }
            let [lhs, rhs] = sets;
            hyper.push(HyperSet { lhs, rhs });
        }
        let mut projections = Vec::new();
        for j in 0..alpha.len() {
            let mut row = Vec::new();
            for k in 0..beta.len() {
                let d = dir.join(format!("proj_{j}_{k}"));
                let mut p = ProjectedBlocks::default();
                for b in 0..layout.lhs_blocks.len() {
                    p.lhs.push(unstack(&read_array(&d.join(format!("lhs_{b}")))?)?);
                }
                for b in 0..layout.rhs_blocks.len() {
                    let m = read_array(&d.join(format!("rhs_{b}")))?.to_matrix()?;
                    p.rhs.push((0..m.ncols()).map(|q| crate::linalg::column(m.as_ref(), q)).collect());
                }
                row.push(p);
            }
            projections.push(row);
        }
        Ok(ClusterModel {
            eps,
            subspace_clustering: KMeans { centroids: alpha, assignments: aa, iterations: 0 },
            hyper_clustering: KMeans { centroids: beta, assignments: ba, iterations: 0 },
            bases,
            hyper,
            projections,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut pts = Vec::new();
        for c in [[0.0, 0.0], [5.0, 5.0]] {
            for _ in 0..20 {
                pts.push(vec![c[0] + rng.gen_range(-0.5..0.5), c[1] + rng.gen_range(-0.5..0.5)]);
            }
        }
        pts
    }

    #[test]
    fn two_blobs_are_separated() {
        let pts = blobs();
        let km = kmeans(&pts, 2, 3).unwrap();
        let first = km.assignments[0];
        assert!(km.assignments[..20].iter().all(|&a| a == first));
        assert!(km.assignments[20..].iter().all(|&a| a != first));
    }

    #[test]
    fn single_cluster_keeps_order() {
        let pts = blobs();
        let km = kmeans(&pts, 1, 0).unwrap();
        assert!(km.assignments.iter().all(|&a| a == 0));
        assert_eq!(km.members(0), (0..40).collect::<Vec<_>>());
    }

    #[test]
    fn too_many_clusters() {
        assert!(kmeans(&[vec![0.0]], 2, 0).is_err());
    }

    #[test]
    fn nearest_ties_to_lowest() {
        assert_eq!(nearest(&[vec![1.0], vec![-1.0]], &[0.0]), 0);
    }
}
