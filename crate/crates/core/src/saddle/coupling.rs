//! Per-cell comparison of deformed and reference bulk coupling integrals.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::stokes::StokesSpaces;
use crate::deformation::DeformationField;
use crate::error::Result;
use crate::fem::assembly::{CellShapes, MappedCell};
use crate::fem::poisson::mapped_cell;
use crate::geometry::GeometryQuadrature;

/// Reference integrals below this magnitude are skipped.
pub const REFERENCE_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct CellCoupling {
    pub cell: usize,
    pub c_k: f64,
    pub deviation: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CouplingCheck {
    pub cells: Vec<CellCoupling>,
}

impl CouplingCheck {
    pub fn min(&self) -> f64 {
        self.cells.iter().map(|c| c.c_k).fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.cells.iter().map(|c| c.c_k).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.cells.iter().map(|c| c.c_k).sum::<f64>() / self.cells.len().max(1) as f64
    }

    pub fn max_deviation(&self) -> f64 {
        self.cells.iter().map(|c| c.deviation).fold(0.0, f64::max)
    }
}

fn coupling_integral(mc: &MappedCell, su: &CellShapes, sp: &CellShapes, v: &[f64], q: &[f64]) -> f64 {
    let mut s = 0.0;
    for ((pt, u), p) in mc.bulk.iter().zip(&su.bulk).zip(&sp.bulk) {
        let qv: f64 = p.values.iter().zip(q).map(|(a, b)| a * b).sum();
        let mut div = 0.0;
        for (j, g) in u.grads.iter().enumerate() {
            div += g[0] * v[2 * j] + g[1] * v[2 * j + 1];
        }
        s += pt.weight * qv * div;
    }
    s
}

/// Estimates `c_K` on every active cell from `sample_pairs` random local
/// velocity/pressure pairs.
pub fn coupling_constant_check(spaces: &StokesSpaces, quad: &GeometryQuadrature, def: &DeformationField, sample_pairs: usize, seed: u64) -> Result<CouplingCheck> {
    let v = &spaces.velocity;
    let p = &spaces.pressure;
    let nu = 2 * v.basis().n_nodes();
    let np = p.basis().n_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = Vec::with_capacity(v.cells().len());
    for &c in v.cells() {
        let mr = mapped_cell(v, quad, None, c)?;
        let md = mapped_cell(v, quad, Some(def), c)?;
        let (ur, pr) = (CellShapes::new(v.basis(), &mr), CellShapes::new(p.basis(), &mr));
        let (ud, pd) = (CellShapes::new(v.basis(), &md), CellShapes::new(p.basis(), &md));
        let mut ratios = Vec::with_capacity(sample_pairs);
        for _ in 0..sample_pairs {
            let vv: Vec<f64> = (0..nu).map(|_| StandardNormal.sample(&mut rng)).collect();
            let qq: Vec<f64> = (0..np).map(|_| StandardNormal.sample(&mut rng)).collect();
            let r = coupling_integral(&mr, &ur, &pr, &vv, &qq);
            if r.abs() > REFERENCE_FLOOR {
                ratios.push(coupling_integral(&md, &ud, &pd, &vv, &qq) / r);
            }
        }
        if ratios.is_empty() {
            continue;
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        cells.push(CellCoupling { cell: c, c_k: mean, deviation: hi - lo, samples: ratios.len() });
    }
    Ok(CouplingCheck { cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{classify_cells, BackgroundGrid, LevelSet};

    #[test]
    fn identity_and_dilation() {
        let g = BackgroundGrid::new([0.0, 0.0], [1.0, 1.0], [4, 4]).unwrap();
        let ls = LevelSet::BallHole { center: [0.5, 0.5], radius: 0.2 };
        let cls = classify_cells(&g, &ls).unwrap();
        let sp = StokesSpaces::new(&g, &cls).unwrap();
        let q = GeometryQuadrature::build(&g, &cls, &ls, 4).unwrap();
        let zero = DeformationField::zero(&g, 2);
        let chk = coupling_constant_check(&sp, &q, &zero, 5, 0).unwrap();
        assert!(chk.cells.iter().all(|c| (c.c_k - 1.0).abs() < 1e-12 && c.deviation < 1e-12));
        let alpha = 1.1;
        let nodal = (0..g.n_nodes(2)).map(|n| {
            let x = g.node_coord(2, n);
            [(alpha - 1.0) * x[0], (alpha - 1.0) * x[1]]
        });
        let dil = DeformationField::from_nodal(&g, 2, nodal.collect()).unwrap();
        let chk = coupling_constant_check(&sp, &q, &dil, 5, 0).unwrap();
        assert!(chk.cells.iter().all(|c| (c.c_k - alpha).abs() < 1e-10 && c.deviation < 1e-10), "{:?}", chk.cells[0]);
    }
}
