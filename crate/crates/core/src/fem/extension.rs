use super::basis::LagrangeBasis;
use super::space::FeSpace;
use crate::error::Result;
use crate::geometry::{BackgroundGrid, CellClassification, CellLabel};
use crate::linalg::{SparseLu, TripletBuilder};
use crate::quadrature::square_rule;

/// Discrete harmonic extension of active-domain fields to the whole
/// background grid: the inactive nodes solve a Laplace problem on the
/// external cells with the active nodal values as Dirichlet data.
pub struct HarmonicExtension {
    grid: BackgroundGrid,
    order: usize,
    /// Position of every background node among the unknowns.
    unknown: Vec<Option<usize>>,
    /// `(row unknown, column node, value)` couplings to active nodes.
    coupling: Vec<(usize, usize, f64)>,
    lu: Option<SparseLu>,
}

impl HarmonicExtension {
    pub fn new(grid: &BackgroundGrid, cls: &CellClassification, order: usize) -> Result<Self> {
        let active: Vec<bool> = {
            let mut a = vec![false; grid.n_nodes(order)];
            for n in cls.active_nodes(grid, order) {
                a[n] = true;
            }
            a
        };
        let mut unknown = vec![None; grid.n_nodes(order)];
        let mut count = 0;
        for (n, &is_active) in active.iter().enumerate() {
            if !is_active {
                unknown[n] = Some(count);
                count += 1;
            }
        }
        let basis = LagrangeBasis::new(order);
        let rule = square_rule(order + 1);
        let s = grid.spacing();
        let nl = basis.n_nodes();
        let mut kloc = vec![0.0; nl * nl];
        for (xi, w) in rule.points.iter().zip(&rule.weights) {
            let g: Vec<[f64; 2]> = basis.gradients(*xi).into_iter().map(|d| [d[0] / s[0], d[1] / s[1]]).collect();
            for i in 0..nl {
                for j in 0..nl {
                    kloc[i * nl + j] += w * s[0] * s[1] * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                }
            }
        }
        let mut tb = TripletBuilder::new(count);
        let mut coupling = Vec::new();
        for c in cls.cells_with(CellLabel::External) {
            let nodes = grid.cell_nodes(order, c);
            for (i, &ni) in nodes.iter().enumerate() {
                let Some(r) = unknown[ni] else { continue };
                for (j, &nj) in nodes.iter().enumerate() {
                    let v = kloc[i * nl + j];
                    match unknown[nj] {
                        Some(cidx) => tb.push(r, cidx, v),
                        None => coupling.push((r, nj, v)),
                    }
                }
            }
        }
        let lu = if count > 0 { Some(SparseLu::new(tb.build()?)?) } else { None };
        Ok(HarmonicExtension { grid: grid.clone(), order, unknown, coupling, lu })
    }

    pub fn n_unknowns(&self) -> usize {
        self.unknown.iter().filter(|u| u.is_some()).count()
    }

    /// Background nodal values (interleaved by component) of the extension
    /// of the space function `u`.
    pub fn extend(&self, space: &FeSpace, u: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(space.order(), self.order, "extension order mismatch");
        let nc = space.components();
        let mut nodal = space.nodal_values(u);
        if let Some(lu) = &self.lu {
            let n = self.n_unknowns();
            for c in 0..nc {
                let mut rhs = vec![0.0; n];
                for &(r, node, v) in &self.coupling {
                    rhs[r] -= v * nodal[node * nc + c];
                }
                let x = lu.solve(&rhs)?;
                for (node, pos) in self.unknown.iter().enumerate() {
                    if let Some(k) = pos {
                        nodal[node * nc + c] = x[*k];
                    }
                }
            }
        }
        Ok(nodal)
    }

    pub fn grid(&self) -> &BackgroundGrid {
        &self.grid
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::space::SpaceFlavor;
    use crate::geometry::{aggregate, classify_cells, LevelSet};

    #[test]
    fn extension_reproduces_harmonic_polynomials() {
        let g = BackgroundGrid::new([-1.0, -1.0], [1.0, 1.0], [10, 10]).unwrap();
        let cls = classify_cells(&g, &LevelSet::BallHole { center: [0.1, 0.1], radius: 0.35 }).unwrap();
        let agg = aggregate(&cls, &g, 2).unwrap();
        let space = FeSpace::new(&g, &cls, Some(&agg), 2, 1, SpaceFlavor::Aggregated).unwrap();
        let ext = HarmonicExtension::new(&g, &cls, 2).unwrap();
        assert!(ext.n_unknowns() > 0);
        // x y is harmonic and lies in Q2, so the discrete extension is exact
        let f = |x: [f64; 2]| x[0] * x[1] + 2.0 * x[0];
        let u = space.interpolate(|x| vec![f(x)]);
        let e = ext.extend(&space, &u).unwrap();
        for n in 0..g.n_nodes(2) {
            assert!((e[n] - f(g.node_coord(2, n))).abs() < 1e-10);
        }
    }
}
