use std::collections::BTreeMap;

use super::{BackgroundGrid, CellClassification, CellLabel};
use crate::error::{Result, RomError};
use crate::fem::basis::LagrangeBasis;

/// A node outside every internal cell, expressed through the nodes of the
/// root cell of the lowest-index cut cell that contains it.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeConstraint {
    pub node: usize,
    pub root_cell: usize,
    /// `(master node, weight)` pairs; masters are nodes of `root_cell`.
    pub masters: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregationMap {
    pub order: usize,
    /// Root (internal) cell of every cut cell.
    pub root_of: BTreeMap<usize, usize>,
    /// Constrained nodes in increasing order.
    pub constraints: Vec<NodeConstraint>,
}

impl AggregationMap {
    pub fn constrained_nodes(&self) -> Vec<usize> {
        self.constraints.iter().map(|c| c.node).collect()
    }

    pub fn root(&self, cell: usize) -> Option<usize> {
        self.root_of.get(&cell).copied()
    }
}

/// Attaches every cut cell to an internal root cell by breadth-first search
/// over active cells through facets, and builds the order-`p` nodal
/// constraints of the aggregated space.
pub fn aggregate(cls: &CellClassification, grid: &BackgroundGrid, p: usize) -> Result<AggregationMap> {
    let n = grid.n_cells();
    let mut root: Vec<Option<usize>> = vec![None; n];
    let mut frontier: Vec<usize> = Vec::new();
    for c in 0..n {
        if cls.label(c) == CellLabel::Internal {
            root[c] = Some(c);
            frontier.push(c);
        }
    }
    if frontier.is_empty() {
        return Err(RomError::NoInterior);
    }
    while !frontier.is_empty() {
        let mut next: BTreeMap<usize, usize> = BTreeMap::new();
        for &c in &frontier {
            let r = root[c].expect("frontier cells are rooted");
            for nb in grid.facet_neighbors(c) {
                if cls.label(nb) == CellLabel::Cut && root[nb].is_none() {
                    let e = next.entry(nb).or_insert(r);
                    *e = (*e).min(r);
                }
            }
        }
        frontier = next.keys().copied().collect();
        for (c, r) in next {
            root[c] = Some(r);
        }
    }
    let mut root_of = BTreeMap::new();
    for c in cls.cells_with(CellLabel::Cut) {
        match root[c] {
            Some(r) => {
                root_of.insert(c, r);
            }
            None => return Err(RomError::IsolatedCutComponent { cell: c }),
        }
    }

    let mut internal = vec![false; grid.n_nodes(p)];
    for c in cls.cells_with(CellLabel::Internal) {
        for node in grid.cell_nodes(p, c) {
            internal[node] = true;
        }
    }
    let basis = LagrangeBasis::new(p);
    let mut owner: BTreeMap<usize, usize> = BTreeMap::new();
    for (&c, _) in &root_of {
        for node in grid.cell_nodes(p, c) {
            if !internal[node] {
                owner.entry(node).or_insert(c);
            }
        }
    }
    let mut constraints = Vec::with_capacity(owner.len());
    for (node, cut_cell) in owner {
        let r = root_of[&cut_cell];
        let xi = grid.to_local(r, grid.node_coord(p, node));
        let vals = basis.values(xi);
        let masters = grid.cell_nodes(p, r).into_iter().zip(vals).filter(|(_, w)| *w != 0.0).collect();
        constraints.push(NodeConstraint { node, root_cell: r, masters });
    }
    Ok(AggregationMap { order: p, root_of, constraints })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{classify_cells, LevelSet};

    fn setup() -> (BackgroundGrid, CellClassification) {
        let g = BackgroundGrid::new([-1.0, -1.0], [1.0, 1.0], [20, 20]).unwrap();
        let cls = classify_cells(&g, &LevelSet::BallHole { center: [0.1, 0.1], radius: 0.3 }).unwrap();
        (g, cls)
    }

    #[test]
    fn every_cut_cell_has_an_internal_root() {
        let (g, cls) = setup();
        let agg = aggregate(&cls, &g, 2).unwrap();
        assert_eq!(agg.root_of.len(), cls.n_cut());
        for (_, &r) in &agg.root_of {
            assert_eq!(cls.label(r), CellLabel::Internal);
        }
    }

    #[test]
    fn constraint_weights_reproduce_polynomials() {
        let (g, cls) = setup();
        for p in 1..=2 {
            let agg = aggregate(&cls, &g, p).unwrap();
            for c in &agg.constraints {
                let sum: f64 = c.masters.iter().map(|m| m.1).sum();
                assert!((sum - 1.0).abs() < 1e-12);
                let x = g.node_coord(p, c.node);
                let f = |y: [f64; 2]| y[0] * y[1] + 2.0 * y[0] - y[1];
                let interp: f64 = c.masters.iter().map(|&(m, w)| w * f(g.node_coord(p, m))).sum();
                assert!((interp - f(x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn internal_cells_have_no_constraints() {
        let g = BackgroundGrid::new([0.0, 0.0], [1.0, 1.0], [3, 3]).unwrap();
        let cls = classify_cells(&g, &LevelSet::full_box()).unwrap();
        let agg = aggregate(&cls, &g, 2).unwrap();
        assert!(agg.constraints.is_empty());
        assert!(agg.root_of.is_empty());
    }
}
