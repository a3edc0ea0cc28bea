use std::collections::BTreeMap;

use super::basis::LagrangeBasis;
use crate::error::{Result, RomError};
use crate::geometry::{AggregationMap, BackgroundGrid, CellClassification, CellLabel};

/// Which cells and nodes a space is built on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpaceFlavor {
    /// Internal cells; free nodes are the internal nodes.
    Internal,
    /// Active cells; every active node is free.
    Active,
    /// Active cells; internal nodes free, the rest constrained by aggregation.
    Aggregated,
    /// All background cells and nodes.
    Background,
    /// External cells and their nodes.
    External,
}

/// Local-to-free map of one cell: local nodal values equal
/// `expansion * free nodal values`, row-major `n_local x free_nodes.len()`.
#[derive(Clone, Debug, PartialEq)]
pub struct CellDofs {
    pub cell: usize,
    pub nodes: Vec<usize>,
    pub free_nodes: Vec<usize>,
    pub expansion: Vec<f64>,
}

impl CellDofs {
    pub fn n_local(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_free(&self) -> usize {
        self.free_nodes.len()
    }
}

#[derive(Clone, Debug)]
pub struct FeSpace {
    grid: BackgroundGrid,
    basis: LagrangeBasis,
    components: usize,
    flavor: SpaceFlavor,
    cells: Vec<usize>,
    cell_pos: Vec<Option<usize>>,
    free_nodes: Vec<usize>,
    free_index: Vec<Option<usize>>,
    node_expansion: BTreeMap<usize, Vec<(usize, f64)>>,
    cell_dofs: Vec<CellDofs>,
}

impl FeSpace {
    /// Builds a space of the given flavor. `agg` is required for the
    /// aggregated flavor and must have the same order.
    pub fn new(
        grid: &BackgroundGrid,
        cls: &CellClassification,
        agg: Option<&AggregationMap>,
        order: usize,
        components: usize,
        flavor: SpaceFlavor,
    ) -> Result<Self> {
        let cells: Vec<usize> = match flavor {
            SpaceFlavor::Internal => cls.cells_with(CellLabel::Internal),
            SpaceFlavor::Active | SpaceFlavor::Aggregated => cls.active_cells.clone(),
            SpaceFlavor::Background => (0..grid.n_cells()).collect(),
            SpaceFlavor::External => cls.cells_with(CellLabel::External),
        };
        let free_nodes: Vec<usize> = match flavor {
            SpaceFlavor::Internal | SpaceFlavor::Aggregated => cls.internal_nodes(grid, order),
            SpaceFlavor::Active => cls.active_nodes(grid, order),
            SpaceFlavor::Background => (0..grid.n_nodes(order)).collect(),
            SpaceFlavor::External => cls.nodes_of(grid, order, &[CellLabel::External]),
        };
        let mut constraints = BTreeMap::new();
        if flavor == SpaceFlavor::Aggregated {
            let agg = agg.ok_or_else(|| RomError::InvalidArgument("aggregated space needs an aggregation map".into()))?;
            if agg.order != order {
                return Err(RomError::InvalidArgument(format!("aggregation order {} differs from space order {order}", agg.order)));
            }
            for c in &agg.constraints {
                constraints.insert(c.node, c.masters.clone());
            }
        }
        Self::from_parts(grid.clone(), order, components, flavor, cells, free_nodes, constraints)
    }

    /// Background space on all cells with every node free.
    pub fn background(grid: &BackgroundGrid, order: usize, components: usize) -> Self {
        let cells = (0..grid.n_cells()).collect();
        let nodes = (0..grid.n_nodes(order)).collect();
        Self::from_parts(grid.clone(), order, components, SpaceFlavor::Background, cells, nodes, BTreeMap::new())
            .expect("background space is always consistent")
    }

    fn from_parts(
        grid: BackgroundGrid,
        order: usize,
        components: usize,
        flavor: SpaceFlavor,
        cells: Vec<usize>,
        free_nodes: Vec<usize>,
        constraints: BTreeMap<usize, Vec<(usize, f64)>>,
    ) -> Result<Self> {
        let n_nodes = grid.n_nodes(order);
        let mut free_index = vec![None; n_nodes];
        for (k, &n) in free_nodes.iter().enumerate() {
            free_index[n] = Some(k);
        }
        let mut node_expansion = BTreeMap::new();
        for (node, masters) in constraints {
            let mut e = Vec::with_capacity(masters.len());
            for (m, w) in masters {
                let k = free_index[m].ok_or_else(|| RomError::InvalidArgument(format!("master node {m} of node {node} is not free")))?;
                e.push((k, w));
            }
            node_expansion.insert(node, e);
        }
        let mut cell_pos = vec![None; grid.n_cells()];
        let mut cell_dofs = Vec::with_capacity(cells.len());
        for (k, &c) in cells.iter().enumerate() {
            cell_pos[c] = Some(k);
            let nodes = grid.cell_nodes(order, c);
            let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(nodes.len());
            for &n in &nodes {
                if let Some(i) = free_index[n] {
                    rows.push(vec![(i, 1.0)]);
                } else if let Some(e) = node_expansion.get(&n) {
                    rows.push(e.clone());
                } else {
                    return Err(RomError::InvalidArgument(format!("node {n} of cell {c} is neither free nor constrained")));
                }
            }
            let mut free: Vec<usize> = rows.iter().flat_map(|r| r.iter().map(|e| e.0)).collect();
            free.sort_unstable();
            free.dedup();
            let mut expansion = vec![0.0; nodes.len() * free.len()];
            for (l, r) in rows.iter().enumerate() {
                for &(i, w) in r {
                    let col = free.binary_search(&i).expect("free node present");
                    expansion[l * free.len() + col] += w;
                }
            }
            cell_dofs.push(CellDofs { cell: c, nodes, free_nodes: free, expansion });
        }
        Ok(FeSpace { grid, basis: LagrangeBasis::new(order), components, flavor, cells, cell_pos, free_nodes, free_index, node_expansion, cell_dofs })
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

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn flavor(&self) -> SpaceFlavor {
        self.flavor
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn cell_position(&self, c: usize) -> Option<usize> {
        self.cell_pos.get(c).copied().flatten()
    }

    pub fn cell_dofs(&self, pos: usize) -> &CellDofs {
        &self.cell_dofs[pos]
    }

    pub fn free_nodes(&self) -> &[usize] {
        &self.free_nodes
    }

    pub fn free_index(&self, node: usize) -> Option<usize> {
        self.free_index[node]
    }

    pub fn n_free_nodes(&self) -> usize {
        self.free_nodes.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.free_nodes.len() * self.components
    }

    pub fn n_constrained_nodes(&self) -> usize {
        self.node_expansion.len()
    }

    pub fn constrained_nodes(&self) -> Vec<usize> {
        self.node_expansion.keys().copied().collect()
    }

    /// Free indices and weights defining the value at `node`.
    pub fn node_expansion(&self, node: usize) -> Option<Vec<(usize, f64)>> {
        if let Some(i) = self.free_index[node] {
            Some(vec![(i, 1.0)])
        } else {
            self.node_expansion.get(&node).cloned()
        }
    }

    pub fn dof(&self, free_node: usize, comp: usize) -> usize {
        free_node * self.components + comp
    }

    /// Values at all background nodes (zero where the space is undefined),
    /// interleaved by component.
    pub fn nodal_values(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.n_dofs(), "nodal_values dimension mismatch");
        let nc = self.components;
        let mut out = vec![0.0; self.grid.n_nodes(self.order()) * nc];
        for (k, &n) in self.free_nodes.iter().enumerate() {
            out[n * nc..(n + 1) * nc].copy_from_slice(&u[k * nc..(k + 1) * nc]);
        }
        for (&n, e) in &self.node_expansion {
            for c in 0..nc {
                out[n * nc + c] = e.iter().map(|&(i, w)| w * u[i * nc + c]).sum();
            }
        }
        out
    }

    /// Local nodal values of a cell, interleaved by component.
    pub fn local_values(&self, pos: usize, u: &[f64]) -> Vec<f64> {
        let cd = &self.cell_dofs[pos];
        let nc = self.components;
        let nf = cd.n_free();
        let mut out = vec![0.0; cd.n_local() * nc];
        for l in 0..cd.n_local() {
            for (m, &f) in cd.free_nodes.iter().enumerate() {
                let w = cd.expansion[l * nf + m];
                if w != 0.0 {
                    for c in 0..nc {
                        out[l * nc + c] += w * u[f * nc + c];
                    }
                }
            }
        }
        out
    }

    /// Interpolates `f` at the free nodes.
    pub fn interpolate(&self, f: impl Fn([f64; 2]) -> Vec<f64>) -> Vec<f64> {
        let nc = self.components;
        let mut out = vec![0.0; self.n_dofs()];
        for (k, &n) in self.free_nodes.iter().enumerate() {
            let v = f(self.grid.node_coord(self.order(), n));
            out[k * nc..(k + 1) * nc].copy_from_slice(&v[..nc]);
        }
        out
    }

    /// Coordinates of the free nodes.
    pub fn free_node_coords(&self) -> Vec<[f64; 2]> {
        self.free_nodes.iter().map(|&n| self.grid.node_coord(self.order(), n)).collect()
    }

    /// Free dofs whose support intersects cell `c`.
    pub fn cell_free_dofs(&self, pos: usize) -> Vec<usize> {
        let cd = &self.cell_dofs[pos];
        let nc = self.components;
        cd.free_nodes.iter().flat_map(|&f| (0..nc).map(move |c| f * nc + c)).collect()
    }
}
