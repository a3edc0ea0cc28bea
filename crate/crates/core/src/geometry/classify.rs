use super::{BackgroundGrid, LevelSet};
use crate::error::{Result, RomError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellLabel {
    Internal,
    Cut,
    External,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellClassification {
    pub labels: Vec<CellLabel>,
    /// Internal and cut cells in increasing index order.
    pub active_cells: Vec<usize>,
    /// Position of each cell in `active_cells`.
    pub active_position: Vec<Option<usize>>,
}

impl CellClassification {
    pub fn label(&self, c: usize) -> CellLabel {
        self.labels[c]
    }

    pub fn is_active(&self, c: usize) -> bool {
        self.labels[c] != CellLabel::External
    }

    pub fn cells_with(&self, label: CellLabel) -> Vec<usize> {
        (0..self.labels.len()).filter(|&c| self.labels[c] == label).collect()
    }

    pub fn n_internal(&self) -> usize {
        self.labels.iter().filter(|l| **l == CellLabel::Internal).count()
    }

    pub fn n_cut(&self) -> usize {
        self.labels.iter().filter(|l| **l == CellLabel::Cut).count()
    }

    /// Nodes of order-`p` cells carrying `label`, sorted.
    pub fn nodes_of(&self, grid: &BackgroundGrid, p: usize, labels: &[CellLabel]) -> Vec<usize> {
        let mut mark = vec![false; grid.n_nodes(p)];
        for c in 0..self.labels.len() {
            if labels.contains(&self.labels[c]) {
                for n in grid.cell_nodes(p, c) {
                    mark[n] = true;
                }
            }
        }
        (0..mark.len()).filter(|&n| mark[n]).collect()
    }

    pub fn internal_nodes(&self, grid: &BackgroundGrid, p: usize) -> Vec<usize> {
        self.nodes_of(grid, p, &[CellLabel::Internal])
    }

    pub fn active_nodes(&self, grid: &BackgroundGrid, p: usize) -> Vec<usize> {
        self.nodes_of(grid, p, &[CellLabel::Internal, CellLabel::Cut])
    }
}

/// Labels each cell from the level-set signs at its vertices and center.
pub fn classify_cells(grid: &BackgroundGrid, ls: &LevelSet) -> Result<CellClassification> {
    let mut labels = Vec::with_capacity(grid.n_cells());
    for c in 0..grid.n_cells() {
        let v = grid.vertices(c);
        let f = |x| ls.value_snapped(x, grid.h());
        let vals = [f(v[0]), f(v[1]), f(v[2]), f(v[3]), f(grid.cell_center(c))];
        let neg = vals.iter().any(|&x| x < 0.0);
        let pos = vals.iter().any(|&x| x > 0.0);
        let label = match (neg, pos) {
            (true, true) => CellLabel::Cut,
            (true, false) => CellLabel::Internal,
            (false, true) => CellLabel::External,
            (false, false) => {
                log::warn!("cell {c} has a vanishing level set at every sample; treated as internal");
                CellLabel::Internal
            }
        };
        labels.push(label);
    }
    if !labels.contains(&CellLabel::Internal) {
        return Err(RomError::NoInterior);
    }
    let active_cells: Vec<usize> = (0..labels.len()).filter(|&c| labels[c] != CellLabel::External).collect();
    let mut active_position = vec![None; labels.len()];
    for (k, &c) in active_cells.iter().enumerate() {
        active_position[c] = Some(k);
    }
    Ok(CellClassification { labels, active_cells, active_position })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_box_is_all_internal() {
        let g = BackgroundGrid::new([0.0, 0.0], [1.0, 1.0], [4, 4]).unwrap();
        let c = classify_cells(&g, &LevelSet::full_box()).unwrap();
        assert_eq!(c.n_internal(), 16);
        assert_eq!(c.n_cut(), 0);
    }

    #[test]
    fn complement_has_no_interior() {
        let g = BackgroundGrid::new([0.0, 0.0], [1.0, 1.0], [4, 4]).unwrap();
        assert!(matches!(classify_cells(&g, &LevelSet::Uniform(1.0)), Err(RomError::NoInterior)));
    }

    #[test]
    fn zero_level_set_is_internal() {
        let g = BackgroundGrid::new([0.0, 0.0], [1.0, 1.0], [2, 2]).unwrap();
        let c = classify_cells(&g, &LevelSet::Uniform(0.0)).unwrap();
        assert_eq!(c.n_internal(), 4);
    }

    #[test]
    fn hole_produces_cut_ring() {
        let g = BackgroundGrid::new([-1.0, -1.0], [1.0, 1.0], [20, 20]).unwrap();
        let ls = LevelSet::BallHole { center: [0.1, 0.1], radius: 0.3 };
        let c = classify_cells(&g, &ls).unwrap();
        assert!(c.n_cut() > 0);
        assert!(c.cells_with(CellLabel::External).len() > 0);
        for &cell in &c.cells_with(CellLabel::Cut) {
            let d = ((g.cell_center(cell)[0] - 0.1).powi(2) + (g.cell_center(cell)[1] - 0.1).powi(2)).sqrt();
            assert!((d - 0.3).abs() < 0.1 * 2f64.sqrt());
        }
    }
}
