//! Background grid, level-set description of the physical domain, cell
//! classification, cut-cell quadrature and cell aggregation.

mod aggregate;
mod classify;
mod cut;

pub use aggregate::{aggregate, AggregationMap, NodeConstraint};
pub use classify::{classify_cells, CellClassification, CellLabel};
pub use cut::{build_cut_quadrature, BoundaryTag, CellQuadrature, GeometryQuadrature, Side, SurfacePoint};

use crate::error::{Result, RomError};
use crate::Point;

/// Cartesian grid of quadrilateral cells covering a box.
#[derive(Clone, Debug, PartialEq)]
pub struct BackgroundGrid {
    lower: Point,
    upper: Point,
    dims: [usize; 2],
}

impl BackgroundGrid {
    pub fn new(lower: Point, upper: Point, dims: [usize; 2]) -> Result<Self> {
        if dims[0] == 0 || dims[1] == 0 {
            return Err(RomError::InvalidArgument("grid needs at least one cell per direction".into()));
        }
        if !(upper[0] > lower[0] && upper[1] > lower[1]) {
            return Err(RomError::InvalidArgument(format!("empty box {lower:?} {upper:?}")));
        }
        Ok(BackgroundGrid { lower, upper, dims })
    }

    pub fn lower(&self) -> Point {
        self.lower
    }

    pub fn upper(&self) -> Point {
        self.upper
    }

    pub fn dims(&self) -> [usize; 2] {
        self.dims
    }

    pub fn n_cells(&self) -> usize {
        self.dims[0] * self.dims[1]
    }

    pub fn spacing(&self) -> [f64; 2] {
        [
            (self.upper[0] - self.lower[0]) / self.dims[0] as f64,
            (self.upper[1] - self.lower[1]) / self.dims[1] as f64,
        ]
    }

    /// Characteristic mesh size.
    pub fn h(&self) -> f64 {
        let s = self.spacing();
        s[0].max(s[1])
    }

    pub fn cell_index(&self, cx: usize, cy: usize) -> usize {
        cx + self.dims[0] * cy
    }

    pub fn cell_coords(&self, c: usize) -> (usize, usize) {
        (c % self.dims[0], c / self.dims[0])
    }

    pub fn cell_origin(&self, c: usize) -> Point {
        let (cx, cy) = self.cell_coords(c);
        let s = self.spacing();
        [self.lower[0] + cx as f64 * s[0], self.lower[1] + cy as f64 * s[1]]
    }

    pub fn cell_center(&self, c: usize) -> Point {
        self.to_global(c, [0.5, 0.5])
    }

    /// Cell vertices in counter-clockwise order starting at the lower left.
    pub fn vertices(&self, c: usize) -> [Point; 4] {
        [self.to_global(c, [0.0, 0.0]), self.to_global(c, [1.0, 0.0]), self.to_global(c, [1.0, 1.0]), self.to_global(c, [0.0, 1.0])]
    }

    pub fn to_global(&self, c: usize, xi: Point) -> Point {
        let o = self.cell_origin(c);
        let s = self.spacing();
        [o[0] + xi[0] * s[0], o[1] + xi[1] * s[1]]
    }

    pub fn to_local(&self, c: usize, x: Point) -> Point {
        let o = self.cell_origin(c);
        let s = self.spacing();
        [(x[0] - o[0]) / s[0], (x[1] - o[1]) / s[1]]
    }

    /// Cells sharing a facet with `c`, in the order left, right, bottom, top.
    pub fn facet_neighbors(&self, c: usize) -> Vec<usize> {
        let (cx, cy) = self.cell_coords(c);
        let mut out = Vec::with_capacity(4);
        if cx > 0 {
            out.push(self.cell_index(cx - 1, cy));
        }
        if cx + 1 < self.dims[0] {
            out.push(self.cell_index(cx + 1, cy));
        }
        if cy > 0 {
            out.push(self.cell_index(cx, cy - 1));
        }
        if cy + 1 < self.dims[1] {
            out.push(self.cell_index(cx, cy + 1));
        }
        out
    }

    /// Box sides touched by cell `c`.
    pub fn boundary_sides(&self, c: usize) -> Vec<Side> {
        let (cx, cy) = self.cell_coords(c);
        let mut out = Vec::new();
        if cx == 0 {
            out.push(Side::Left);
        }
        if cx + 1 == self.dims[0] {
            out.push(Side::Right);
        }
        if cy == 0 {
            out.push(Side::Bottom);
        }
        if cy + 1 == self.dims[1] {
            out.push(Side::Top);
        }
        out
    }

    /// Node grid dimensions of the order-`p` Lagrange lattice.
    pub fn node_dims(&self, p: usize) -> [usize; 2] {
        [p * self.dims[0] + 1, p * self.dims[1] + 1]
    }

    pub fn n_nodes(&self, p: usize) -> usize {
        let d = self.node_dims(p);
        d[0] * d[1]
    }

    pub fn node_index(&self, p: usize, i: usize, j: usize) -> usize {
        i + self.node_dims(p)[0] * j
    }

    pub fn node_ij(&self, p: usize, n: usize) -> (usize, usize) {
        let nx = self.node_dims(p)[0];
        (n % nx, n / nx)
    }

    pub fn node_coord(&self, p: usize, n: usize) -> Point {
        let (i, j) = self.node_ij(p, n);
        let s = self.spacing();
        [self.lower[0] + i as f64 * s[0] / p as f64, self.lower[1] + j as f64 * s[1] / p as f64]
    }

    /// Global nodes of cell `c`; local index `a + (p + 1) b`.
    pub fn cell_nodes(&self, p: usize, c: usize) -> Vec<usize> {
        let (cx, cy) = self.cell_coords(c);
        let mut out = Vec::with_capacity((p + 1) * (p + 1));
        for b in 0..=p {
            for a in 0..=p {
                out.push(self.node_index(p, p * cx + a, p * cy + b));
            }
        }
        out
    }

    /// True when the node lies on the box boundary.
    pub fn node_on_boundary(&self, p: usize, n: usize) -> bool {
        let (i, j) = self.node_ij(p, n);
        let d = self.node_dims(p);
        i == 0 || j == 0 || i + 1 == d[0] || j + 1 == d[1]
    }

    pub fn contains(&self, x: Point) -> bool {
        x[0] >= self.lower[0] && x[0] <= self.upper[0] && x[1] >= self.lower[1] && x[1] <= self.upper[1]
    }
}

/// Implicit description of the physical domain inside the grid box:
/// points with negative value belong to the domain.
#[derive(Clone, Debug, PartialEq)]
pub enum LevelSet {
    /// Constant value everywhere; `Uniform(-1.0)` is the full box.
    Uniform(f64),
    /// Box minus a disc: `radius - |x - center|`.
    BallHole { center: Point, radius: f64 },
    /// Box minus the half-plane `normal · x > offset`.
    HalfPlane { normal: Point, offset: f64 },
}

impl LevelSet {
    pub fn full_box() -> Self {
        LevelSet::Uniform(-1.0)
    }

    pub fn value(&self, x: Point) -> f64 {
        match self {
            LevelSet::Uniform(v) => *v,
            LevelSet::BallHole { center, radius } => radius - ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)).sqrt(),
            LevelSet::HalfPlane { normal, offset } => normal[0] * x[0] + normal[1] * x[1] - offset,
        }
    }

    /// Value with magnitudes below `1e-12 h` snapped to zero, so that grid
    /// points lying on the interface are classified consistently.
    pub fn value_snapped(&self, x: Point, h: f64) -> f64 {
        let v = self.value(x);
        if v.abs() <= 1e-12 * h {
            0.0
        } else {
            v
        }
    }

    /// Validates that the hole lies strictly inside the box.
    pub fn validate(&self, grid: &BackgroundGrid) -> Result<()> {
        if let LevelSet::BallHole { center, radius } = self {
            if !(*radius > 0.0) {
                return Err(RomError::InvalidArgument(format!("hole radius must be positive, got {radius}")));
            }
            let lo = grid.lower();
            let hi = grid.upper();
            if center[0] - radius <= lo[0] || center[0] + radius >= hi[0] || center[1] - radius <= lo[1] || center[1] + radius >= hi[1] {
                return Err(RomError::InvalidArgument(format!("hole B({center:?}, {radius}) is not strictly inside the box")));
            }
        }
        Ok(())
    }
}
