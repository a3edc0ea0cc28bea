//! Quadrature on the physical part of active cells.
//!
//! Cut cells are split into four triangles through the cell center; the
//! level set is interpolated linearly on each triangle and the triangle is
//! clipped to its negative part. Points are stored in cell-local coordinates
//! `[0, 1]²`, weights in reference-configuration units.

use super::{BackgroundGrid, CellClassification, CellLabel, LevelSet};
use crate::error::{Result, RomError};
use crate::quadrature::{segment_rule, square_rule, triangle_rule};
use crate::Point;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub fn normal(self) -> Point {
        match self {
            Side::Left => [-1.0, 0.0],
            Side::Right => [1.0, 0.0],
            Side::Bottom => [0.0, -1.0],
            Side::Top => [0.0, 1.0],
        }
    }

    pub fn all() -> [Side; 4] {
        [Side::Left, Side::Right, Side::Bottom, Side::Top]
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
            Side::Bottom => "bottom",
            Side::Top => "top",
        }
    }

    pub fn parse(s: &str) -> Option<Side> {
        Side::all().into_iter().find(|side| side.name() == s.trim())
    }
}

/// Part of the boundary a surface point belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    /// The immersed interface (hole boundary).
    Interface,
    /// A side of the background box.
    Face(Side),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfacePoint {
    pub local: Point,
    pub weight: f64,
    pub normal: Point,
    pub tag: BoundaryTag,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellQuadrature {
    pub cell: usize,
    pub bulk_local: Vec<Point>,
    pub bulk_weights: Vec<f64>,
    pub surface: Vec<SurfacePoint>,
}

impl CellQuadrature {
    pub fn area(&self) -> f64 {
        self.bulk_weights.iter().sum()
    }
}

/// Quadrature for every active cell.
#[derive(Clone, Debug, PartialEq)]
pub struct GeometryQuadrature {
    pub n_points: usize,
    pub cells: Vec<CellQuadrature>,
    position: Vec<Option<usize>>,
}

impl GeometryQuadrature {
    /// Builds quadrature with `n_points` Gauss points per direction.
    pub fn build(grid: &BackgroundGrid, cls: &CellClassification, ls: &LevelSet, n_points: usize) -> Result<Self> {
        let mut cells = Vec::with_capacity(cls.active_cells.len());
        let mut position = vec![None; grid.n_cells()];
        for &c in &cls.active_cells {
            let q = match cls.label(c) {
                CellLabel::Internal => internal_quadrature(grid, c, ls, n_points),
                CellLabel::Cut => build_cut_quadrature(grid, c, ls, n_points)?,
                CellLabel::External => unreachable!("external cells are not active"),
            };
            position[c] = Some(cells.len());
            cells.push(q);
        }
        Ok(GeometryQuadrature { n_points, cells, position })
    }

    pub fn cell(&self, c: usize) -> Result<&CellQuadrature> {
        self.position.get(c).copied().flatten().map(|k| &self.cells[k]).ok_or(RomError::MissingQuadrature(c))
    }

    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| c.area()).sum()
    }

    pub fn boundary_length(&self, tag: BoundaryTag) -> f64 {
        self.cells.iter().flat_map(|c| c.surface.iter()).filter(|s| s.tag == tag).map(|s| s.weight).sum()
    }
}

fn internal_quadrature(grid: &BackgroundGrid, c: usize, ls: &LevelSet, n: usize) -> CellQuadrature {
    let r = square_rule(n);
    let s = grid.spacing();
    let mut q = CellQuadrature {
        cell: c,
        bulk_local: r.points,
        bulk_weights: r.weights.iter().map(|w| w * s[0] * s[1]).collect(),
        surface: Vec::new(),
    };
    add_box_faces(grid, c, ls, n, &mut q);
    q
}

/// Quadrature of the physical part of a cut cell, including interface and
/// box-face segments.
pub fn build_cut_quadrature(grid: &BackgroundGrid, c: usize, ls: &LevelSet, n: usize) -> Result<CellQuadrature> {
    let v = grid.vertices(c);
    let center = grid.cell_center(c);
    let fc = ls.value_snapped(center, grid.h());
    let fv: Vec<f64> = v.iter().map(|&x| ls.value_snapped(x, grid.h())).collect();
    let mut q = CellQuadrature { cell: c, bulk_local: Vec::new(), bulk_weights: Vec::new(), surface: Vec::new() };
    for k in 0..4 {
        let tri = [center, v[k], v[(k + 1) % 4]];
        let vals = [fc, fv[k], fv[(k + 1) % 4]];
        let poly = clip_negative(&tri, &vals);
        for t in 1..poly.len().saturating_sub(1) {
            let r = triangle_rule(poly[0], poly[t], poly[t + 1], n);
            for (p, w) in r.points.iter().zip(&r.weights) {
                if *w > 0.0 {
                    q.bulk_local.push(grid.to_local(c, *p));
                    q.bulk_weights.push(*w);
                }
            }
        }
        if let Some((a, b)) = zero_segment(&tri, &vals) {
            let normal = linear_gradient(&tri, &vals);
            let r = segment_rule(a, b, n);
            for (p, w) in r.points.iter().zip(&r.weights) {
                q.surface.push(SurfacePoint { local: grid.to_local(c, *p), weight: *w, normal, tag: BoundaryTag::Interface });
            }
        }
    }
    if q.bulk_local.is_empty() {
        return Err(RomError::MissingQuadrature(c));
    }
    add_box_faces(grid, c, ls, n, &mut q);
    Ok(q)
}

fn add_box_faces(grid: &BackgroundGrid, c: usize, ls: &LevelSet, n: usize, q: &mut CellQuadrature) {
    let v = grid.vertices(c);
    for side in grid.boundary_sides(c) {
        let (a, b) = match side {
            Side::Bottom => (v[0], v[1]),
            Side::Right => (v[1], v[2]),
            Side::Top => (v[2], v[3]),
            Side::Left => (v[3], v[0]),
        };
        let (fa, fb) = (ls.value_snapped(a, grid.h()), ls.value_snapped(b, grid.h()));
        let seg = if fa <= 0.0 && fb <= 0.0 {
            Some((a, b))
        } else if fa > 0.0 && fb > 0.0 {
            None
        } else {
            let t = fa / (fa - fb);
            let m = lerp(a, b, t);
            if fa <= 0.0 { Some((a, m)) } else { Some((m, b)) }
        };
        if let Some((a, b)) = seg {
            let r = segment_rule(a, b, n);
            for (p, w) in r.points.iter().zip(&r.weights) {
                if *w > 0.0 {
                    q.surface.push(SurfacePoint { local: grid.to_local(c, *p), weight: *w, normal: side.normal(), tag: BoundaryTag::Face(side) });
                }
            }
        }
    }
}

fn lerp(a: Point, b: Point, t: f64) -> Point {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

/// Negative part of a triangle under a linear level set (Sutherland-Hodgman).
fn clip_negative(tri: &[Point; 3], vals: &[f64; 3]) -> Vec<Point> {
    let mut out = Vec::with_capacity(4);
    for i in 0..3 {
        let j = (i + 1) % 3;
        if vals[i] <= 0.0 {
            out.push(tri[i]);
        }
        if (vals[i] < 0.0 && vals[j] > 0.0) || (vals[i] > 0.0 && vals[j] < 0.0) {
            out.push(lerp(tri[i], tri[j], vals[i] / (vals[i] - vals[j])));
        }
    }
    out
}

/// Zero segment of a linear level set on a triangle that owns negative area.
fn zero_segment(tri: &[Point; 3], vals: &[f64; 3]) -> Option<(Point, Point)> {
    if !vals.iter().any(|&v| v < 0.0) || !vals.iter().any(|&v| v >= 0.0) {
        return None;
    }
    let mut pts: Vec<Point> = Vec::with_capacity(3);
    for i in 0..3 {
        let j = (i + 1) % 3;
        if vals[i] == 0.0 {
            pts.push(tri[i]);
        }
        if (vals[i] < 0.0 && vals[j] > 0.0) || (vals[i] > 0.0 && vals[j] < 0.0) {
            pts.push(lerp(tri[i], tri[j], vals[i] / (vals[i] - vals[j])));
        }
    }
    if pts.len() != 2 {
        return None;
    }
    let d = ((pts[1][0] - pts[0][0]).powi(2) + (pts[1][1] - pts[0][1]).powi(2)).sqrt();
    if d == 0.0 {
        return None;
    }
    Some((pts[0], pts[1]))
}

/// Unit gradient of the linear interpolant on a triangle.
fn linear_gradient(tri: &[Point; 3], vals: &[f64; 3]) -> Point {
    let (e1, e2) = ([tri[1][0] - tri[0][0], tri[1][1] - tri[0][1]], [tri[2][0] - tri[0][0], tri[2][1] - tri[0][1]]);
    let det = e1[0] * e2[1] - e1[1] * e2[0];
    let (d1, d2) = (vals[1] - vals[0], vals[2] - vals[0]);
    let g = [(d1 * e2[1] - d2 * e1[1]) / det, (e1[0] * d2 - e2[0] * d1) / det];
    let n = (g[0] * g[0] + g[1] * g[1]).sqrt();
    [g[0] / n, g[1] / n]
}
