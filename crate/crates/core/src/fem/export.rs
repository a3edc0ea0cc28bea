//! VTK unstructured-grid (`.vtu`, appended raw binary, little-endian) and
//! CSV export of nodal fields.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::deformation::DeformationField;
use crate::error::{Result, RomError};
use crate::geometry::BackgroundGrid;
use crate::Point;

const VTK_QUAD: u8 = 9;

#[derive(Clone, Debug, Default)]
pub struct VtuMesh {
    pub points: Vec<Point>,
    /// Quadrilaterals as four point indices in counter-clockwise order.
    pub quads: Vec<[usize; 4]>,
}

#[derive(Clone, Debug)]
pub struct PointField {
    pub name: String,
    pub components: usize,
    pub values: Vec<f64>,
}

impl VtuMesh {
    /// Sub-quadrilateral mesh of `cells` on the order-`p` node lattice,
    /// optionally moved by a deformation of the same order.
    pub fn from_cells(grid: &BackgroundGrid, p: usize, cells: &[usize], def: Option<&DeformationField>) -> Result<Self> {
        if let Some(d) = def {
            if d.order() != p {
                return Err(RomError::InvalidArgument("deformation order differs from export order".into()));
            }
        }
        let points = (0..grid.n_nodes(p))
            .map(|n| {
                let x = grid.node_coord(p, n);
                match def {
                    Some(d) => [x[0] + d.nodal()[n][0], x[1] + d.nodal()[n][1]],
                    None => x,
                }
            })
            .collect();
        let mut quads = Vec::with_capacity(cells.len() * p * p);
        for &c in cells {
            let nodes = grid.cell_nodes(p, c);
            for b in 0..p {
                for a in 0..p {
                    let l = |i: usize, j: usize| nodes[i + (p + 1) * j];
                    quads.push([l(a, b), l(a + 1, b), l(a + 1, b + 1), l(a, b + 1)]);
                }
            }
        }
        Ok(VtuMesh { points, quads })
    }
}

fn block<T: Copy>(out: &mut Vec<u8>, data: &[T], to_bytes: impl Fn(T) -> Vec<u8>) -> usize {
    let start = out.len();
    let bytes: Vec<u8> = data.iter().flat_map(|&v| to_bytes(v)).collect();
    out.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(&bytes);
    start
}

/// Writes an unstructured grid with point data to `path`.
pub fn write_vtu(path: &Path, mesh: &VtuMesh, fields: &[PointField]) -> Result<()> {
    for f in fields {
        if f.values.len() != f.components * mesh.points.len() {
            return Err(RomError::DimensionMismatch(format!("field {} has {} values for {} points", f.name, f.values.len(), mesh.points.len())));
        }
    }
    let mut data = Vec::new();
    let mut header = String::new();
    header.push_str("<?xml version=\"1.0\"?>\n");
    header.push_str("<VTKFile type=\"UnstructuredGrid\" version=\"1.0\" byte_order=\"LittleEndian\" header_type=\"UInt64\">\n");
    header.push_str("  <UnstructuredGrid>\n");
    header.push_str(&format!("    <Piece NumberOfPoints=\"{}\" NumberOfCells=\"{}\">\n", mesh.points.len(), mesh.quads.len()));
    header.push_str("      <PointData>\n");
    for f in fields {
        let off = block(&mut data, &f.values, |v: f64| v.to_le_bytes().to_vec());
        header.push_str(&format!(
            "        <DataArray type=\"Float64\" Name=\"{}\" NumberOfComponents=\"{}\" format=\"appended\" offset=\"{off}\"/>\n",
            f.name, f.components
        ));
    }
    header.push_str("      </PointData>\n");
    let coords: Vec<f64> = mesh.points.iter().flat_map(|p| [p[0], p[1], 0.0]).collect();
    let off = block(&mut data, &coords, |v: f64| v.to_le_bytes().to_vec());
    header.push_str("      <Points>\n");
    header.push_str(&format!("        <DataArray type=\"Float64\" NumberOfComponents=\"3\" format=\"appended\" offset=\"{off}\"/>\n"));
    header.push_str("      </Points>\n");
    let conn: Vec<i64> = mesh.quads.iter().flat_map(|q| q.iter().map(|&i| i as i64)).collect();
    let offsets: Vec<i64> = (1..=mesh.quads.len()).map(|k| 4 * k as i64).collect();
    let types: Vec<u8> = vec![VTK_QUAD; mesh.quads.len()];
    let o1 = block(&mut data, &conn, |v: i64| v.to_le_bytes().to_vec());
    let o2 = block(&mut data, &offsets, |v: i64| v.to_le_bytes().to_vec());
    let o3 = block(&mut data, &types, |v: u8| vec![v]);
    header.push_str("      <Cells>\n");
    header.push_str(&format!("        <DataArray type=\"Int64\" Name=\"connectivity\" format=\"appended\" offset=\"{o1}\"/>\n"));
    header.push_str(&format!("        <DataArray type=\"Int64\" Name=\"offsets\" format=\"appended\" offset=\"{o2}\"/>\n"));
    header.push_str(&format!("        <DataArray type=\"UInt8\" Name=\"types\" format=\"appended\" offset=\"{o3}\"/>\n"));
    header.push_str("      </Cells>\n");
    header.push_str("    </Piece>\n  </UnstructuredGrid>\n  <AppendedData encoding=\"raw\">\n   _");
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(header.as_bytes())?;
    w.write_all(&data)?;
    w.write_all(b"\n  </AppendedData>\n</VTKFile>\n")?;
    w.flush()?;
    Ok(())
}

/// Writes `x,y,<field columns>` for every listed node.
pub fn write_nodal_csv(path: &Path, coords: &[Point], fields: &[PointField], nodes: &[usize]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let mut head = vec!["x".to_string(), "y".to_string()];
    for f in fields {
        if f.components == 1 {
            head.push(f.name.clone());
        } else {
            head.extend((0..f.components).map(|c| format!("{}_{c}", f.name)));
        }
    }
    writeln!(w, "{}", head.join(","))?;
    for &n in nodes {
        let mut row = vec![format!("{:.17e}", coords[n][0]), format!("{:.17e}", coords[n][1])];
        for f in fields {
            for c in 0..f.components {
                row.push(format!("{:.17e}", f.values[n * f.components + c]));
            }
        }
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vtu_layout_and_sizes() {
        let g = BackgroundGrid::new([0.0, 0.0], [1.0, 1.0], [2, 2]).unwrap();
        let mesh = VtuMesh::from_cells(&g, 2, &[0, 1, 2, 3], None).unwrap();
        assert_eq!(mesh.points.len(), 25);
        assert_eq!(mesh.quads.len(), 16);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.vtu");
        let vals: Vec<f64> = mesh.points.iter().map(|p| p[0] + p[1]).collect();
        write_vtu(&path, &mesh, &[PointField { name: "u".into(), components: 1, values: vals.clone() }]).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let text = String::from_utf8_lossy(&bytes);
        assert!(text.contains("byte_order=\"LittleEndian\""));
        let start = bytes.windows(2).position(|w| w == b" _").unwrap() + 2;
        let len = u64::from_le_bytes(bytes[start..start + 8].try_into().unwrap()) as usize;
        assert_eq!(len, 25 * 8);
        let first = f64::from_le_bytes(bytes[start + 8..start + 16].try_into().unwrap());
        assert_eq!(first, vals[0]);
    }
}
