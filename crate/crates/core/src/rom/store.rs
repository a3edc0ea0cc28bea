//! Directory-based array store: `manifest.txt` (key=value lines) plus
//! `data.bin` (raw little-endian f64, column-major).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use faer::{Mat, MatRef};

use crate::error::{Result, RomError};
use crate::linalg::DMat;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnapshotKind {
    Solution,
    Rhs,
    LhsVectorized,
}

impl SnapshotKind {
    pub fn name(self) -> &'static str {
        match self {
            SnapshotKind::Solution => "solution",
            SnapshotKind::Rhs => "rhs",
            SnapshotKind::LhsVectorized => "lhs-vectorized",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [SnapshotKind::Solution, SnapshotKind::Rhs, SnapshotKind::LhsVectorized].into_iter().find(|k| k.name() == s)
    }
}

/// Generic stored array with free-form metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct StoredArray {
    pub kind: String,
    pub shape: Vec<usize>,
    pub parameters: Vec<Vec<f64>>,
    pub meta: BTreeMap<String, String>,
    pub data: Vec<f64>,
}

impl StoredArray {
    pub fn from_matrix(kind: &str, m: MatRef<'_, f64>) -> Self {
        let data = (0..m.ncols()).flat_map(|j| (0..m.nrows()).map(move |i| m[(i, j)])).collect();
        StoredArray { kind: kind.to_string(), shape: vec![m.nrows(), m.ncols()], parameters: Vec::new(), meta: BTreeMap::new(), data }
    }

    pub fn from_vector(kind: &str, v: &[f64]) -> Self {
        StoredArray { kind: kind.to_string(), shape: vec![v.len()], parameters: Vec::new(), meta: BTreeMap::new(), data: v.to_vec() }
    }

    /// Interprets the array as a matrix whose last axis indexes columns.
    pub fn to_matrix(&self) -> Result<DMat> {
        let cols = if self.shape.len() > 1 { *self.shape.last().unwrap() } else { 1 };
        let rows = if cols == 0 { 0 } else { self.data.len() / cols };
        if rows * cols != self.data.len() {
            return Err(RomError::Store(format!("shape {:?} does not match {} values", self.shape, self.data.len())));
        }
        Ok(Mat::from_fn(rows, cols, |i, j| self.data[i + rows * j]))
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }
}

fn join<T: ToString>(v: &[T], sep: &str) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

pub fn write_array(dir: &Path, a: &StoredArray) -> Result<()> {
    if a.shape.iter().product::<usize>() != a.data.len() {
        return Err(RomError::Store(format!("shape {:?} does not match {} values", a.shape, a.data.len())));
    }
    fs::create_dir_all(dir)?;
    let mut m = String::new();
    m.push_str(&format!("kind={}\n", a.kind));
    m.push_str(&format!("shape={}\n", join(&a.shape, ",")));
    m.push_str("dtype=f64\nendianness=little\n");
    let params: Vec<String> = a.parameters.iter().map(|p| join(p, ":")).collect();
    m.push_str(&format!("parameters={}\n", params.join(";")));
    for (k, v) in &a.meta {
        m.push_str(&format!("{k}={v}\n"));
    }
    fs::write(dir.join("manifest.txt"), m)?;
    let bytes: Vec<u8> = a.data.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(dir.join("data.bin"), bytes)?;
    Ok(())
}

fn parse_list<T: std::str::FromStr>(s: &str, sep: char) -> Result<Vec<T>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(sep).map(|t| t.trim().parse::<T>().map_err(|_| RomError::Store(format!("cannot parse '{t}'")))).collect()
}

pub fn read_array(dir: &Path) -> Result<StoredArray> {
    let text = fs::read_to_string(dir.join("manifest.txt")).map_err(|e| RomError::Store(format!("{}: {e}", dir.display())))?;
    let mut fields = BTreeMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line.split_once('=').ok_or_else(|| RomError::Store(format!("bad manifest line '{line}'")))?;
        fields.insert(k.trim().to_string(), v.trim().to_string());
    }
    let mut take = |k: &str| fields.remove(k).ok_or_else(|| RomError::Store(format!("manifest misses '{k}'")));
    let kind = take("kind")?;
    let shape: Vec<usize> = parse_list(&take("shape")?, ',')?;
    if take("dtype")? != "f64" {
        return Err(RomError::Store("only f64 data is supported".into()));
    }
    if take("endianness")? != "little" {
        return Err(RomError::Store("only little-endian data is supported".into()));
    }
    let parameters = take("parameters")?
        .split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| parse_list::<f64>(p, ':'))
        .collect::<Result<Vec<_>>>()?;
    let bytes = fs::read(dir.join("data.bin"))?;
    let expected: usize = shape.iter().product();
    if bytes.len() != 8 * expected {
        return Err(RomError::Store(format!("data.bin has {} bytes, expected {}", bytes.len(), 8 * expected)));
    }
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok(StoredArray { kind, shape, parameters, meta: fields, data })
}

/// Snapshots of one kind, one column per parameter. `split_axes` records
/// the spatial factorization of the row index (first axis fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotSet {
    pub kind: SnapshotKind,
    pub data: DMat,
    pub parameters: Vec<Vec<f64>>,
    pub split_axes: Option<Vec<usize>>,
}

impl SnapshotSet {
    pub fn new(kind: SnapshotKind, columns: &[Vec<f64>], parameters: Vec<Vec<f64>>) -> Result<Self> {
        let rows = columns.first().map_or(0, |c| c.len());
        if columns.iter().any(|c| c.len() != rows) || columns.len() != parameters.len() {
            return Err(RomError::DimensionMismatch("ragged snapshot columns".into()));
        }
        Ok(SnapshotSet { kind, data: crate::linalg::from_columns(rows, columns), parameters, split_axes: None })
    }

    pub fn n_snapshots(&self) -> usize {
        self.data.ncols()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut a = StoredArray::from_matrix(self.kind.name(), self.data.as_ref());
        if let Some(ax) = &self.split_axes {
            let mut shape = ax.clone();
            shape.push(self.data.ncols());
            a.shape = shape;
        }
        a.parameters = self.parameters.clone();
        write_array(dir, &a)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let a = read_array(dir)?;
        let kind = SnapshotKind::parse(&a.kind).ok_or_else(|| RomError::Store(format!("unknown snapshot kind '{}'", a.kind)))?;
        let data = a.to_matrix()?;
        let split_axes = if a.shape.len() > 2 { Some(a.shape[..a.shape.len() - 1].to_vec()) } else { None };
        Ok(SnapshotSet { kind, data, parameters: a.parameters, split_axes })
    }

    /// Column subset, in the given order.
    pub fn select(&self, cols: &[usize]) -> SnapshotSet {
        SnapshotSet {
            kind: self.kind,
            data: Mat::from_fn(self.data.nrows(), cols.len(), |i, j| self.data[(i, cols[j])]),
            parameters: cols.iter().map(|&c| self.parameters[c].clone()).collect(),
            split_axes: self.split_axes.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cols = vec![vec![1.0, -2.5e-300, std::f64::consts::PI], vec![0.1, 0.2, f64::MAX]];
        let mut s = SnapshotSet::new(SnapshotKind::Solution, &cols, vec![vec![0.1, 0.3], vec![-0.4, 1e-17]]).unwrap();
        s.split_axes = Some(vec![3]);
        s.save(dir.path()).unwrap();
        let r = SnapshotSet::load(dir.path()).unwrap();
        assert_eq!(r.data.nrows(), 3);
        for j in 0..2 {
            for i in 0..3 {
                assert_eq!(r.data[(i, j)].to_bits(), s.data[(i, j)].to_bits());
            }
        }
        assert_eq!(r.parameters, s.parameters);
    }

    #[test]
    fn split_axes_survive() {
        let dir = tempfile::tempdir().unwrap();
        let cols = vec![vec![1.0; 6], vec![2.0; 6]];
        let mut s = SnapshotSet::new(SnapshotKind::Solution, &cols, vec![vec![0.0], vec![1.0]]).unwrap();
        s.split_axes = Some(vec![2, 3]);
        s.save(dir.path()).unwrap();
        let a = read_array(dir.path()).unwrap();
        assert_eq!(a.shape, vec![2, 3, 2]);
        assert_eq!(SnapshotSet::load(dir.path()).unwrap().split_axes, Some(vec![2, 3]));
    }

    #[test]
    fn corrupt_store_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_array(dir.path(), &StoredArray::from_vector("x", &[1.0, 2.0])).unwrap();
        std::fs::write(dir.path().join("data.bin"), [0u8; 5]).unwrap();
        assert!(read_array(dir.path()).is_err());
    }
}
