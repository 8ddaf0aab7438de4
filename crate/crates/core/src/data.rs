//! Snapshot ingestion, pairing, and matrix file formats.
//!
//! Snapshots are stored column-per-time-instant: a state trajectory of
//! `M + 1` states in `R^d` becomes a `d x (M+1)` matrix whose column `j` is
//! the state at time `j * dt`. Pairing shifts that trajectory into the two
//! `d x M` matrices `X` (columns `0..M`) and `Y` (columns `1..=M`).
//!
//! Two on-disk matrix formats are supported:
//!
//! * `KMX1` binary: magic bytes `KMX1`, `u64` rows, `u64` cols, `u8` kind
//!   flag (0 real, 1 complex), then little-endian `f64` payload in row-major
//!   order (complex entries interleaved re, im). Round-trips are bit-exact.
//! * CSV: one row per state dimension, comma-separated decimal values.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Magic bytes identifying the binary matrix format.
pub const KMX_MAGIC: [u8; 4] = *b"KMX1";

/// A real or complex matrix loaded from disk.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixData {
    Real(Array2<f64>),
    Complex(Array2<Complex64>),
}

impl MatrixData {
    pub fn rows(&self) -> usize {
        match self {
            MatrixData::Real(m) => m.nrows(),
            MatrixData::Complex(m) => m.nrows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            MatrixData::Real(m) => m.ncols(),
            MatrixData::Complex(m) => m.ncols(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            MatrixData::Real(_) => "real",
            MatrixData::Complex(_) => "complex",
        }
    }

    /// Unwrap a real matrix, rejecting complex payloads.
    pub fn into_real(self) -> Result<Array2<f64>> {
        match self {
            MatrixData::Real(m) => Ok(m),
            MatrixData::Complex(_) => Err(Error::InvalidArgument(
                "expected a real matrix, found a complex one".into(),
            )),
        }
    }
}

/// Paired snapshot matrices of a dynamical system.
///
/// `X` and `Y` are `d x M`; column `j` of `Y` is the state observed one
/// sampling interval `dt` after column `j` of `X`. Immutable once built and
/// safe to share across threads.
#[derive(Debug, Clone)]
pub struct SnapshotSet {
    x: Array2<f64>,
    y: Array2<f64>,
    dt: f64,
}

impl SnapshotSet {
    /// Pair a single trajectory of `M + 1` states into `(X, Y)`.
    pub fn from_trajectory(trajectory: ArrayView2<'_, f64>, dt: f64) -> Result<Self> {
        let (d, n) = trajectory.dim();
        if d == 0 {
            return Err(Error::InsufficientData(
                "trajectory has zero state dimension".into(),
            ));
        }
        if n < 2 {
            return Err(Error::InsufficientData(format!(
                "trajectory has {n} snapshot(s); at least 2 are required to form a pair"
            )));
        }
        let x = trajectory.slice(ndarray::s![.., ..n - 1]).to_owned();
        let y = trajectory.slice(ndarray::s![.., 1..]).to_owned();
        Self::from_pairs(x, y, dt)
    }

    /// Build from explicit `(X, Y)` pairs. This covers data assembled from
    /// multiple trajectories, where the shift-pairing rule does not apply.
    pub fn from_pairs(x: Array2<f64>, y: Array2<f64>, dt: f64) -> Result<Self> {
        if x.dim() != y.dim() {
            return Err(Error::DimensionMismatch(format!(
                "X is {:?} but Y is {:?}",
                x.dim(),
                y.dim()
            )));
        }
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InsufficientData(
                "snapshot matrices must be at least 1 x 1".into(),
            ));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "sampling interval dt must be positive and finite, got {dt}"
            )));
        }
        Ok(SnapshotSet { x, y, dt })
    }

    /// State dimension `d`.
    pub fn state_dim(&self) -> usize {
        self.x.nrows()
    }

    /// Number of snapshot pairs `M`.
    pub fn num_pairs(&self) -> usize {
        self.x.ncols()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn y(&self) -> ArrayView2<'_, f64> {
        self.y.view()
    }

    /// Restrict to the pairs at the given column indices.
    pub fn select_pairs(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.num_pairs()) {
            return Err(Error::InvalidArgument(format!(
                "pair index {bad} out of range for M = {}",
                self.num_pairs()
            )));
        }
        SnapshotSet::from_pairs(
            self.x.select(Axis(1), indices),
            self.y.select(Axis(1), indices),
            self.dt,
        )
    }
}

fn format_err(offset: u64, message: impl Into<String>) -> Error {
    Error::Format {
        offset,
        message: message.into(),
    }
}

/// Write a matrix in the `KMX1` binary format.
pub fn save_matrix(m: &MatrixData, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::with_capacity(13 + 8 * m.rows() * m.cols());
    buf.extend_from_slice(&KMX_MAGIC);
    buf.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    buf.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    match m {
        MatrixData::Real(a) => {
            buf.push(0u8);
            for &v in a.iter() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        MatrixData::Complex(a) => {
            buf.push(1u8);
            for v in a.iter() {
                buf.extend_from_slice(&v.re.to_le_bytes());
                buf.extend_from_slice(&v.im.to_le_bytes());
            }
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

pub fn save_real_matrix(m: ArrayView2<'_, f64>, path: impl AsRef<Path>) -> Result<()> {
    save_matrix(&MatrixData::Real(m.to_owned()), path)
}

pub fn save_complex_matrix(m: ArrayView2<'_, Complex64>, path: impl AsRef<Path>) -> Result<()> {
    save_matrix(&MatrixData::Complex(m.to_owned()), path)
}

/// Read a matrix in the `KMX1` binary format.
pub fn load_matrix(path: impl AsRef<Path>) -> Result<MatrixData> {
    let bytes = fs::read(&path)?;
    parse_kmx(&bytes)
}

fn parse_kmx(bytes: &[u8]) -> Result<MatrixData> {
    if bytes.len() < 4 || bytes[..4] != KMX_MAGIC {
        return Err(format_err(0, "missing KMX1 magic bytes"));
    }
    if bytes.len() < 21 {
        return Err(format_err(bytes.len() as u64, "truncated KMX1 header"));
    }
    let rows = u64::from_le_bytes(bytes[4..12].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let kind = bytes[20];
    let values_per_entry: u64 = match kind {
        0 => 1,
        1 => 2,
        k => return Err(format_err(20, format!("unknown kind flag {k}"))),
    };
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(values_per_entry * 8))
        .ok_or_else(|| format_err(4, "dimension overflow"))?;
    let payload = &bytes[21..];
    if payload.len() as u64 != expected {
        return Err(format_err(
            21 + payload.len().min(expected as usize) as u64,
            format!(
                "payload is {} bytes, expected {} for {} x {} {}",
                payload.len(),
                expected,
                rows,
                cols,
                if kind == 0 { "real" } else { "complex" }
            ),
        ));
    }
    let (rows, cols) = (rows as usize, cols as usize);
    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    if kind == 0 {
        let data: Vec<f64> = values.collect();
        let m = Array2::from_shape_vec((rows, cols), data)
            .map_err(|e| format_err(21, e.to_string()))?;
        Ok(MatrixData::Real(m))
    } else {
        let mut data = Vec::with_capacity(rows * cols);
        while let (Some(re), Some(im)) = (values.next(), values.next()) {
            data.push(Complex64::new(re, im));
        }
        let m = Array2::from_shape_vec((rows, cols), data)
            .map_err(|e| format_err(21, e.to_string()))?;
        Ok(MatrixData::Complex(m))
    }
}

/// Write a real matrix as CSV, one row per state dimension.
///
/// Values use Rust's shortest round-trip decimal formatting, so a
/// write-read cycle reproduces every `f64` exactly.
pub fn save_matrix_csv(m: ArrayView2<'_, f64>, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for row in m.rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            first = false;
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a real matrix from CSV. Reports the byte offset of the first
/// malformed field on failure.
pub fn load_matrix_csv(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let text = fs::read_to_string(&path)?;
    let mut values = Vec::new();
    let mut cols: Option<usize> = None;
    let mut rows = 0usize;
    let mut offset = 0u64;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim_end_matches(['\n', '\r']);
        if !trimmed.is_empty() {
            let mut field_offset = offset;
            let mut count = 0usize;
            for field in trimmed.split(',') {
                let v: f64 = field.trim().parse().map_err(|_| {
                    format_err(field_offset, format!("cannot parse {field:?} as a number"))
                })?;
                values.push(v);
                count += 1;
                field_offset += field.len() as u64 + 1;
            }
            match cols {
                None => cols = Some(count),
                Some(c) if c != count => {
                    return Err(format_err(
                        offset,
                        format!("row {rows} has {count} columns, expected {c}"),
                    ));
                }
                _ => {}
            }
            rows += 1;
        }
        offset += line.len() as u64;
    }
    let cols = cols.unwrap_or(0);
    Array2::from_shape_vec((rows, cols), values).map_err(|e| format_err(0, e.to_string()))
}

/// Load a real matrix from either format, sniffing the KMX1 magic bytes.
pub fn load_real_matrix_auto(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let mut head = [0u8; 4];
    let is_kmx = match fs::File::open(path) {
        Ok(mut f) => {
            use std::io::Read;
            matches!(f.read_exact(&mut head), Ok(())) && head == KMX_MAGIC
        }
        Err(e) => return Err(e.into()),
    };
    if is_kmx {
        load_matrix(path)?.into_real()
    } else {
        load_matrix_csv(path)
    }
}

/// Load a trajectory file (KMX1 or CSV, `d x (M+1)`) and shift-pair it.
pub fn load_snapshots(path: impl AsRef<Path>, dt: f64) -> Result<SnapshotSet> {
    let trajectory = load_real_matrix_auto(path)?;
    SnapshotSet::from_trajectory(trajectory.view(), dt)
}

/// Load explicit `X` and `Y` matrices from two files.
pub fn load_snapshot_pair(
    x_path: impl AsRef<Path>,
    y_path: impl AsRef<Path>,
    dt: f64,
) -> Result<SnapshotSet> {
    let x = load_real_matrix_auto(x_path)?;
    let y = load_real_matrix_auto(y_path)?;
    SnapshotSet::from_pairs(x, y, dt)
}
