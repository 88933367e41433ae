//! Dense vectors and matrices plus the exact products used as ground truth.
//!
//! All arithmetic is `f64` and every reduction accumulates left to right
//! without compensation, so oracle code that wants bit-level agreement must
//! sum in the same order.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector {
    entries: Vec<f64>,
}

impl DenseVector {
    /// Builds a vector, rejecting empty input and NaN entries.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidInput("vector length must be at least 1".into()));
        }
        if let Some(j) = entries.iter().position(|x| x.is_nan()) {
            return Err(Error::InvalidInput(format!("NaN at vector entry {j}")));
        }
        Ok(Self { entries })
    }

    pub fn filled(len: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; len])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.entries
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().fold(0.0, |acc, x| acc + x * x)
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!(
                "matrix shape {rows}x{cols} must be at least 1x1"
            )));
        }
        if rows.checked_mul(cols) != Some(entries.len()) {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix given {} entries",
                entries.len()
            )));
        }
        if let Some(p) = entries.iter().position(|x| x.is_nan()) {
            return Err(Error::InvalidInput(format!(
                "NaN at matrix entry ({}, {})",
                p / cols,
                p % cols
            )));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::new(r, c, rows.iter().flat_map(|row| row.iter().copied()).collect())
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Result<Self> {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Self::zeros(n, n)?;
        for i in 0..n {
            m.entries[i * n + i] = 1.0;
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    /// The `j`-th column `X[:, j]` (0-based), copied out.
    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// The `j`-th row `X[j, :]` (0-based).
    pub fn row(&self, j: usize) -> &[f64] {
        &self.entries[j * self.cols..(j + 1) * self.cols]
    }

    pub fn col_norm_sq(&self, j: usize) -> f64 {
        (0..self.rows).fold(0.0, |acc, i| {
            let x = self.get(i, j);
            acc + x * x
        })
    }

    pub fn row_norm_sq(&self, j: usize) -> f64 {
        self.row(j).iter().fold(0.0, |acc, x| acc + x * x)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|&x| f(x)).collect(),
        }
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, entries: Vec<f64>) -> Self {
        debug_assert_eq!(rows * cols, entries.len());
        Self { rows, cols, entries }
    }
}

pub fn exact_inner(a: &DenseVector, b: &DenseVector) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "inner product of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.as_slice()
        .iter()
        .zip(b.as_slice())
        .fold(0.0, |acc, (x, y)| acc + x * y))
}

/// Full `m×d` product; each entry is summed over `j` in increasing order.
pub fn exact_matmul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols() != b.rows() {
        return Err(Error::DimensionMismatch(format!(
            "product of {}x{} and {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let (m, n, d) = (a.rows(), a.cols(), b.cols());
    let mut out = vec![0.0; m * d];
    for i in 0..m {
        let a_row = a.row(i);
        let out_row = &mut out[i * d..(i + 1) * d];
        for (j, &aij) in a_row.iter().enumerate().take(n) {
            for (o, &bjk) in out_row.iter_mut().zip(b.row(j)) {
                *o += aij * bjk;
            }
        }
    }
    Ok(DenseMatrix::from_raw(m, d, out))
}

/// Column-stacking `vec(X)`.
pub fn vectorize(x: &DenseMatrix) -> DenseVector {
    let mut out = Vec::with_capacity(x.rows() * x.cols());
    for j in 0..x.cols() {
        for i in 0..x.rows() {
            out.push(x.get(i, j));
        }
    }
    DenseVector { entries: out }
}

pub fn frobenius_norm_sq(x: &DenseMatrix) -> f64 {
    x.as_slice().iter().fold(0.0, |acc, v| acc + v * v)
}

/// `|est − ref| / |ref|`.
pub fn relative_error(estimate: f64, reference: f64) -> Result<f64> {
    if reference == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok((estimate - reference).abs() / reference.abs())
}

/// `‖est − ref‖_F / ‖ref‖_F`.
pub fn relative_error_matrix(estimate: &DenseMatrix, reference: &DenseMatrix) -> Result<f64> {
    if estimate.shape() != reference.shape() {
        return Err(Error::DimensionMismatch(format!(
            "relative error between {:?} and {:?}",
            estimate.shape(),
            reference.shape()
        )));
    }
    let denom = frobenius_norm_sq(reference);
    if denom == 0.0 {
        return Err(Error::ZeroReference);
    }
    let num = estimate
        .as_slice()
        .iter()
        .zip(reference.as_slice())
        .fold(0.0, |acc, (e, r)| acc + (e - r) * (e - r));
    Ok((num / denom).sqrt())
}
