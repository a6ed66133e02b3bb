use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::rng::SeedSpec;
use crate::error::{Error, Result};

/// Dense real matrix with at least one row and one column.
///
/// Entries are addressed in row-major logical order; storage is whatever
/// `nalgebra` uses internally.
#[derive(Clone, PartialEq)]
pub struct Matrix(DMatrix<f64>);

impl Matrix {
    pub fn from_row_slice(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        check_dims(rows, cols)?;
        if entries.len() != rows * cols {
            return Err(Error::shape(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Ok(Self(DMatrix::from_row_slice(rows, cols, entries)))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("ragged rows"));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_row_slice(rows.len(), cols, &flat)
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        check_dims(rows, cols)?;
        Ok(Self(DMatrix::zeros(rows, cols)))
    }

    pub fn identity(n: usize) -> Result<Self> {
        check_dims(n, n)?;
        Ok(Self(DMatrix::identity(n, n)))
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        check_dims(values.len(), values.len())?;
        Ok(Self(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(values))))
    }

    pub fn as_inner(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> Vec<f64> {
        self.0.transpose().as_slice().to_vec()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Self> {
        if self.cols() != rhs.rows() {
            return Err(Error::shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows(),
                self.cols(),
                rhs.rows(),
                rhs.cols()
            )));
        }
        Ok(Self(&self.0 * &rhs.0))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols() {
            return Err(Error::shape(format!(
                "cannot apply {}x{} matrix to vector of length {}",
                self.rows(),
                self.cols(),
                x.len()
            )));
        }
        let v = nalgebra::DVector::from_column_slice(x);
        Ok((&self.0 * v).as_slice().to_vec())
    }

    /// Copy of the column range `start..start + width`.
    pub fn columns(&self, start: usize, width: usize) -> Result<Self> {
        if width == 0 || start + width > self.cols() {
            return Err(Error::shape(format!(
                "column range {start}..{} out of bounds for {} columns",
                start + width,
                self.cols()
            )));
        }
        Ok(Self(self.0.columns(start, width).into_owned()))
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix{:?}{}", self.shape(), self.0)
    }
}

fn check_dims(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::parameter(format!(
            "matrix dimensions must be positive, got {rows}x{cols}"
        )));
    }
    Ok(())
}

/// I.i.d. `Normal(mean, std^2)` entries drawn in row-major order from the
/// stream addressed by `seed`.
pub fn sample_gaussian(rows: usize, cols: usize, mean: f64, std: f64, seed: &SeedSpec) -> Result<Matrix> {
    check_dims(rows, cols)?;
    if !(std > 0.0) || !std.is_finite() {
        return Err(Error::parameter(format!("standard deviation must be positive and finite, got {std}")));
    }
    if !mean.is_finite() {
        return Err(Error::parameter(format!("mean must be finite, got {mean}")));
    }
    let mut rng = seed.rng();
    let entries: Vec<f64> = (0..rows * cols)
        .map(|_| mean + std * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Matrix::from_row_slice(rows, cols, &entries)
}

/// Adds the rectangular identity `I_{r x c}` (ones on the main diagonal).
pub fn add_rect_identity(m: &Matrix) -> Result<Matrix> {
    if m.rows() > m.cols() {
        return Err(Error::shape(format!(
            "rectangular identity needs rows <= cols, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let mut out = m.0.clone();
    for i in 0..m.rows() {
        out[(i, i)] += 1.0;
    }
    Ok(Matrix(out))
}

/// Horizontal concatenation `(B_1, ..., B_k)`.
pub fn hconcat(blocks: &[Matrix]) -> Result<Matrix> {
    let first = blocks
        .first()
        .ok_or_else(|| Error::parameter("hconcat needs at least one block"))?;
    let rows = first.rows();
    if let Some((idx, bad)) = blocks.iter().enumerate().find(|(_, b)| b.rows() != rows) {
        return Err(Error::shape(format!(
            "block {idx} has {} rows, expected {rows}",
            bad.rows()
        )));
    }
    let cols: usize = blocks.iter().map(Matrix::cols).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut offset = 0;
    for b in blocks {
        out.columns_mut(offset, b.cols()).copy_from(&b.0);
        offset += b.cols();
    }
    Ok(Matrix(out))
}

pub fn scale(m: &Matrix, c: f64) -> Matrix {
    Matrix(&m.0 * c)
}
