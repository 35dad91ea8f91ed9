use crate::{Result, TensorError, Vector};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(TensorError::BadShape {
                rows,
                cols,
                len: data.len(),
            });
        }
        if !data.iter().all(|x| x.is_finite()) {
            return Err(TensorError::NonFinite("Matrix::from_row_major"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(TensorError::DimensionMismatch {
                    op: "Matrix::from_rows",
                    expected: cols,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_row_major(rows.len(), cols, data)
    }

    /// Builds a matrix by calling `f(row, col)` for each entry in row-major order.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
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
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `self += factor * a bᵀ`
    pub fn add_outer(&mut self, factor: f64, a: &Vector, b: &Vector) -> Result<()> {
        if a.dim() != self.rows {
            return Err(TensorError::DimensionMismatch {
                op: "add_outer(rows)",
                expected: self.rows,
                actual: a.dim(),
            });
        }
        if b.dim() != self.cols {
            return Err(TensorError::DimensionMismatch {
                op: "add_outer(cols)",
                expected: self.cols,
                actual: b.dim(),
            });
        }
        let bs = b.as_slice();
        for (r, &ar) in a.iter().enumerate() {
            let s = factor * ar;
            if s == 0.0 {
                continue;
            }
            for (x, &bc) in self.row_mut(r).iter_mut().zip(bs) {
                *x += s * bc;
            }
        }
        Ok(())
    }

    /// `self += factor * other`
    pub fn add_scaled(&mut self, factor: f64, other: &Matrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(TensorError::DimensionMismatch {
                op: "Matrix::add_scaled",
                expected: self.data.len(),
                actual: other.data.len(),
            });
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += factor * b;
        }
        Ok(())
    }
}
