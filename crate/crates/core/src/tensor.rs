//! Dense row-major `f64` matrices.
//!
//! Only what the optimizers need: elementwise arithmetic, row and column
//! reductions, RMS, and the broadcasted outer quotient `r c / sum(r)` used to
//! rebuild a factored accumulator. Vectors are `n x 1` or `1 x m` matrices and
//! scalars are `1 x 1`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix {}x{} ", self.rows, self.cols)?;
        f.debug_list()
            .entries(self.data.chunks(self.cols.max(1)))
            .finish()
    }
}

impl Matrix {
    /// Builds a matrix from row-major data.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidShape {
                rows,
                cols,
                reason: "dimensions must be positive",
            });
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidShape {
                rows,
                cols,
                reason: "data length does not equal rows * cols",
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows. Panics on ragged or empty input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let n = rows.len();
        assert!(n > 0, "from_rows: no rows");
        let m = rows[0].as_ref().len();
        let mut data = Vec::with_capacity(n * m);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), m, "from_rows: ragged rows");
            data.extend_from_slice(r);
        }
        Self::from_vec(n, m, data).expect("from_rows: empty row")
    }

    pub fn column(values: &[f64]) -> Self {
        Self::from_vec(values.len(), 1, values.to_vec()).expect("column: empty")
    }

    pub fn row(values: &[f64]) -> Self {
        Self::from_vec(1, values.len(), values.to_vec()).expect("row: empty")
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            rows: 1,
            cols: 1,
            data: vec![value],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(rows > 0 && cols > 0, "filled: dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 1.0)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    /// Always false; matrices have positive dimensions.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    /// `n x 1` vector of row sums (right-multiplication by a ones vector).
    pub fn row_sums(&self) -> Matrix {
        let data = self
            .data
            .chunks_exact(self.cols)
            .map(|row| row.iter().sum())
            .collect();
        Matrix {
            rows: self.rows,
            cols: 1,
            data,
        }
    }

    /// `1 x m` vector of column sums (left-multiplication by a ones vector).
    pub fn col_sums(&self) -> Matrix {
        let mut data = vec![0.0; self.cols];
        for row in self.data.chunks_exact(self.cols) {
            for (acc, x) in data.iter_mut().zip(row) {
                *acc += x;
            }
        }
        Matrix {
            rows: 1,
            cols: self.cols,
            data,
        }
    }

    /// Root-mean-square of all entries.
    pub fn rms(&self) -> f64 {
        let sq: f64 = self.data.iter().map(|x| x * x).sum();
        (sq / self.data.len() as f64).sqrt()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    fn check_same_shape(&self, other: &Matrix, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                op,
                expected: self.shape(),
                actual: other.shape(),
            });
        }
        Ok(())
    }

    /// Applies `f` pairwise. Fails if the shapes differ.
    pub fn zip_map(
        &self,
        other: &Matrix,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Matrix> {
        self.check_same_shape(other, op)?;
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_map(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_map(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_map(other, "mul", |a, b| a * b)
    }

    /// Entrywise quotient. An exact zero in the divisor is an error.
    pub fn div(&self, other: &Matrix) -> Result<Matrix> {
        self.check_same_shape(other, "div")?;
        if let Some(index) = other.data.iter().position(|&b| b == 0.0) {
            return Err(Error::DivisionByZero { op: "div", index });
        }
        self.zip_map(other, "div", |a, b| a / b)
    }

    pub fn square(&self) -> Matrix {
        self.map(|x| x * x)
    }

    pub fn sqrt(&self) -> Matrix {
        self.map(f64::sqrt)
    }

    pub fn scale(&self, factor: f64) -> Matrix {
        self.map(|x| x * factor)
    }

    pub fn add_scalar(&self, value: f64) -> Matrix {
        self.map(|x| x + value)
    }

    /// Exponential moving average `beta * self + (1 - beta) * sample`.
    pub fn ema(&self, sample: &Matrix, beta: f64) -> Result<Matrix> {
        self.zip_map(sample, "ema", |a, b| beta * a + (1.0 - beta) * b)
    }

    /// In-place form of [`Matrix::ema`]; produces bitwise the same values.
    pub fn ema_assign(&mut self, sample: &Matrix, beta: f64) -> Result<()> {
        self.check_same_shape(sample, "ema")?;
        for (a, &b) in self.data.iter_mut().zip(&sample.data) {
            *a = beta * *a + (1.0 - beta) * b;
        }
        Ok(())
    }

    /// Plain matrix product.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                expected: (self.cols, other.cols),
                actual: other.shape(),
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Rebuilds `r c / sum(r)` from a row factor `r` (`n x 1`) and a column
/// factor `c` (`1 x m`). Every entry of `r` must be strictly positive.
pub fn outer_quotient(r: &Matrix, c: &Matrix) -> Result<Matrix> {
    if r.cols != 1 {
        return Err(Error::ShapeMismatch {
            op: "outer_quotient",
            expected: (r.rows, 1),
            actual: r.shape(),
        });
    }
    if c.rows != 1 {
        return Err(Error::ShapeMismatch {
            op: "outer_quotient",
            expected: (1, c.cols),
            actual: c.shape(),
        });
    }
    if let Some((index, &value)) = r.data.iter().enumerate().find(|(_, &x)| x.is_nan() || x <= 0.0) {
        return Err(Error::NonPositiveEntry {
            op: "outer_quotient",
            index,
            value,
        });
    }
    let total = r.sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::ZeroTotal {
            op: "outer_quotient",
        });
    }
    let mut data = Vec::with_capacity(r.rows * c.cols);
    for &ri in &r.data {
        let scaled = ri / total;
        data.extend(c.data.iter().map(|&cj| scaled * cj));
    }
    Ok(Matrix {
        rows: r.rows,
        cols: c.cols,
        data,
    })
}
