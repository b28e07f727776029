//! Rank-1 nonnegative factorization and the smoothed accumulators built on it.
//!
//! A nonnegative `n x m` matrix `V` is approximated by `W H` where
//! `W = V 1_m` (row sums) and `H = 1_n^T V / (1_n^T V 1_m)` (column sums over
//! the total). This pair minimizes the generalized KL divergence to `V` among
//! rank-1 nonnegative factorizations, and it is exact when `V` is itself
//! rank-1.
//!
//! [`FactoredEma`] keeps exponential moving averages of the two factors
//! instead of the full matrix, so its state is `n + m` numbers. [`FullEma`] is
//! the unfactored fallback used for vectors and scalars.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{outer_quotient, Matrix};

fn check_nonnegative(x: &Matrix, op: &'static str) -> Result<()> {
    match x.as_slice().iter().position(|v| v.is_nan() || *v < 0.0) {
        Some(index) => Err(Error::NegativeEntry {
            op,
            index,
            value: x.as_slice()[index],
        }),
        None => Ok(()),
    }
}

/// Closed-form rank-1 factorization `(W, H)` of a nonnegative matrix.
pub fn nmf_rank1(v: &Matrix) -> Result<(Matrix, Matrix)> {
    check_nonnegative(v, "nmf_rank1")?;
    let total = v.sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::ZeroTotal { op: "nmf_rank1" });
    }
    let w = v.row_sums();
    let h = v.col_sums().scale(1.0 / total);
    Ok((w, h))
}

/// Generalized KL divergence `sum V log(V/A) - V + A`, with `0 log 0 = 0`.
pub fn generalized_kl(v: &Matrix, a: &Matrix) -> Result<f64> {
    if v.shape() != a.shape() {
        return Err(Error::ShapeMismatch {
            op: "generalized_kl",
            expected: v.shape(),
            actual: a.shape(),
        });
    }
    if let Some((index, &value)) = a
        .as_slice()
        .iter()
        .enumerate()
        .find(|(_, x)| x.is_nan() || **x <= 0.0)
    {
        return Err(Error::NonPositiveEntry {
            op: "generalized_kl",
            index,
            value,
        });
    }
    let total = v
        .as_slice()
        .iter()
        .zip(a.as_slice())
        .map(|(&vij, &aij)| {
            let log_term = if vij == 0.0 { 0.0 } else { vij * (vij / aij).ln() };
            log_term - vij + aij
        })
        .sum();
    Ok(total)
}

/// Moving averages of the row-sum and column-sum factors of a nonnegative
/// accumulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactoredEma {
    row_acc: Matrix,
    col_acc: Matrix,
    decay: f64,
    epsilon: f64,
    step_count: u64,
}

impl FactoredEma {
    /// Zero-initialized accumulator for an `rows x cols` matrix.
    pub fn new(rows: usize, cols: usize, decay: f64, epsilon: f64) -> Self {
        Self {
            row_acc: Matrix::zeros(rows, 1),
            col_acc: Matrix::zeros(1, cols),
            decay,
            epsilon,
            step_count: 0,
        }
    }

    pub fn row_acc(&self) -> &Matrix {
        &self.row_acc
    }

    pub fn col_acc(&self) -> &Matrix {
        &self.col_acc
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.row_acc.rows(), self.col_acc.cols())
    }

    /// Number of stored state values (`n + m`).
    pub fn state_elements(&self) -> usize {
        self.row_acc.len() + self.col_acc.len()
    }

    /// Returns the state after absorbing `x`, leaving `self` untouched.
    ///
    /// `epsilon` is added to every entry of `x` before the row and column
    /// sums are taken.
    pub fn updated(&self, x: &Matrix) -> Result<Self> {
        if x.shape() != self.shape() {
            return Err(Error::ShapeMismatch {
                op: "factored_update",
                expected: self.shape(),
                actual: x.shape(),
            });
        }
        check_nonnegative(x, "factored_update")?;
        let floored = x.add_scalar(self.epsilon);
        Ok(Self {
            row_acc: self.row_acc.ema(&floored.row_sums(), self.decay)?,
            col_acc: self.col_acc.ema(&floored.col_sums(), self.decay)?,
            decay: self.decay,
            epsilon: self.epsilon,
            step_count: self.step_count + 1,
        })
    }

    pub fn update(&mut self, x: &Matrix) -> Result<()> {
        *self = self.updated(x)?;
        Ok(())
    }

    /// Rebuilds the full `n x m` estimate `row_acc col_acc / sum(row_acc)`.
    pub fn reconstruct(&self) -> Result<Matrix> {
        if self.step_count == 0 {
            return Err(Error::NotUpdated);
        }
        outer_quotient(&self.row_acc, &self.col_acc)
    }
}

/// Unfactored moving average, entrywise `acc = decay acc + (1 - decay)(x + eps)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullEma {
    acc: Matrix,
    decay: f64,
    epsilon: f64,
    step_count: u64,
}

impl FullEma {
    pub fn new(rows: usize, cols: usize, decay: f64, epsilon: f64) -> Self {
        Self {
            acc: Matrix::zeros(rows, cols),
            decay,
            epsilon,
            step_count: 0,
        }
    }

    pub fn acc(&self) -> &Matrix {
        &self.acc
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn shape(&self) -> (usize, usize) {
        self.acc.shape()
    }

    pub fn state_elements(&self) -> usize {
        self.acc.len()
    }

    pub fn updated(&self, x: &Matrix) -> Result<Self> {
        if x.shape() != self.shape() {
            return Err(Error::ShapeMismatch {
                op: "full_update",
                expected: self.shape(),
                actual: x.shape(),
            });
        }
        check_nonnegative(x, "full_update")?;
        Ok(Self {
            acc: self.acc.ema(&x.add_scalar(self.epsilon), self.decay)?,
            decay: self.decay,
            epsilon: self.epsilon,
            step_count: self.step_count + 1,
        })
    }

    pub fn update(&mut self, x: &Matrix) -> Result<()> {
        *self = self.updated(x)?;
        Ok(())
    }

    pub fn reconstruct(&self) -> Result<Matrix> {
        if self.step_count == 0 {
            return Err(Error::NotUpdated);
        }
        Ok(self.acc.clone())
    }
}

/// How a parameter's nonnegative accumulators are stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layout {
    /// Row and column factors only.
    Factored,
    /// One value per parameter entry.
    Full,
}

impl Layout {
    /// Factored for genuine matrices, full for vectors and scalars.
    pub fn for_shape(rows: usize, cols: usize) -> Self {
        if rows >= 2 && cols >= 2 {
            Layout::Factored
        } else {
            Layout::Full
        }
    }
}

/// Either accumulator behind one interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MomentAccumulator {
    Factored(FactoredEma),
    Full(FullEma),
}

impl MomentAccumulator {
    pub fn new(layout: Layout, rows: usize, cols: usize, decay: f64, epsilon: f64) -> Self {
        match layout {
            Layout::Factored => Self::Factored(FactoredEma::new(rows, cols, decay, epsilon)),
            Layout::Full => Self::Full(FullEma::new(rows, cols, decay, epsilon)),
        }
    }

    pub fn layout(&self) -> Layout {
        match self {
            Self::Factored(_) => Layout::Factored,
            Self::Full(_) => Layout::Full,
        }
    }

    pub fn updated(&self, x: &Matrix) -> Result<Self> {
        Ok(match self {
            Self::Factored(s) => Self::Factored(s.updated(x)?),
            Self::Full(s) => Self::Full(s.updated(x)?),
        })
    }

    pub fn reconstruct(&self) -> Result<Matrix> {
        match self {
            Self::Factored(s) => s.reconstruct(),
            Self::Full(s) => s.reconstruct(),
        }
    }

    pub fn state_elements(&self) -> usize {
        match self {
            Self::Factored(s) => s.state_elements(),
            Self::Full(s) => s.state_elements(),
        }
    }
}
