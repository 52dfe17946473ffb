//! Per-instance memory bank.

use crate::error::{IdfdError, Result};
use crate::linalg::{l2_normalize_rows, norm, Matrix, ZERO_NORM};
use crate::rng::SeededRng;

/// One stored unit-norm representation per dataset instance.
///
/// The stored rows act as the class weight vectors of the instance softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryBank {
    rows: Matrix,
    momentum: f64,
}

impl MemoryBank {
    /// Random unit rows drawn from an isotropic Gaussian.
    pub fn random(n: usize, dim: usize, momentum: f64, rng: &mut SeededRng) -> Result<Self> {
        let raw = Matrix::from_fn(n, dim, |_, _| rng.normal());
        Self::from_rows(l2_normalize_rows(&raw)?, momentum)
    }

    /// Wraps existing rows, which must already be unit norm.
    pub fn from_rows(rows: Matrix, momentum: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&momentum) {
            return Err(IdfdError::DomainError(format!(
                "bank momentum {momentum} outside [0, 1]"
            )));
        }
        for (r, row) in rows.iter_rows().enumerate() {
            if (norm(row) - 1.0).abs() > 1e-9 {
                return Err(IdfdError::DomainError(format!(
                    "bank row {r} has norm {}",
                    norm(row)
                )));
            }
        }
        Ok(Self { rows, momentum })
    }

    pub fn len(&self) -> usize {
        self.rows.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.rows.cols()
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    pub fn set_momentum(&mut self, momentum: f64) {
        self.momentum = momentum;
    }

    pub fn rows(&self) -> &Matrix {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.rows.row(i)
    }

    /// Blends each indexed row toward its new representation:
    /// `row ← normalize(m·row + (1 − m)·v)`.
    ///
    /// The bank's own momentum is used. Rows not listed are left untouched.
    pub fn update(&mut self, indices: &[usize], batch_v: &Matrix) -> Result<()> {
        let m = self.momentum;
        bank_update(self, indices, batch_v, m)
    }
}

/// Momentum update of the bank rows listed in `indices`.
///
/// If the blend cancels to (numerically) zero the new representation is stored
/// as is.
pub fn bank_update(bank: &mut MemoryBank, indices: &[usize], batch_v: &Matrix, m: f64) -> Result<()> {
    if indices.len() != batch_v.rows() {
        return Err(IdfdError::LengthMismatch {
            left: indices.len(),
            right: batch_v.rows(),
        });
    }
    if batch_v.cols() != bank.dim() {
        return Err(IdfdError::ShapeMismatch(format!(
            "batch has dim {}, bank has dim {}",
            batch_v.cols(),
            bank.dim()
        )));
    }
    let n = bank.len();
    if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
        return Err(IdfdError::IndexOutOfRange { index: bad, len: n });
    }
    for (b, &i) in indices.iter().enumerate() {
        let v = batch_v.row(b);
        let row = bank.rows.row_mut(i);
        for (r, &x) in row.iter_mut().zip(v) {
            *r = m * *r + (1.0 - m) * x;
        }
        let len = norm(row);
        if len < ZERO_NORM {
            row.copy_from_slice(v);
            let len = norm(row);
            row.iter_mut().for_each(|x| *x /= len);
        } else {
            row.iter_mut().for_each(|x| *x /= len);
        }
    }
    Ok(())
}
