//! Small dense linear-algebra helpers used by the solvers.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::float::Float;

/// Dense lower Cholesky factor of a symmetric positive-definite matrix.
/// Returns `None` when a pivot falls below `tol`.
pub fn cholesky<F: Float>(a: &ArrayView2<F>, tol: F) -> Option<Array2<F>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut l = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for p in 0..j {
                s -= l[[i, p]] * l[[j, p]];
            }
            if i == j {
                if s <= tol {
                    return None;
                }
                l[[i, i]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    Some(l)
}

/// Solves `L L^T x = rhs` given the lower factor.
pub fn cholesky_solve<F: Float>(l: &Array2<F>, rhs: &Array1<F>) -> Array1<F> {
    let n = l.nrows();
    let mut y = rhs.clone();
    for i in 0..n {
        for j in 0..i {
            let yj = y[j];
            y[i] -= l[[i, j]] * yj;
        }
        y[i] /= l[[i, i]];
    }
    for i in (0..n).rev() {
        for j in (i + 1)..n {
            let yj = y[j];
            y[i] -= l[[j, i]] * yj;
        }
        y[i] /= l[[i, i]];
    }
    y
}

/// Lower Cholesky factor of a growing/shrinking active Gram matrix,
/// maintained by rank-one updates instead of refactorizations.
///
/// Rows are stored in insertion order; `remove` re-triangularizes the
/// trailing block with Givens rotations.
#[derive(Debug, Clone)]
pub struct ActiveCholesky<F> {
    rows: Vec<Vec<F>>,
    pivot_tol: F,
}

impl<F: Float> ActiveCholesky<F> {
    pub fn new(pivot_tol: F) -> Self {
        ActiveCholesky {
            rows: Vec::new(),
            pivot_tol,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Appends one row/column of the Gram matrix. `cross` holds the inner
    /// products with the current active atoms (in insertion order) and
    /// `diag` the new diagonal entry. `atom` only labels the error.
    pub fn insert(&mut self, cross: &[F], diag: F, atom: usize) -> Result<()> {
        debug_assert_eq!(cross.len(), self.rows.len());
        let mut w = Vec::with_capacity(self.rows.len() + 1);
        for (i, row) in self.rows.iter().enumerate() {
            let mut s = cross[i];
            for (p, wp) in w.iter().enumerate() {
                s -= row[p] * *wp;
            }
            w.push(s / row[i]);
        }
        let mut d2 = diag;
        for wp in &w {
            d2 -= *wp * *wp;
        }
        if d2 <= self.pivot_tol {
            return Err(Error::DegeneratePath {
                atom,
                pivot: d2.to_f64_lossy(),
            });
        }
        w.push(d2.sqrt());
        self.rows.push(w);
        Ok(())
    }

    /// Removes the factor row/column at position `pos` (insertion order).
    pub fn remove(&mut self, pos: usize) {
        let p = self.rows.len();
        debug_assert!(pos < p);
        self.rows.remove(pos);
        // Rows past `pos` keep their old column layout; one Givens rotation
        // per column restores the triangular shape.
        for j in pos..self.rows.len() {
            // Zero out entry (j, j+1) by rotating columns j and j+1.
            let a = self.rows[j][j];
            let b = self.rows[j][j + 1];
            let r = a.hypot(b);
            let (c, s) = if r > F::zero() {
                (a / r, b / r)
            } else {
                (F::one(), F::zero())
            };
            for row in self.rows[j..].iter_mut() {
                let x = row[j];
                let y = row[j + 1];
                row[j] = c * x + s * y;
                row[j + 1] = c * y - s * x;
            }
            self.rows[j].truncate(j + 1);
        }
        if pos < self.rows.len() {
            // Givens may leave negative pivots; flip the column sign.
            for j in pos..self.rows.len() {
                if self.rows[j][j] < F::zero() {
                    for row in self.rows[j..].iter_mut() {
                        row[j] = -row[j];
                    }
                }
            }
        }
    }

    /// Solves `L L^T x = rhs` for the current active set.
    pub fn solve(&self, rhs: &[F]) -> Vec<F> {
        let p = self.rows.len();
        debug_assert_eq!(rhs.len(), p);
        let mut y = rhs.to_vec();
        for i in 0..p {
            for j in 0..i {
                let yj = y[j];
                y[i] -= self.rows[i][j] * yj;
            }
            y[i] /= self.rows[i][i];
        }
        for i in (0..p).rev() {
            for j in (i + 1)..p {
                let yj = y[j];
                y[i] -= self.rows[j][i] * yj;
            }
            y[i] /= self.rows[i][i];
        }
        y
    }
}
