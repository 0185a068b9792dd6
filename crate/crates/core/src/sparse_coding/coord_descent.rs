//! Cyclic coordinate descent with soft thresholding. Slower than the
//! homotopy on correlated dictionaries but dead simple, so it doubles as
//! the independent oracle for the path solver.

use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::float::Float;

use super::{kkt_residual_gram, PenaltyConfig, SparseCode};

const MAX_SWEEPS: usize = 200_000;

/// Solves the coding problem by cyclic coordinate descent until the
/// maximum KKT violation falls below `tol`.
pub fn coordinate_descent_solve<F: Float>(
    x: &ArrayView1<F>,
    dict: &Dictionary<F>,
    penalty: &PenaltyConfig<F>,
    tol: F,
) -> Result<SparseCode<F>> {
    if x.len() != dict.m() {
        return Err(Error::DimensionMismatch {
            context: "coordinate descent signal",
            expected: dict.m(),
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("coordinate descent signal"));
    }
    let gram = dict.gram();
    let q = dict.atoms().t().dot(x);
    let alpha = coordinate_descent_gram(&gram.view(), &q.view(), penalty, tol)?;
    Ok(SparseCode::from_dense(&alpha.view()))
}

/// Gram-space coordinate descent; returns the dense coefficient vector.
pub fn coordinate_descent_gram<F: Float>(
    gram: &ArrayView2<F>,
    q: &ArrayView1<F>,
    penalty: &PenaltyConfig<F>,
    tol: F,
) -> Result<Array1<F>> {
    let k = gram.nrows();
    if gram.ncols() != k || q.len() != k {
        return Err(Error::DimensionMismatch {
            context: "coordinate descent gram problem",
            expected: k,
            got: q.len(),
        });
    }
    penalty.validate(k)?;
    if tol <= F::zero() {
        return Err(Error::InvalidConfig(
            "coordinate descent tolerance must be positive".into(),
        ));
    }

    let l2 = penalty.l2_weight;
    let lambda = penalty.l1_weight;
    let mut alpha = Array1::<F>::zeros(k);
    // Running product G~ alpha, updated on every coordinate move.
    let mut g_alpha = Array1::<F>::zeros(k);
    let mut residual = F::infinity();

    for _ in 0..MAX_SWEEPS {
        for j in 0..k {
            let diag = gram[[j, j]] + l2;
            if diag <= F::zero() {
                continue;
            }
            let old = alpha[j];
            // Partial residual correlation with coordinate j removed.
            let z = q[j] - g_alpha[j] + diag * old;
            let thr = lambda * penalty.weight(j);
            let new = if penalty.nonneg {
                (z - thr).max(F::zero()) / diag
            } else {
                z.signum() * (z.abs() - thr).max(F::zero()) / diag
            };
            let delta = new - old;
            if delta != F::zero() {
                alpha[j] = new;
                for i in 0..k {
                    g_alpha[i] += delta * gram[[i, j]];
                }
                g_alpha[j] += delta * l2;
            }
        }
        let grad = &g_alpha - q;
        residual = kkt_residual_gram(&grad, &alpha, penalty);
        if residual < tol {
            return Ok(alpha);
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_SWEEPS,
        residual: residual.to_f64_lossy(),
    })
}
