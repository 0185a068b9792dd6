//! Simultaneous sparse coding of a group of signals with shared row
//! support, via block coordinate descent over the rows of the coefficient
//! matrix with group soft-thresholding.

use ndarray::{Array2, ArrayView2};

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::float::Float;

const MAX_SWEEPS: usize = 200_000;

/// Minimizes `1/2 ||X - D a||_F^2 + lambda * sum_j ||a^j||_2` over the
/// `k x q` coefficient matrix `a`, where `a^j` are rows. Returns the
/// coefficient matrix once the worst row-wise optimality residual is
/// below `tol`.
pub fn group_lasso_solve<F: Float>(
    xs: &ArrayView2<F>,
    dict: &Dictionary<F>,
    l1_weight: F,
    tol: F,
) -> Result<Array2<F>> {
    let (m, k) = (dict.m(), dict.k());
    if xs.nrows() != m {
        return Err(Error::DimensionMismatch {
            context: "group coding signals",
            expected: m,
            got: xs.nrows(),
        });
    }
    let q = xs.ncols();
    if q == 0 {
        return Err(Error::InvalidConfig("group must contain signals".into()));
    }
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("group coding signals"));
    }
    if l1_weight < F::zero() || tol <= F::zero() {
        return Err(Error::InvalidConfig(
            "group lasso needs lambda >= 0 and tol > 0".into(),
        ));
    }

    let mut alpha = Array2::<F>::zeros((k, q));
    // Residual X - D alpha, kept in sync with row updates.
    let mut resid = xs.to_owned();
    let mut worst = F::infinity();

    for _ in 0..MAX_SWEEPS {
        for j in 0..k {
            let dj = dict.atoms().column(j);
            let diag = dj.dot(&dj);
            if diag <= F::zero() {
                continue;
            }
            // z = d_j^T R + G_jj * a^j, the row's unshrunk target.
            let mut z = dj.dot(&resid);
            for c in 0..q {
                z[c] += diag * alpha[[j, c]];
            }
            let z_norm = z.iter().map(|&v| v * v).sum::<F>().sqrt();
            let scale = if z_norm > l1_weight {
                (F::one() - l1_weight / z_norm) / diag
            } else {
                F::zero()
            };
            for c in 0..q {
                let new = z[c] * scale;
                let delta = new - alpha[[j, c]];
                if delta != F::zero() {
                    alpha[[j, c]] = new;
                    for r in 0..m {
                        resid[[r, c]] -= dj[r] * delta;
                    }
                }
            }
        }

        // Row-wise KKT residual of the group subgradient conditions.
        worst = F::zero();
        for j in 0..k {
            let dj = dict.atoms().column(j);
            let corr = dj.dot(&resid);
            let corr_norm = corr.iter().map(|&v| v * v).sum::<F>().sqrt();
            let row = alpha.row(j);
            let row_norm = row.iter().map(|&v| v * v).sum::<F>().sqrt();
            let viol = if row_norm > F::zero() {
                // d_j^T R must equal lambda * a^j / ||a^j||.
                let mut s = F::zero();
                for c in 0..q {
                    let d = corr[c] - l1_weight * row[c] / row_norm;
                    s += d * d;
                }
                s.sqrt()
            } else {
                (corr_norm - l1_weight).max(F::zero())
            };
            worst = worst.max(viol);
        }
        if worst < tol {
            return Ok(alpha);
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_SWEEPS,
        residual: worst.to_f64_lossy(),
    })
}
