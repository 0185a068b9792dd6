//! Sparse coders: the LARS-Lasso homotopy, cyclic coordinate descent and
//! the simultaneous (row-sparse) group solver, with KKT verification.

mod coord_descent;
mod group;
mod lars;

pub use coord_descent::{coordinate_descent_gram, coordinate_descent_solve};
pub use group::group_lasso_solve;
pub use lars::{lars_lasso_path, lars_path_gram, PathKnot, RegPath, StopReason, StopRule};

use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::float::Float;

/// Regularization of the coding problem: `l1_weight * sum w_i |a_i| +
/// (l2_weight/2) ||a||^2`, optionally restricted to non-negative
/// coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyConfig<F> {
    /// l1 level (the lambda of the coding problem).
    pub l1_weight: F,
    /// Elastic-net quadratic weight, folded into the Gram diagonal.
    pub l2_weight: F,
    /// Restrict coefficients to be non-negative.
    pub nonneg: bool,
    /// Optional per-index weights `w_i` of a weighted Lasso; `None` means
    /// all ones. Zero-weight indices are unpenalized.
    pub per_index_weights: Option<Array1<F>>,
}

impl<F: Float> PenaltyConfig<F> {
    pub fn l1(lambda: F) -> Self {
        PenaltyConfig {
            l1_weight: lambda,
            l2_weight: F::zero(),
            nonneg: false,
            per_index_weights: None,
        }
    }

    pub fn elastic_net(l1: F, l2: F) -> Self {
        PenaltyConfig {
            l2_weight: l2,
            ..Self::l1(l1)
        }
    }

    pub fn nonneg_l1(lambda: F) -> Self {
        PenaltyConfig {
            nonneg: true,
            ..Self::l1(lambda)
        }
    }

    pub fn with_weights(mut self, w: Array1<F>) -> Self {
        self.per_index_weights = Some(w);
        self
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        if self.l1_weight < F::zero() || self.l2_weight < F::zero() {
            return Err(Error::InvalidConfig(
                "penalty weights must be non-negative".into(),
            ));
        }
        if let Some(w) = &self.per_index_weights {
            if w.len() != k {
                return Err(Error::DimensionMismatch {
                    context: "per-index penalty weights",
                    expected: k,
                    got: w.len(),
                });
            }
            if w.iter().any(|v| *v < F::zero() || !v.is_finite()) {
                return Err(Error::InvalidConfig(
                    "per-index penalty weights must be finite and non-negative".into(),
                ));
            }
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn weight(&self, j: usize) -> F {
        match &self.per_index_weights {
            Some(w) => w[j],
            None => F::one(),
        }
    }
}

/// A sparse coefficient vector with its active set and sign pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode<F> {
    dim: usize,
    active: Vec<usize>,
    coefs: Vec<F>,
    signs: Vec<F>,
}

impl<F: Float> SparseCode<F> {
    pub fn zero(dim: usize) -> Self {
        SparseCode {
            dim,
            active: Vec::new(),
            coefs: Vec::new(),
            signs: Vec::new(),
        }
    }

    /// Builds a code from explicit triples; drops exact zeros.
    pub(crate) fn from_parts(dim: usize, active: Vec<usize>, coefs: Vec<F>, signs: Vec<F>) -> Self {
        let mut code = SparseCode::zero(dim);
        for ((j, v), s) in active.into_iter().zip(coefs).zip(signs) {
            if v != F::zero() {
                debug_assert!(j < dim);
                code.active.push(j);
                code.coefs.push(v);
                code.signs.push(if s == F::zero() { v.signum() } else { s });
            }
        }
        code
    }

    pub fn from_dense(v: &ArrayView1<F>) -> Self {
        let mut code = SparseCode::zero(v.len());
        for (j, &x) in v.iter().enumerate() {
            if x != F::zero() {
                code.active.push(j);
                code.coefs.push(x);
                code.signs.push(x.signum());
            }
        }
        code
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.active.len()
    }

    /// Active indices in the order the solver admitted them.
    pub fn active_set(&self) -> &[usize] {
        &self.active
    }

    pub fn signs(&self) -> &[F] {
        &self.signs
    }

    pub fn get(&self, index: usize) -> F {
        match self.active.iter().position(|&j| j == index) {
            Some(pos) => self.coefs[pos],
            None => F::zero(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, F)> + '_ {
        self.active.iter().copied().zip(self.coefs.iter().copied())
    }

    pub fn l1_norm(&self) -> F {
        self.coefs.iter().map(|v| v.abs()).sum()
    }

    pub fn to_dense(&self) -> Array1<F> {
        let mut out = Array1::zeros(self.dim);
        for (j, v) in self.iter() {
            out[j] = v;
        }
        out
    }
}

/// Optimality residual of the l1 coding problem: the largest violation of
/// the sign conditions on the active set and of the correlation bound off
/// it. Zero exactly at a solution.
pub fn kkt_residual<F: Float>(
    x: &ArrayView1<F>,
    dict: &Dictionary<F>,
    alpha: &SparseCode<F>,
    l1_weight: F,
) -> Result<F> {
    if x.len() != dict.m() {
        return Err(Error::DimensionMismatch {
            context: "kkt_residual signal",
            expected: dict.m(),
            got: x.len(),
        });
    }
    if alpha.dim() != dict.k() {
        return Err(Error::DimensionMismatch {
            context: "kkt_residual code",
            expected: dict.k(),
            got: alpha.dim(),
        });
    }
    let residual = x - &dict.atoms().dot(&alpha.to_dense());
    let corr = dict.atoms().t().dot(&residual);
    let mut worst = F::zero();
    for j in 0..dict.k() {
        let a = alpha.get(j);
        let v = if a != F::zero() {
            (corr[j] - l1_weight * a.signum()).abs()
        } else {
            (corr[j].abs() - l1_weight).max(F::zero())
        };
        worst = worst.max(v);
    }
    Ok(worst)
}

/// KKT residual in Gram space for a general penalty; used by the iterative
/// solvers as their convergence measure.
pub(crate) fn kkt_residual_gram<F: Float>(
    grad: &Array1<F>, // gradient of the smooth part: G~ a - q
    alpha: &Array1<F>,
    penalty: &PenaltyConfig<F>,
) -> F {
    let lambda = penalty.l1_weight;
    let mut worst = F::zero();
    for j in 0..alpha.len() {
        let w = lambda * penalty.weight(j);
        let a = alpha[j];
        let v = if penalty.nonneg {
            if a > F::zero() {
                (grad[j] + w).abs()
            } else {
                (-grad[j] - w).max(F::zero())
            }
        } else if a != F::zero() {
            (grad[j] + w * a.signum()).abs()
        } else {
            (grad[j].abs() - w).max(F::zero())
        };
        worst = worst.max(v);
    }
    worst
}

/// Mean objective value of the coding problem
/// `1/2 ||x - D a||^2 + lambda * pen(a)` at a given code.
pub fn coding_objective<F: Float>(
    x: &ArrayView1<F>,
    dict: &Dictionary<F>,
    alpha: &SparseCode<F>,
    penalty: &PenaltyConfig<F>,
) -> F {
    let dense = alpha.to_dense();
    let r = x - &dict.atoms().dot(&dense);
    let half = F::cast(0.5);
    let mut obj = half * r.iter().map(|&v| v * v).sum::<F>();
    for (j, v) in alpha.iter() {
        obj += penalty.l1_weight * penalty.weight(j) * v.abs();
    }
    if penalty.l2_weight > F::zero() {
        obj += half * penalty.l2_weight * dense.iter().map(|&v| v * v).sum::<F>();
    }
    obj
}

/// Solves the coding problem at the penalty's l1 level: the endpoint of the
/// homotopy path at `lambda = l1_weight`.
pub fn lasso_solve<F: Float>(
    x: &ArrayView1<F>,
    dict: &Dictionary<F>,
    penalty: &PenaltyConfig<F>,
) -> Result<SparseCode<F>> {
    if penalty.l1_weight <= F::zero() && penalty.l2_weight <= F::zero() {
        return Err(Error::InvalidConfig(
            "lasso_solve requires a positive l1 or l2 weight".into(),
        ));
    }
    let path = lars_lasso_path(x, dict, penalty, StopRule::LambdaMin(penalty.l1_weight))?;
    Ok(path.endpoint.code())
}

/// Gram-space variant of [`lasso_solve`] for mini-batch coding against a
/// shared, read-only Gram matrix.
pub fn lasso_solve_gram<F: Float>(
    gram: &ArrayView2<F>,
    q: &ArrayView1<F>,
    x_sq: F,
    penalty: &PenaltyConfig<F>,
) -> Result<SparseCode<F>> {
    let path = lars_path_gram(gram, q, x_sq, penalty, StopRule::LambdaMin(penalty.l1_weight))?;
    Ok(path.endpoint.code())
}
