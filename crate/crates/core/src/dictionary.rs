//! The dictionary, the sufficient statistics of the quadratic surrogate,
//! and the block-coordinate dictionary update with warm restarts.

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::float::Float;
use crate::linalg::cholesky;
use crate::projections::ConstraintSet;

/// Diagonal threshold of the surrogate Hessian below which a column is
/// skipped by the update and flagged unused.
const DIAG_TOL: f64 = 1e-10;
/// Slack allowed when validating column feasibility.
const FEAS_TOL: f64 = 1e-8;

/// An `m x k` dictionary whose columns live in a convex constraint set.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary<F> {
    atoms: Array2<F>,
    constraint: ConstraintSet<F>,
}

impl<F: Float> Dictionary<F> {
    /// Wraps a matrix whose columns already satisfy the constraint set.
    pub fn new(atoms: Array2<F>, constraint: ConstraintSet<F>) -> Result<Self> {
        constraint.validate()?;
        if atoms.nrows() == 0 || atoms.ncols() == 0 {
            return Err(Error::InvalidConfig(
                "dictionary must have at least one row and column".into(),
            ));
        }
        if atoms.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dictionary atoms"));
        }
        let tol = F::cast(FEAS_TOL);
        for (j, col) in atoms.columns().into_iter().enumerate() {
            if !constraint.is_feasible(&col, tol) {
                return Err(Error::InvalidConfig(format!(
                    "dictionary column {j} violates its constraint set"
                )));
            }
        }
        Ok(Dictionary { atoms, constraint })
    }

    /// Projects each column onto the constraint set, then wraps the result.
    pub fn from_columns_projected(
        mut atoms: Array2<F>,
        constraint: ConstraintSet<F>,
    ) -> Result<Self> {
        constraint.validate()?;
        for j in 0..atoms.ncols() {
            let p = constraint.project(&atoms.column(j))?;
            atoms.column_mut(j).assign(&p);
        }
        Dictionary::new(atoms, constraint)
    }

    pub fn m(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn k(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn atoms(&self) -> &Array2<F> {
        &self.atoms
    }

    pub fn atom(&self, j: usize) -> ndarray::ArrayView1<'_, F> {
        self.atoms.column(j)
    }

    pub fn constraint(&self) -> &ConstraintSet<F> {
        &self.constraint
    }

    /// Gram matrix `D^T D`, shareable read-only across a mini-batch.
    pub fn gram(&self) -> Array2<F> {
        self.atoms.t().dot(&self.atoms)
    }

    pub(crate) fn set_atom(&mut self, j: usize, col: &Array1<F>) {
        self.atoms.column_mut(j).assign(col);
    }
}

/// Accumulated sufficient statistics of the quadratic surrogate:
/// `A = sum a a^T` (k x k) and `B = sum x a^T` (m x k).
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateStats<F> {
    pub a: Array2<F>,
    pub b: Array2<F>,
}

impl<F: Float> SurrogateStats<F> {
    pub fn zeros(m: usize, k: usize) -> Self {
        SurrogateStats {
            a: Array2::zeros((k, k)),
            b: Array2::zeros((m, k)),
        }
    }

    /// Warm-up initialization `A = t0 I`, `B = t0 D0`.
    pub fn warmup(d0: &Dictionary<F>, t0: F) -> Self {
        let mut s = Self::zeros(d0.m(), d0.k());
        for j in 0..d0.k() {
            s.a[[j, j]] = t0;
        }
        s.b.assign(d0.atoms());
        s.b.mapv_inplace(|v| v * t0);
        s
    }

    pub fn scale(&mut self, beta: F) {
        self.a.mapv_inplace(|v| v * beta);
        self.b.mapv_inplace(|v| v * beta);
    }

    /// Rank-one accumulation `A += w a a^T`, `B += w x a^T` for a sparse
    /// code `a`.
    pub fn add_code(
        &mut self,
        x: &ndarray::ArrayView1<F>,
        code: &crate::sparse_coding::SparseCode<F>,
        weight: F,
    ) {
        for (j, vj) in code.iter() {
            let wj = weight * vj;
            for (i, vi) in code.iter() {
                self.a[[i, j]] += wj * vi;
            }
            for (r, &xr) in x.iter().enumerate() {
                self.b[[r, j]] += wj * xr;
            }
        }
    }

    /// Zeroes row/column `j` of `A` and column `j` of `B` (after an atom
    /// replacement).
    pub fn clear_atom(&mut self, j: usize) {
        self.a.row_mut(j).fill(F::zero());
        self.a.column_mut(j).fill(F::zero());
        self.b.column_mut(j).fill(F::zero());
    }

    /// Checks positive semi-definiteness of `A` via a shifted Cholesky.
    pub fn a_is_psd(&self, tol: F) -> bool {
        let k = self.a.nrows();
        let mut shifted = self.a.clone();
        for j in 0..k {
            shifted[[j, j]] += tol;
        }
        cholesky(&shifted.view(), F::zero()).is_some()
    }
}

/// The surrogate's dictionary-dependent part:
/// `1/2 Tr(D^T D A) - Tr(D^T B)`.
pub fn quadratic_objective<F: Float>(dict: &Dictionary<F>, stats: &SurrogateStats<F>) -> F {
    quadratic_objective_raw(&dict.atoms.view(), stats)
}

pub(crate) fn quadratic_objective_raw<F: Float>(d: &ArrayView2<F>, stats: &SurrogateStats<F>) -> F {
    let da = d.dot(&stats.a);
    let half = F::cast(0.5);
    let mut v = F::zero();
    for (x, y) in d.iter().zip(da.iter()) {
        v += *x * *y * half;
    }
    for (x, y) in d.iter().zip(stats.b.iter()) {
        v -= *x * *y;
    }
    v
}

/// Outcome of a dictionary update pass.
#[derive(Debug, Clone)]
pub struct UpdateReport<F> {
    /// Sweeps actually performed.
    pub sweeps: usize,
    /// Frobenius norm of the change over the last sweep.
    pub last_delta: F,
    /// Columns skipped because their surrogate Hessian diagonal vanished.
    pub skipped: Vec<usize>,
}

/// Block-coordinate minimization of the surrogate over the constraint set,
/// warm-restarted from the current dictionary. Sweeps columns in ascending
/// index order; each column update is the constraint projection of
/// `u_j = d_j + (b_j - D a_j) / A[j,j]`. Stops after `max_sweeps` or when a
/// sweep changes the dictionary by less than `tol` in Frobenius norm.
pub fn update_dictionary<F: Float>(
    dict: &mut Dictionary<F>,
    stats: &SurrogateStats<F>,
    max_sweeps: usize,
    tol: F,
) -> Result<UpdateReport<F>> {
    let (m, k) = (dict.m(), dict.k());
    if stats.a.nrows() != k || stats.a.ncols() != k {
        return Err(Error::DimensionMismatch {
            context: "surrogate stats A",
            expected: k,
            got: stats.a.nrows(),
        });
    }
    if stats.b.nrows() != m || stats.b.ncols() != k {
        return Err(Error::DimensionMismatch {
            context: "surrogate stats B",
            expected: m,
            got: stats.b.nrows(),
        });
    }
    if max_sweeps == 0 {
        return Err(Error::InvalidConfig("max_sweeps must be >= 1".into()));
    }

    let diag_tol = F::cast(DIAG_TOL);
    let mut skipped = Vec::new();
    let mut sweeps = 0;
    let mut last_delta = F::zero();
    let mut u = Array1::<F>::zeros(m);

    for sweep in 0..max_sweeps {
        sweeps = sweep + 1;
        let mut delta_sq = F::zero();
        for j in 0..k {
            let ajj = stats.a[[j, j]];
            if ajj <= diag_tol {
                if sweep == 0 {
                    skipped.push(j);
                }
                continue;
            }
            // u_j = d_j + (b_j - D a_j) / A[j,j]
            let da = dict.atoms.dot(&stats.a.column(j));
            for r in 0..m {
                u[r] = dict.atoms[[r, j]] + (stats.b[[r, j]] - da[r]) / ajj;
            }
            let projected = dict.constraint.project(&u.view())?;
            for r in 0..m {
                let d = projected[r] - dict.atoms[[r, j]];
                delta_sq += d * d;
                dict.atoms[[r, j]] = projected[r];
            }
        }
        last_delta = delta_sq.sqrt();
        if last_delta < tol {
            break;
        }
    }
    Ok(UpdateReport {
        sweeps,
        last_delta,
        skipped,
    })
}

/// Replaces atoms whose usage counters reached `threshold` with random
/// training samples scaled to the constraint set. Returns the replaced
/// indices; the caller is expected to clear the matching rows/columns of
/// its surrogate statistics.
pub fn replace_unused_atoms<F: Float>(
    dict: &mut Dictionary<F>,
    usage: &[usize],
    threshold: usize,
    samples: &ArrayView2<F>,
    rng_seed: u64,
) -> Result<Vec<usize>> {
    if usage.len() != dict.k() {
        return Err(Error::DimensionMismatch {
            context: "usage counters",
            expected: dict.k(),
            got: usage.len(),
        });
    }
    if samples.ncols() == 0 {
        return Err(Error::EmptySource);
    }
    if samples.nrows() != dict.m() {
        return Err(Error::DimensionMismatch {
            context: "replacement samples",
            expected: dict.m(),
            got: samples.nrows(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut replaced = Vec::new();
    for (j, &used) in usage.iter().enumerate() {
        if used < threshold {
            continue;
        }
        let pick = rng.gen_range(0..samples.ncols());
        let mut col = samples.column(pick).to_owned();
        let norm = col.iter().map(|&v| v * v).sum::<F>().sqrt();
        if norm > F::zero() {
            col.mapv_inplace(|v| v / norm);
        }
        let col = dict.constraint.project(&col.view())?;
        dict.set_atom(j, &col);
        replaced.push(j);
    }
    Ok(replaced)
}
