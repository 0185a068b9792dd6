//! LARS-Lasso homotopy: traces the piecewise-linear solution path of the
//! (weighted, optionally non-negative or elastic-net) l1 coding problem in
//! decreasing lambda, with variable removal on sign changes and a rank-one
//! updated Cholesky factor of the active Gram matrix.

use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::float::Float;
use crate::linalg::ActiveCholesky;

use super::{PenaltyConfig, SparseCode};

/// Cholesky pivot threshold below which the active Gram matrix is declared
/// singular.
const PIVOT_TOL: f64 = 1e-12;
/// Tolerance for coincident path events; ties go to the lowest atom index.
const TIE_TOL: f64 = 1e-12;

/// Termination rule of the homotopy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule<F> {
    /// Stop once lambda reaches this level.
    LambdaMin(F),
    /// Stop once the l1 norm of the solution reaches this budget.
    L1Budget(F),
    /// Stop once the squared residual drops to this value.
    ResidualSq(F),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    LambdaReached,
    L1BudgetReached,
    ResidualReached,
    PathExhausted,
}

/// State of the path at one breakpoint: the solution on the active set and
/// the direction of the outgoing (lower-lambda) segment.
#[derive(Debug, Clone)]
pub struct PathKnot<F> {
    pub lambda: F,
    /// Active set in the order the solver admitted it.
    pub active: Vec<usize>,
    /// Coefficients aligned with `active`; entering atoms sit at zero.
    pub coefs: Vec<F>,
    /// Sign pattern aligned with `active` (zero marks unpenalized indices).
    pub signs: Vec<F>,
    /// Per-unit decrease of lambda, aligned with `active`; empty on the
    /// endpoint.
    pub direction: Vec<F>,
    dim: usize,
}

impl<F: Float> PathKnot<F> {
    /// The solution at this breakpoint as a sparse code.
    pub fn code(&self) -> SparseCode<F> {
        SparseCode::from_parts(
            self.dim,
            self.active.clone(),
            self.coefs.clone(),
            self.signs.clone(),
        )
    }
}

/// Piecewise-linear regularization path in decreasing lambda.
#[derive(Debug, Clone)]
pub struct RegPath<F> {
    /// Breakpoints where the active set changed, in path order.
    pub kinks: Vec<PathKnot<F>>,
    /// Where the stop rule fired, interpolated on the final segment.
    pub endpoint: PathKnot<F>,
    pub stop_reason: StopReason,
}

impl<F: Float> RegPath<F> {
    pub fn breakpoints(&self) -> Vec<F> {
        self.kinks.iter().map(|k| k.lambda).collect()
    }

    /// Solution at any lambda covered by the path: the lambda-infinity
    /// solution above the first breakpoint, linear interpolation in
    /// between, `None` below the endpoint.
    pub fn solution_at(&self, lambda: F) -> Option<SparseCode<F>> {
        if lambda < self.endpoint.lambda {
            return None;
        }
        let knot = match self.kinks.iter().rev().find(|k| k.lambda >= lambda) {
            Some(k) => k,
            // Above the first kink (or no kinks at all) the solution is
            // constant: entering coefficients are still zero there.
            None => return Some(self.kinks.first().unwrap_or(&self.endpoint).code()),
        };
        let step = knot.lambda - lambda;
        let coefs: Vec<F> = knot
            .coefs
            .iter()
            .zip(knot.direction.iter())
            .map(|(&v, &d)| v + step * d)
            .collect();
        Some(SparseCode::from_parts(
            knot.dim,
            knot.active.clone(),
            coefs,
            knot.signs.clone(),
        ))
    }
}

/// Traces the homotopy path of the coding problem for `x` against `dict`.
pub fn lars_lasso_path<F: Float>(
    x: &ArrayView1<F>,
    dict: &Dictionary<F>,
    penalty: &PenaltyConfig<F>,
    stop: StopRule<F>,
) -> Result<RegPath<F>> {
    if x.len() != dict.m() {
        return Err(Error::DimensionMismatch {
            context: "lars signal",
            expected: dict.m(),
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("lars signal"));
    }
    let gram = dict.gram();
    let q = dict.atoms().t().dot(x);
    let x_sq = x.iter().map(|&v| v * v).sum();
    lars_path_gram(&gram.view(), &q.view(), x_sq, penalty, stop)
}

/// Gram-space homotopy: `gram = D^T D`, `q = D^T x`, `x_sq = ||x||^2`.
/// The elastic-net weight of the penalty is folded into the Gram diagonal.
pub fn lars_path_gram<F: Float>(
    gram: &ArrayView2<F>,
    q: &ArrayView1<F>,
    x_sq: F,
    penalty: &PenaltyConfig<F>,
    stop: StopRule<F>,
) -> Result<RegPath<F>> {
    let k = gram.nrows();
    if gram.ncols() != k || q.len() != k {
        return Err(Error::DimensionMismatch {
            context: "lars gram problem",
            expected: k,
            got: q.len(),
        });
    }
    penalty.validate(k)?;
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("lars correlations"));
    }
    match stop {
        StopRule::LambdaMin(t) if t < F::zero() => {
            return Err(Error::InvalidConfig("stop lambda must be >= 0".into()))
        }
        StopRule::L1Budget(t) if t < F::zero() => {
            return Err(Error::InvalidConfig("l1 budget must be >= 0".into()))
        }
        StopRule::ResidualSq(e) if e < F::zero() => {
            return Err(Error::InvalidConfig("residual target must be >= 0".into()))
        }
        _ => {}
    }
    let has_zero_weight = penalty
        .per_index_weights
        .as_ref()
        .is_some_and(|w| w.iter().any(|v| *v == F::zero()));
    if has_zero_weight && (penalty.nonneg || !matches!(stop, StopRule::LambdaMin(_))) {
        return Err(Error::InvalidConfig(
            "zero penalty weights require a plain lambda stop without non-negativity".into(),
        ));
    }

    Solver::new(gram.view(), q.view(), x_sq, penalty)?.run(stop)
}

struct Solver<'a, F> {
    gram: ArrayView2<'a, F>,
    q: ArrayView1<'a, F>,
    x_sq: F,
    penalty: &'a PenaltyConfig<F>,
    k: usize,
    active: Vec<usize>,
    in_active: Vec<bool>,
    signs: Vec<F>,
    alpha: Vec<F>,
    chol: ActiveCholesky<F>,
}

enum Event<F> {
    Bound(StopReason),
    Stop(StopReason),
    Enter(usize, F),
    Leave(usize),
}

impl<'a, F: Float> Solver<'a, F> {
    fn new(
        gram: ArrayView2<'a, F>,
        q: ArrayView1<'a, F>,
        x_sq: F,
        penalty: &'a PenaltyConfig<F>,
    ) -> Result<Self> {
        let k = gram.nrows();
        let mut solver = Solver {
            gram,
            q,
            x_sq,
            penalty,
            k,
            active: Vec::new(),
            in_active: vec![false; k],
            signs: Vec::new(),
            alpha: Vec::new(),
            chol: ActiveCholesky::new(F::cast(PIVOT_TOL)),
        };
        // Unpenalized indices are active from the start; their restricted
        // least-squares solution is the lambda -> infinity limit.
        if penalty.per_index_weights.is_some() {
            let zero_weight: Vec<usize> =
                (0..k).filter(|&j| penalty.weight(j) == F::zero()).collect();
            for &j in &zero_weight {
                solver.insert(j, F::zero())?;
            }
            if !zero_weight.is_empty() {
                let rhs: Vec<F> = solver.active.iter().map(|&j| q[j]).collect();
                solver.alpha = solver.chol.solve(&rhs);
            }
        }
        Ok(solver)
    }

    #[inline]
    fn geff(&self, i: usize, j: usize) -> F {
        let g = self.gram[[i, j]];
        if i == j {
            g + self.penalty.l2_weight
        } else {
            g
        }
    }

    fn insert(&mut self, j: usize, sign: F) -> Result<()> {
        let cross: Vec<F> = self.active.iter().map(|&a| self.geff(a, j)).collect();
        self.chol.insert(&cross, self.geff(j, j), j)?;
        self.active.push(j);
        self.in_active[j] = true;
        self.signs.push(sign);
        self.alpha.push(F::zero());
        Ok(())
    }

    fn remove(&mut self, pos: usize) {
        let j = self.active.remove(pos);
        self.in_active[j] = false;
        self.signs.remove(pos);
        self.alpha.remove(pos);
        self.chol.remove(pos);
    }

    /// Residual correlations `q - G~ alpha` for all atoms.
    fn correlations(&self) -> Array1<F> {
        let mut c = self.q.to_owned();
        for (pos, &a) in self.active.iter().enumerate() {
            let v = self.alpha[pos];
            if v != F::zero() {
                for j in 0..self.k {
                    c[j] -= self.geff(j, a) * v;
                }
            }
        }
        c
    }

    fn knot(&self, lambda: F, direction: Vec<F>) -> PathKnot<F> {
        PathKnot {
            lambda,
            active: self.active.clone(),
            coefs: self.alpha.clone(),
            signs: self.signs.clone(),
            direction,
            dim: self.k,
        }
    }

    fn l1_norm(&self) -> F {
        self.alpha.iter().map(|v| v.abs()).sum()
    }

    /// Squared residual `||x - D alpha||^2` from the Gram-space identity
    /// `D^T r = c + l2 * alpha`.
    fn residual_sq(&self, c: &Array1<F>) -> F {
        let mut v = self.x_sq;
        for (pos, &a) in self.active.iter().enumerate() {
            let ai = self.alpha[pos];
            v -= ai * (self.q[a] + c[a] + self.penalty.l2_weight * ai);
        }
        v.max(F::zero())
    }

    /// Largest correlation-to-weight ratio among atoms that may enter, with
    /// its index and entry sign. Ties prefer the lowest index.
    fn next_entry(&self, c: &Array1<F>) -> Option<(F, usize, F)> {
        let mut best: Option<(F, usize, F)> = None;
        for j in 0..self.k {
            if self.in_active[j] {
                continue;
            }
            let w = self.penalty.weight(j);
            if w == F::zero() {
                continue;
            }
            let (mag, sign) = if self.penalty.nonneg {
                (c[j] / w, F::one())
            } else {
                ((c[j] / w).abs(), c[j].signum())
            };
            let better = match &best {
                Some((b, _, _)) => mag > *b,
                None => mag > F::zero(),
            };
            if better {
                best = Some((mag, j, sign));
            }
        }
        best
    }

    fn finish(&self, kinks: Vec<PathKnot<F>>, lambda: F, reason: StopReason) -> RegPath<F> {
        RegPath {
            kinks,
            endpoint: self.knot(lambda, Vec::new()),
            stop_reason: reason,
        }
    }

    fn run(mut self, stop: StopRule<F>) -> Result<RegPath<F>> {
        let tie = F::cast(TIE_TOL);
        let mut c = self.correlations();
        let entry = self.next_entry(&c);

        // Stops that fire before any penalized atom enters.
        match stop {
            StopRule::LambdaMin(t) => {
                if entry.is_none_or(|(l, _, _)| t >= l) {
                    return Ok(self.finish(Vec::new(), t, StopReason::LambdaReached));
                }
            }
            StopRule::L1Budget(t) => {
                if self.l1_norm() >= t {
                    let l = entry.map_or(F::zero(), |(l, _, _)| l);
                    return Ok(self.finish(Vec::new(), l, StopReason::L1BudgetReached));
                }
                if entry.is_none() {
                    return Ok(self.finish(Vec::new(), F::zero(), StopReason::PathExhausted));
                }
            }
            StopRule::ResidualSq(e) => {
                if self.residual_sq(&c) <= e {
                    let l = entry.map_or(F::zero(), |(l, _, _)| l);
                    return Ok(self.finish(Vec::new(), l, StopReason::ResidualReached));
                }
                if entry.is_none() {
                    return Ok(self.finish(Vec::new(), F::zero(), StopReason::PathExhausted));
                }
            }
        }
        let (mut lambda, first, first_sign) = entry.expect("entry checked above");
        self.insert(first, first_sign)?;

        let mut kinks: Vec<PathKnot<F>> = Vec::new();
        let max_events = 100 * self.k + 1000;
        for _ in 0..max_events {
            // Direction of the current segment: G~_AA dir = w_A * sign_A.
            let rhs: Vec<F> = self
                .active
                .iter()
                .zip(self.signs.iter())
                .map(|(&a, &s)| self.penalty.weight(a) * s)
                .collect();
            let dir = self.chol.solve(&rhs);
            kinks.push(self.knot(lambda, dir.clone()));

            // Correlation decay rates r = G~[:, active] * dir.
            let mut rate = vec![F::zero(); self.k];
            for (pos, &a) in self.active.iter().enumerate() {
                let d = dir[pos];
                if d != F::zero() {
                    for (j, r) in rate.iter_mut().enumerate() {
                        *r += self.geff(j, a) * d;
                    }
                }
            }

            // Furthest the segment can run: the lambda target, or zero.
            let mut step;
            let mut event = match stop {
                StopRule::LambdaMin(t) => {
                    step = lambda - t;
                    Event::Bound(StopReason::LambdaReached)
                }
                _ => {
                    step = lambda;
                    Event::Bound(StopReason::PathExhausted)
                }
            };

            // Entering events, lowest index first on ties.
            for j in 0..self.k {
                if self.in_active[j] {
                    continue;
                }
                let w = self.penalty.weight(j);
                if w == F::zero() {
                    continue;
                }
                let d_pos = w - rate[j];
                if d_pos > tie {
                    let g = (lambda * w - c[j]) / d_pos;
                    if g > tie && g < step - tie {
                        step = g;
                        event = Event::Enter(j, F::one());
                    }
                }
                if !self.penalty.nonneg {
                    let d_neg = w + rate[j];
                    if d_neg > tie {
                        let g = (lambda * w + c[j]) / d_neg;
                        if g > tie && g < step - tie {
                            step = g;
                            event = Event::Enter(j, -F::one());
                        }
                    }
                }
            }

            // Leaving events: an active coefficient crosses zero; scanned in
            // ascending atom order so ties remove the lowest index.
            let mut order: Vec<usize> = (0..self.active.len()).collect();
            order.sort_unstable_by_key(|&p| self.active[p]);
            for &pos in &order {
                if self.penalty.weight(self.active[pos]) == F::zero() {
                    continue;
                }
                if dir[pos].abs() > tie {
                    let g = -self.alpha[pos] / dir[pos];
                    if g > tie && g < step - tie {
                        step = g;
                        event = Event::Leave(pos);
                    }
                }
            }

            // Stop-rule crossings inside the segment.
            if let StopRule::L1Budget(t) = stop {
                let slope: F = self
                    .signs
                    .iter()
                    .zip(dir.iter())
                    .map(|(&s, &d)| s * d)
                    .sum();
                if slope > tie {
                    let g = (t - self.l1_norm()) / slope;
                    if g >= F::zero() && g < step {
                        step = g;
                        event = Event::Stop(StopReason::L1BudgetReached);
                    }
                }
            }
            if let StopRule::ResidualSq(e) = stop {
                // ||r(g)||^2 = r0 - 2 g u + g^2 v on the segment.
                let r0 = self.residual_sq(&c);
                let mut u = F::zero();
                let mut v = F::zero();
                for (pos, &a) in self.active.iter().enumerate() {
                    let d = dir[pos];
                    u += d * (c[a] + self.penalty.l2_weight * self.alpha[pos]);
                    v += d * (rate[a] - self.penalty.l2_weight * d);
                }
                if r0 > e {
                    if let Some(g) = smallest_positive_root(v, -(u + u), r0 - e) {
                        if g < step {
                            step = g;
                            event = Event::Stop(StopReason::ResidualReached);
                        }
                    }
                }
            }

            // Advance to the event.
            for (pos, d) in dir.iter().enumerate() {
                self.alpha[pos] += step * *d;
            }
            lambda -= step;
            c = self.correlations();

            match event {
                Event::Bound(reason) | Event::Stop(reason) => {
                    return Ok(self.finish(kinks, lambda, reason));
                }
                Event::Enter(j, sign) => {
                    self.insert(j, sign)?;
                }
                Event::Leave(pos) => {
                    self.alpha[pos] = F::zero();
                    self.remove(pos);
                }
            }
        }
        Err(Error::NonConvergence {
            iterations: max_events,
            residual: lambda.to_f64_lossy(),
        })
    }
}

/// Smallest non-negative root of `a g^2 + b g + c = 0`.
fn smallest_positive_root<F: Float>(a: F, b: F, c: F) -> Option<F> {
    let tiny = F::cast(1e-30);
    if a.abs() <= tiny {
        if b.abs() <= tiny {
            return None;
        }
        let g = -c / b;
        return if g >= F::zero() { Some(g) } else { None };
    }
    let disc = b * b - F::cast(4.0) * a * c;
    if disc < F::zero() {
        return None;
    }
    let sq = disc.sqrt();
    let two_a = F::cast(2.0) * a;
    let (r1, r2) = ((-b - sq) / two_a, (-b + sq) / two_a);
    let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
    if lo >= F::zero() {
        Some(lo)
    } else if hi >= F::zero() {
        Some(hi)
    } else {
        None
    }
}
