//! Fused-lasso signal approximation and the projection onto the
//! fused-lasso constraint ball.
//!
//! The core solver handles `min 1/2 ||b - u||^2 + mu * FL(u)` by a homotopy
//! in `mu` over the difference variables `v[0] = u[0]`,
//! `v[i] = u[i] - u[i-1]`, which is a weighted Lasso against the
//! lower-triangular all-ones design. The structure of that design gives
//! O(m) applications of the matrix and its adjoint, and a closed-form
//! tridiagonal inverse of the active Gram matrix, so the whole path costs
//! O(m * s) for s kinks.

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::float::Float;

/// Weights of the fused-lasso signal approximation
/// `1/2 ||b - u||^2 + l1 ||u||_1 + fuse FL(u) + (ridge/2) ||u||^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxWeights<F> {
    pub l1: F,
    pub fuse: F,
    pub ridge: F,
}

impl<F: Float> ProxWeights<F> {
    pub fn new(l1: F, fuse: F, ridge: F) -> Self {
        ProxWeights { l1, fuse, ridge }
    }

    fn validate(&self) -> Result<()> {
        if self.l1 < F::zero() || self.fuse < F::zero() || self.ridge < F::zero() {
            return Err(Error::InvalidConfig(
                "fused-lasso weights must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Running sum `e[i] = w[0] + ... + w[i]`: the lower-triangular all-ones
/// design applied to `w` in O(m).
pub fn cumsum<F: Float>(w: &[F]) -> Vec<F> {
    let mut e = Vec::with_capacity(w.len());
    let mut acc = F::zero();
    for &wi in w {
        acc += wi;
        e.push(acc);
    }
    e
}

/// Suffix sum `e[i] = w[i] + ... + w[m-1]`: the transposed design applied
/// to `w` in O(m).
pub fn suffix_sum<F: Float>(w: &[F]) -> Vec<F> {
    let mut e = vec![F::zero(); w.len()];
    let mut acc = F::zero();
    for i in (0..w.len()).rev() {
        acc += w[i];
        e[i] = acc;
    }
    e
}

/// Applies the closed-form inverse of the active Gram matrix of the
/// cumulative-sum design. `active` holds the active column indices in
/// ascending order, `m` the signal length.
///
/// The inverse is tridiagonal with stencil weights `1/gap` between
/// consecutive active indices (the last gap runs to `m`).
pub fn difference_gram_inverse_apply<F: Float>(active: &[usize], m: usize, rhs: &[F]) -> Vec<F> {
    let p = active.len();
    debug_assert_eq!(rhs.len(), p);
    debug_assert!(active.windows(2).all(|w| w[0] < w[1]));
    let gap_inv = |i: usize| -> F {
        let next = if i + 1 < p { active[i + 1] } else { m };
        F::one() / F::cast(next - active[i])
    };
    let mut out = vec![F::zero(); p];
    for i in 0..p {
        let g_i = gap_inv(i);
        let mut v = g_i * rhs[i];
        if i > 0 {
            let g_prev = gap_inv(i - 1);
            v = v + g_prev * rhs[i] - g_prev * rhs[i - 1];
        }
        if i + 1 < p {
            v -= g_i * rhs[i + 1];
        }
        out[i] = v;
    }
    out
}

const KINK_TOL: f64 = 1e-12;

/// Solution of `min 1/2 ||b - u||^2 + mu FL(u)` for the target level
/// `mu = fuse`, computed by the difference-space homotopy.
fn tv_prox<F: Float>(b: &ArrayView1<F>, fuse: F) -> Result<Array1<F>> {
    let m = b.len();
    if m <= 1 || fuse <= F::zero() {
        return Ok(b.to_owned());
    }

    let kink = F::cast(KINK_TOL);
    let b_slice: Vec<F> = b.iter().copied().collect();

    // Level mu = infinity: only the unpenalized offset variable is active
    // and u is the constant mean signal.
    let mean = b.iter().copied().sum::<F>() / F::cast(m);
    let mut v = vec![F::zero(); m];
    v[0] = mean;
    let mut active: Vec<usize> = vec![0];
    let mut signs: Vec<F> = vec![F::zero()];

    // Residual correlations c = D^T (b - D v).
    let corr = |v: &[F]| -> Vec<F> {
        let fit = cumsum(v);
        let resid: Vec<F> = b_slice
            .iter()
            .zip(fit.iter())
            .map(|(&bi, &fi)| bi - fi)
            .collect();
        suffix_sum(&resid)
    };

    let mut c = corr(&v);
    let mut mu = c
        .iter()
        .enumerate()
        .skip(1)
        .map(|(_, &ci)| ci.abs())
        .fold(F::zero(), F::max);
    if mu <= fuse {
        return Ok(Array1::from_vec(cumsum(&v)));
    }
    // Bring the first difference variable in at the initial level. Ties go
    // to the lowest index.
    {
        let (j, cj) = c
            .iter()
            .enumerate()
            .skip(1)
            .fold((0usize, F::zero()), |(bj, bc), (j, &cj)| {
                if cj.abs() > bc.abs() {
                    (j, cj)
                } else {
                    (bj, bc)
                }
            });
        let pos = active.binary_search(&j).unwrap_err();
        active.insert(pos, j);
        signs.insert(pos, cj.signum());
    }

    let max_events = 50 * m + 100;
    for _ in 0..max_events {
        // Direction in the active difference variables.
        let rhs: Vec<F> = active
            .iter()
            .zip(signs.iter())
            .map(|(&a, &s)| if a == 0 { F::zero() } else { s })
            .collect();
        let dir = difference_gram_inverse_apply(&active, m, &rhs);

        // Correlation decay rates for all indices.
        let mut dir_full = vec![F::zero(); m];
        for (pos, &a) in active.iter().enumerate() {
            dir_full[a] = dir[pos];
        }
        let rate = suffix_sum(&cumsum(&dir_full));

        // Largest step before mu reaches the target.
        let mut step = mu - fuse;
        enum Event<T> {
            Target,
            Enter(usize, T),
            Leave(usize),
        }
        let mut event: Event<F> = Event::Target;

        // Entering events: an inactive difference hits the shrinking bound
        // mu - g from above (sign +1) or below (sign -1).
        for j in 1..m {
            if active.binary_search(&j).is_ok() {
                continue;
            }
            let d_pos = F::one() - rate[j];
            if d_pos > kink {
                let g = (mu - c[j]) / d_pos;
                if g > kink && g < step - kink {
                    step = g;
                    event = Event::Enter(j, F::one());
                }
            }
            let d_neg = F::one() + rate[j];
            if d_neg > kink {
                let g = (mu + c[j]) / d_neg;
                if g > kink && g < step - kink {
                    step = g;
                    event = Event::Enter(j, -F::one());
                }
            }
        }
        // Leaving events: an active difference crosses zero.
        for (pos, &a) in active.iter().enumerate() {
            if a == 0 {
                continue;
            }
            if dir[pos].abs() > kink {
                let g = -v[a] / dir[pos];
                if g > kink && g < step - kink {
                    step = g;
                    event = Event::Leave(pos);
                }
            }
        }

        for (pos, &a) in active.iter().enumerate() {
            v[a] += step * dir[pos];
        }
        mu -= step;
        c = corr(&v);

        match event {
            Event::Target => return Ok(Array1::from_vec(cumsum(&v))),
            Event::Enter(j, sign) => {
                let pos = active.binary_search(&j).unwrap_err();
                active.insert(pos, j);
                signs.insert(pos, sign);
            }
            Event::Leave(pos) => {
                v[active[pos]] = F::zero();
                active.remove(pos);
                signs.remove(pos);
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: max_events,
        residual: mu.to_f64_lossy(),
    })
}

/// Fused-lasso signal approximation: solves the total-variation core by the
/// homotopy, then applies the soft-threshold and ridge-scaling reductions.
pub fn fused_lasso_prox<F: Float>(b: &ArrayView1<F>, w: &ProxWeights<F>) -> Result<Array1<F>> {
    w.validate()?;
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("fused-lasso prox input"));
    }
    let mut u = tv_prox(b, w.fuse)?;
    if w.l1 > F::zero() {
        u.mapv_inplace(|x| x.signum() * (x.abs() - w.l1).max(F::zero()));
    }
    if w.ridge > F::zero() {
        let s = F::one() / (F::one() + w.ridge);
        u.mapv_inplace(|x| x * s);
    }
    Ok(u)
}

/// Constraint functional of the fused-lasso ball of §-style form
/// `||u||_2^2 + gamma1 ||u||_1 + gamma2 FL(u)`.
fn ball_value<F: Float>(u: &ArrayView1<F>, gamma1: F, gamma2: F) -> F {
    let sq: F = u.iter().map(|&x| x * x).sum();
    let l1: F = u.iter().map(|x| x.abs()).sum();
    sq + gamma1 * l1 + gamma2 * super::fl_value(u)
}

/// Projection onto `{u : ||u||_2^2 + gamma1 ||u||_1 + gamma2 FL(u) <= 1}`.
pub fn project_fused_lasso_set<F: Float>(
    b: &ArrayView1<F>,
    gamma1: F,
    gamma2: F,
) -> Result<Array1<F>> {
    project_fused_lasso_set_radius(b, gamma1, gamma2, F::one())
}

/// Same with an explicit constraint radius.
///
/// Follows the multiplier path `tau -> prox(b; tau*gamma1, tau*gamma2, 2*tau)`
/// and stops where the constraint value meets the radius; the stopping
/// point is located by bisection on the (monotone) constraint value.
pub fn project_fused_lasso_set_radius<F: Float>(
    b: &ArrayView1<F>,
    gamma1: F,
    gamma2: F,
    radius: F,
) -> Result<Array1<F>> {
    if gamma1 < F::zero() || gamma2 < F::zero() {
        return Err(Error::InvalidConfig(
            "fused-lasso ball weights must be non-negative".into(),
        ));
    }
    if radius <= F::zero() {
        return Err(Error::InvalidConfig(
            "fused-lasso ball radius must be positive".into(),
        ));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("fused-lasso projection input"));
    }
    // Small slack keeps re-projection of a boundary point a no-op.
    let slack = F::cast(1e-9) * radius.max(F::one());
    if ball_value(b, gamma1, gamma2) <= radius + slack {
        return Ok(b.to_owned());
    }

    let at = |tau: F| -> Result<(Array1<F>, F)> {
        let w = ProxWeights::new(tau * gamma1, tau * gamma2, F::cast(2.0) * tau);
        let u = fused_lasso_prox(b, &w)?;
        let val = ball_value(&u.view(), gamma1, gamma2);
        Ok((u, val))
    };

    let mut lo = F::zero();
    let mut hi = F::one();
    let mut u_hi;
    loop {
        let (u, val) = at(hi)?;
        u_hi = u;
        if val <= radius {
            break;
        }
        lo = hi;
        hi *= F::cast(2.0);
        if hi > F::cast(1e18) {
            return Err(Error::NonConvergence {
                iterations: 0,
                residual: val.to_f64_lossy(),
            });
        }
    }
    let tol = F::cast(1e-11) * radius.max(F::one());
    for _ in 0..200 {
        let mid = (lo + hi) * F::cast(0.5);
        let (u, val) = at(mid)?;
        if val <= radius {
            hi = mid;
            u_hi = u;
            if radius - val <= tol {
                break;
            }
        } else {
            lo = mid;
        }
        if hi - lo <= F::epsilon() * hi.max(F::one()) {
            break;
        }
    }
    Ok(u_hi)
}
