//! Orthogonal projections onto the dictionary-column constraint sets and the
//! fused-lasso signal approximation operator.

mod elastic_net;
mod fused;

pub use elastic_net::{project_elastic_net, project_elastic_net_with_rng};
pub use fused::{
    cumsum, difference_gram_inverse_apply, fused_lasso_prox, project_fused_lasso_set,
    project_fused_lasso_set_radius, suffix_sum, ProxWeights,
};

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::float::Float;

/// Which convex set a dictionary column must lie in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    L2Ball,
    NonnegL2Ball,
    ElasticNetBall,
    FusedLassoBall,
}

/// A per-column constraint set for the dictionary.
///
/// The constraint functional depends on the kind:
/// `L2Ball`/`NonnegL2Ball` bound the l2 norm by `radius`;
/// `ElasticNetBall` bounds `||u||_2^2 + gamma ||u||_1`;
/// `FusedLassoBall` bounds `||u||_2^2 + gamma1 ||u||_1 + gamma2 FL(u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintSet<F> {
    pub kind: ConstraintKind,
    /// Elastic-net sparsity weight (read by `ElasticNetBall`).
    pub gamma: F,
    /// l1 weight of the fused-lasso ball.
    pub gamma1: F,
    /// Consecutive-difference weight of the fused-lasso ball.
    pub gamma2: F,
    /// Constraint radius, 1 by default.
    pub radius: F,
}

impl<F: Float> ConstraintSet<F> {
    pub fn l2_ball() -> Self {
        ConstraintSet {
            kind: ConstraintKind::L2Ball,
            gamma: F::zero(),
            gamma1: F::zero(),
            gamma2: F::zero(),
            radius: F::one(),
        }
    }

    pub fn nonneg_l2_ball() -> Self {
        ConstraintSet {
            kind: ConstraintKind::NonnegL2Ball,
            ..Self::l2_ball()
        }
    }

    pub fn elastic_net_ball(gamma: F) -> Self {
        ConstraintSet {
            kind: ConstraintKind::ElasticNetBall,
            gamma,
            ..Self::l2_ball()
        }
    }

    pub fn fused_lasso_ball(gamma1: F, gamma2: F) -> Self {
        ConstraintSet {
            kind: ConstraintKind::FusedLassoBall,
            gamma1,
            gamma2,
            ..Self::l2_ball()
        }
    }

    pub fn with_radius(mut self, radius: F) -> Self {
        self.radius = radius;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma < F::zero() || self.gamma1 < F::zero() || self.gamma2 < F::zero() {
            return Err(Error::InvalidConfig(
                "constraint weights must be non-negative".into(),
            ));
        }
        if self.radius <= F::zero() {
            return Err(Error::InvalidConfig(
                "constraint radius must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Value of the constraint functional at `u` (compared against `radius`).
    pub fn value(&self, u: &ArrayView1<F>) -> F {
        match self.kind {
            ConstraintKind::L2Ball | ConstraintKind::NonnegL2Ball => norm2(u),
            ConstraintKind::ElasticNetBall => {
                let l1: F = u.iter().map(|v| v.abs()).sum();
                sq_norm(u) + self.gamma * l1
            }
            ConstraintKind::FusedLassoBall => {
                let l1: F = u.iter().map(|v| v.abs()).sum();
                sq_norm(u) + self.gamma1 * l1 + self.gamma2 * fl_value(u)
            }
        }
    }

    /// Constraint violation at `u`: zero when feasible.
    pub fn violation(&self, u: &ArrayView1<F>) -> F {
        let excess = (self.value(u) - self.radius).max(F::zero());
        match self.kind {
            ConstraintKind::NonnegL2Ball => {
                let neg = u
                    .iter()
                    .fold(F::zero(), |acc, &v| acc.max(-v.min(F::zero())));
                excess.max(neg)
            }
            _ => excess,
        }
    }

    pub fn is_feasible(&self, u: &ArrayView1<F>, tol: F) -> bool {
        self.violation(u) <= tol
    }

    /// Orthogonal projection of `u` onto the set.
    pub fn project(&self, u: &ArrayView1<F>) -> Result<Array1<F>> {
        match self.kind {
            ConstraintKind::L2Ball => Ok(scale_to_ball(u.to_owned(), self.radius)),
            ConstraintKind::NonnegL2Ball => {
                let clipped = u.mapv(|v| v.max(F::zero()));
                Ok(scale_to_ball(clipped, self.radius))
            }
            ConstraintKind::ElasticNetBall => {
                if self.gamma == F::zero() {
                    // Pure quadratic ball of radius sqrt(tau).
                    return Ok(scale_to_ball(u.to_owned(), self.radius.sqrt()));
                }
                // ||u||_2^2 + g ||u||_1 <= tau over g is the Appendix-style
                // ball ||u||_1 + (g'/2)||u||_2^2 <= tau' with g' = 2/g,
                // tau' = tau/g.
                let g = F::cast(2.0) / self.gamma;
                project_elastic_net(u, g, self.radius / self.gamma, false)
            }
            ConstraintKind::FusedLassoBall => {
                project_fused_lasso_set_radius(u, self.gamma1, self.gamma2, self.radius)
            }
        }
    }
}

fn sq_norm<F: Float>(u: &ArrayView1<F>) -> F {
    u.iter().map(|&v| v * v).sum()
}

fn norm2<F: Float>(u: &ArrayView1<F>) -> F {
    sq_norm(u).sqrt()
}

fn scale_to_ball<F: Float>(mut u: Array1<F>, radius: F) -> Array1<F> {
    let n = norm2(&u.view());
    if n > radius {
        let s = radius / n;
        u.mapv_inplace(|v| v * s);
    }
    u
}

/// Projection onto the unit l2 ball: `u` unchanged when inside, `u/||u||_2`
/// otherwise.
pub fn project_l2_ball<F: Float>(u: &ArrayView1<F>) -> Array1<F> {
    scale_to_ball(u.to_owned(), F::one())
}

/// Total variation of a vector: the l1 norm of its consecutive differences.
pub fn fl_value<F: Float>(u: &ArrayView1<F>) -> F {
    u.iter()
        .zip(u.iter().skip(1))
        .map(|(a, b)| (*b - *a).abs())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn l2_ball_inside_unchanged() {
        let u = array![0.3f64, 0.4];
        assert_eq!(project_l2_ball(&u.view()), u);
    }

    #[test]
    fn l2_ball_scales_outside() {
        let u = array![3.0f64, 4.0];
        let p = project_l2_ball(&u.view());
        assert!((p[0] - 0.6).abs() < 1e-15);
        assert!((p[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn l2_ball_zero() {
        let u = array![0.0f64, 0.0, 0.0];
        assert_eq!(project_l2_ball(&u.view()), u);
    }

    #[test]
    fn fl_value_cases() {
        assert_eq!(fl_value(&array![1.0f64, 1.0, 1.0].view()), 0.0);
        assert_eq!(fl_value(&array![0.0f64, 1.0, 0.0].view()), 2.0);
        assert_eq!(fl_value(&array![2.5f64].view()), 0.0);
    }

    #[test]
    fn nonneg_ball_clips_then_scales() {
        let set = ConstraintSet::<f64>::nonneg_l2_ball();
        let p = set.project(&array![-1.0, 3.0, 4.0].view()).unwrap();
        assert_eq!(p[0], 0.0);
        assert!((p[1] - 0.6).abs() < 1e-15);
        assert!((p[2] - 0.8).abs() < 1e-15);
        assert!(set.is_feasible(&p.view(), 1e-12));
    }

    #[test]
    fn constraint_validation() {
        let mut set = ConstraintSet::<f64>::elastic_net_ball(0.5);
        set.validate().unwrap();
        set.radius = 0.0;
        assert!(set.validate().is_err());
    }
}
