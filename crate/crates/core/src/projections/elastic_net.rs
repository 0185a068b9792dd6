//! Expected-linear-time projection onto the elastic-net ball
//! `{u : ||u||_1 + (gamma/2) ||u||_2^2 <= tau}`.

use ndarray::{Array1, ArrayView1};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::float::Float;

/// Projects `b` onto the elastic-net ball of radius `tau`.
///
/// With `nonneg` the target set is additionally restricted to the
/// non-negative orthant. Setting `gamma = 0` recovers the plain l1-ball
/// projection. Uses a randomized pivot partition to locate the support of
/// the solution, then the closed-form threshold
/// `u[j] = sign(b[j]) (|b[j]| - lambda)^+ / (1 + lambda * gamma)`.
pub fn project_elastic_net<F: Float>(
    b: &ArrayView1<F>,
    gamma: F,
    tau: F,
    nonneg: bool,
) -> Result<Array1<F>> {
    // Fixed seed: the pivot order only affects running time, and the final
    // threshold is re-accumulated deterministically below.
    let mut rng = ChaCha8Rng::seed_from_u64(0x656e5f70726f6a);
    project_elastic_net_with_rng(b, gamma, tau, nonneg, &mut rng)
}

/// Same as [`project_elastic_net`] with an explicit pivot RNG.
pub fn project_elastic_net_with_rng<F: Float, R: Rng>(
    b: &ArrayView1<F>,
    gamma: F,
    tau: F,
    nonneg: bool,
    rng: &mut R,
) -> Result<Array1<F>> {
    if tau <= F::zero() {
        return Err(Error::InvalidConfig(
            "elastic-net projection radius must be positive".into(),
        ));
    }
    if gamma < F::zero() {
        return Err(Error::InvalidConfig(
            "elastic-net projection gamma must be non-negative".into(),
        ));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("elastic-net projection input"));
    }

    let half = F::cast(0.5);
    // Magnitudes the threshold acts on; the non-negative case clips first.
    let mag: Vec<F> = if nonneg {
        b.iter().map(|&v| v.max(F::zero())).collect()
    } else {
        b.iter().map(|&v| v.abs()).collect()
    };

    let value: F = mag
        .iter()
        .map(|&a| a + half * gamma * a * a)
        .fold(F::zero(), |acc, v| acc + v);
    if value <= tau {
        // Already feasible: the projection only clips in the non-negative case.
        let u = if nonneg {
            Array1::from_vec(mag)
        } else {
            b.to_owned()
        };
        return Ok(u);
    }

    // Randomized pivot partition locating the support {j : |b[j]| >= lambda*}.
    let mut pool: Vec<usize> = (0..mag.len()).filter(|&j| mag[j] > F::zero()).collect();
    let mut s = F::zero();
    let mut rho = F::zero();
    let mut support_min = F::infinity();
    while !pool.is_empty() {
        let pivot_idx = pool[rng.gen_range(0..pool.len())];
        let pivot = mag[pivot_idx];
        let mut ge: Vec<usize> = Vec::with_capacity(pool.len());
        let mut lt: Vec<usize> = Vec::with_capacity(pool.len());
        let mut ds = F::zero();
        for &j in &pool {
            if mag[j] >= pivot {
                ds = ds + mag[j] + half * gamma * mag[j] * mag[j];
                ge.push(j);
            } else {
                lt.push(j);
            }
        }
        let drho = F::cast(ge.len());
        let one_plus = F::one() + gamma * pivot;
        if s + ds - (rho + drho) * (F::one() + half * gamma * pivot) * pivot
            < tau * one_plus * one_plus
        {
            // The pivot magnitude is inside the support: keep everything at
            // or above it and recurse on the smaller entries.
            s += ds;
            rho += drho;
            support_min = pivot;
            pool = lt;
        } else {
            ge.retain(|&j| j != pivot_idx);
            pool = ge;
        }
    }

    // Re-accumulate the support sums in index order: makes the threshold
    // independent of the pivot order and bit-reproducible.
    let mut s = F::zero();
    let mut rho = F::zero();
    for &a in &mag {
        if a >= support_min {
            s = s + a + half * gamma * a * a;
            rho += F::one();
        }
    }

    let lambda = if gamma == F::zero() {
        (s - tau) / rho
    } else {
        let qa = gamma * gamma * tau + half * gamma * rho;
        let qb = F::cast(2.0) * gamma * tau + rho;
        let qc = tau - s;
        (-qb + (qb * qb - F::cast(4.0) * qa * qc).sqrt()) / (F::cast(2.0) * qa)
    };

    let denom = F::one() + lambda * gamma;
    let u = Array1::from_iter(b.iter().zip(mag.iter()).map(|(&bj, &aj)| {
        let shrunk = (aj - lambda).max(F::zero()) / denom;
        if nonneg {
            shrunk
        } else {
            bj.signum() * shrunk
        }
    }));
    Ok(u)
}
