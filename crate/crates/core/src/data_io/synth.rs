//! Synthetic data from a planted dictionary, for desk-scale benchmarks.

use ndarray::{Array1, Array2};
use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::float::Float;
use crate::projections::ConstraintSet;

/// Draws a unit-column dictionary and `n` signals, each a combination of
/// `sparsity` atoms plus Gaussian noise of scale `noise`. Returns the data
/// (one signal per column) and the planted ground truth.
pub fn synth_planted<F: Float>(
    m: usize,
    k: usize,
    n: usize,
    sparsity: usize,
    noise: F,
    rng_seed: u64,
) -> Result<(Array2<F>, Dictionary<F>)>
where
    StandardNormal: Distribution<F>,
{
    if sparsity > k {
        return Err(Error::InvalidConfig(
            "sparsity cannot exceed the atom count".into(),
        ));
    }
    if m == 0 || k == 0 || n == 0 {
        return Err(Error::InvalidConfig(
            "planted instance needs m, k, n >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);

    let mut atoms = Array2::<F>::zeros((m, k));
    for j in 0..k {
        let mut norm_sq = F::zero();
        for r in 0..m {
            let v: F = StandardNormal.sample(&mut rng);
            atoms[[r, j]] = v;
            norm_sq += v * v;
        }
        let norm = norm_sq.sqrt();
        if norm > F::zero() {
            for r in 0..m {
                atoms[[r, j]] /= norm;
            }
        }
    }
    let dict = Dictionary::new(atoms, ConstraintSet::l2_ball())?;

    let mut data = Array2::<F>::zeros((m, n));
    let mut coef = Array1::<F>::zeros(k);
    for c in 0..n {
        coef.fill(F::zero());
        for j in sample(&mut rng, k, sparsity) {
            // Coefficients bounded away from zero so supports are real.
            let mag = F::cast(rng.gen_range(0.5..1.5));
            let sign = if rng.gen_bool(0.5) { F::one() } else { -F::one() };
            coef[j] = sign * mag;
        }
        let mut col = dict.atoms().dot(&coef);
        if noise > F::zero() {
            for v in col.iter_mut() {
                let e: F = StandardNormal.sample(&mut rng);
                *v += noise * e;
            }
        }
        data.column_mut(c).assign(&col);
    }
    Ok((data, dict))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_one_sparse_signals_are_scaled_atoms() {
        let (x, dict) = synth_planted::<f64>(6, 4, 10, 1, 0.0, 11).unwrap();
        for c in 0..10 {
            let col = x.column(c);
            let norm: f64 = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            // Find the atom this signal is proportional to.
            let mut best = 0.0f64;
            for j in 0..4 {
                let a = dict.atom(j);
                let dot: f64 = col.iter().zip(a.iter()).map(|(x, y)| x * y).sum();
                best = best.max(dot.abs());
            }
            assert!((best - norm).abs() < 1e-10, "column {c} not a scaled atom");
        }
    }

    #[test]
    fn reproducible_under_seed() {
        let (x1, d1) = synth_planted::<f64>(5, 3, 7, 2, 0.1, 99).unwrap();
        let (x2, d2) = synth_planted::<f64>(5, 3, 7, 2, 0.1, 99).unwrap();
        assert_eq!(x1, x2);
        assert_eq!(d1.atoms(), d2.atoms());
    }

    #[test]
    fn sparsity_bound_enforced() {
        assert!(synth_planted::<f64>(4, 3, 5, 4, 0.0, 0).is_err());
    }
}
