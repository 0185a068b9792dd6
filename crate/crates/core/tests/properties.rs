//! Property suites: projection geometry, path structure, preprocessing
//! norms, and loader robustness under arbitrary bytes.

mod common;

use ndarray::{Array1, Array2};
use proptest::prelude::*;

use common::*;
use omf_core::data_io::{parse_matrix, parse_raster, preprocess};
use omf_core::projections::{
    cumsum, fl_value, fused_lasso_prox, project_elastic_net, project_l2_ball, suffix_sum,
    ConstraintSet, ProxWeights,
};
use omf_core::sparse_coding::{
    kkt_residual, lars_lasso_path, lasso_solve, PenaltyConfig, StopRule,
};

fn small_vec(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 1..max_len)
}

fn dist(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

proptest! {
    #[test]
    fn l2_projection_is_sound(v in small_vec(12)) {
        let b = Array1::from_vec(v);
        let p = project_l2_ball(&b.view());
        let norm: f64 = p.dot(&p).sqrt();
        prop_assert!(norm <= 1.0 + 1e-12);
        let again = project_l2_ball(&p.view());
        prop_assert!(dist(&p, &again) <= 1e-12);
        // Nearest-point dominance against scaled feasible points.
        for c in [0.1, 0.5, 0.9] {
            let y = &b * (c / b.dot(&b).sqrt().max(1e-9));
            if y.dot(&y).sqrt() <= 1.0 {
                prop_assert!(dist(&b, &p) <= dist(&b, &y) + 1e-12);
            }
        }
    }

    #[test]
    fn elastic_net_projection_is_sound(
        v in small_vec(12),
        gamma in 0.0f64..3.0,
        tau in 0.05f64..2.0,
    ) {
        let b = Array1::from_vec(v);
        let p = project_elastic_net(&b.view(), gamma, tau, false).unwrap();
        prop_assert!(en_value(&p.view(), gamma) <= tau + 1e-10);
        let again = project_elastic_net(&p.view(), gamma, tau, false).unwrap();
        prop_assert!(dist(&p, &again) <= 1e-12);
        let oracle = elastic_net_projection_bisect(&b.view(), gamma, tau);
        prop_assert!(dist(&p, &oracle) <= 1e-8);
    }

    #[test]
    fn nonneg_elastic_net_projection_is_sound(
        v in small_vec(10),
        gamma in 0.0f64..2.0,
        tau in 0.05f64..1.5,
    ) {
        let b = Array1::from_vec(v);
        let p = project_elastic_net(&b.view(), gamma, tau, true).unwrap();
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!(en_value(&p.view(), gamma) <= tau + 1e-10);
        let again = project_elastic_net(&p.view(), gamma, tau, true).unwrap();
        prop_assert!(dist(&p, &again) <= 1e-12);
    }

    #[test]
    fn fused_ball_projection_is_sound(
        v in small_vec(8),
        g1 in 0.0f64..1.5,
        g2 in 0.0f64..1.5,
    ) {
        let b = Array1::from_vec(v);
        let set = ConstraintSet::fused_lasso_ball(g1, g2);
        let p = set.project(&b.view()).unwrap();
        prop_assert!(set.violation(&p.view()) <= 1e-10);
        let again = set.project(&p.view()).unwrap();
        prop_assert!(dist(&p, &again) <= 1e-12);
        // Dominance against shrunk feasible points.
        for c in [0.05, 0.2] {
            let y = &b * c;
            if set.is_feasible(&y.view(), 0.0) {
                prop_assert!(dist(&b, &p) <= dist(&b, &y) + 1e-10);
            }
        }
    }

    #[test]
    fn fused_prox_reductions_hold(
        v in small_vec(10),
        g1 in 0.0f64..1.5,
        g2 in 0.0f64..1.5,
        g3 in 0.0f64..1.5,
    ) {
        let b = Array1::from_vec(v);
        let full = fused_lasso_prox(&b.view(), &ProxWeights::new(g1, g2, g3)).unwrap();
        let no_ridge = fused_lasso_prox(&b.view(), &ProxWeights::new(g1, g2, 0.0)).unwrap();
        for (f, n) in full.iter().zip(no_ridge.iter()) {
            prop_assert!((f - n / (1.0 + g3)).abs() <= 1e-12);
        }
        // The prox never grows the total variation.
        prop_assert!(fl_value(&full.view()) <= fl_value(&b.view()) + 1e-10);
    }

    #[test]
    fn cumsum_operators_match_dense(v in small_vec(24)) {
        let m = v.len();
        let mut design = Array2::<f64>::zeros((m, m));
        for r in 0..m {
            for c in 0..=r {
                design[[r, c]] = 1.0;
            }
        }
        let x = Array1::from_vec(v);
        let fast = Array1::from_vec(cumsum(x.as_slice().unwrap()));
        let dense = design.dot(&x);
        prop_assert!(dist(&fast, &dense) <= 1e-12);
        let fast_t = Array1::from_vec(suffix_sum(x.as_slice().unwrap()));
        let dense_t = design.t().dot(&x);
        prop_assert!(dist(&fast_t, &dense_t) <= 1e-12);
    }

    #[test]
    fn preprocess_norms_are_exact(
        cols in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 4), 1..6),
    ) {
        let n = cols.len();
        let mut x = Array2::zeros((4, n));
        for (c, col) in cols.iter().enumerate() {
            for (r, v) in col.iter().enumerate() {
                x[[r, c]] = *v;
            }
        }
        preprocess(&mut x, true, true);
        for col in x.columns() {
            let norm: f64 = col.dot(&col).sqrt();
            prop_assert!(norm <= 1e-12 || (norm - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn matrix_loader_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        // Errors are fine; panics are not.
        let _ = parse_matrix::<f64>(&bytes);
    }

    #[test]
    fn matrix_loader_never_panics_with_magic(tail in prop::collection::vec(any::<u8>(), 0..128)) {
        let mut bytes = b"OMFMAT01".to_vec();
        bytes.extend_from_slice(&tail);
        let _ = parse_matrix::<f64>(&bytes);
    }

    #[test]
    fn raster_loader_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        let _ = parse_raster(&bytes);
    }

    #[test]
    fn raster_loader_never_panics_with_magic(tail in prop::collection::vec(any::<u8>(), 0..128)) {
        let mut bytes = b"P5\n".to_vec();
        bytes.extend_from_slice(&tail);
        let _ = parse_raster(&bytes);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn homotopy_path_is_optimal_and_monotone(seed in 0u64..5000) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        use rand::{Rng, SeedableRng};
        let m = rng.gen_range(3..=10);
        let k = rng.gen_range(2..=14);
        let dict = unit_dict(m, k, &mut rng);
        let x = gaussian_vec(m, &mut rng);
        let path = lars_lasso_path(
            &x.view(),
            &dict,
            &PenaltyConfig::l1(0.0),
            StopRule::LambdaMin(0.02),
        );
        let path = match path {
            Ok(p) => p,
            // Degenerate Gram matrices are a legal refusal, not a failure.
            Err(omf_core::Error::DegeneratePath { .. }) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(format!("{e}"))),
        };
        let mut last_l1 = 0.0f64;
        let mut last_lambda = f64::INFINITY;
        for knot in path.kinks.iter().chain(std::iter::once(&path.endpoint)) {
            prop_assert!(knot.lambda >= 0.0 && knot.lambda < last_lambda + 1e-15);
            let code = knot.code();
            let res = kkt_residual(&x.view(), &dict, &code, knot.lambda).unwrap();
            prop_assert!(res < 1e-8, "kkt {res:e}");
            prop_assert!(code.l1_norm() >= last_l1 - 1e-12);
            last_l1 = code.l1_norm();
            last_lambda = knot.lambda;
        }
    }

    #[test]
    fn nonneg_codes_are_exactly_nonnegative(seed in 0u64..5000) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m = rng.gen_range(3..=10);
        let k = rng.gen_range(2..=14);
        let dict = unit_dict(m, k, &mut rng);
        let x = gaussian_vec(m, &mut rng);
        let code = lasso_solve(&x.view(), &dict, &PenaltyConfig::nonneg_l1(0.1));
        if let Ok(code) = code {
            prop_assert!(code.iter().all(|(_, v)| v >= 0.0));
        }
    }
}

/// The generic solvers instantiate in single precision as well.
#[test]
fn f32_instantiation_works() {
    let atoms = ndarray::array![[1.0f32, 0.0], [0.0, 1.0]];
    let dict =
        omf_core::dictionary::Dictionary::new(atoms, ConstraintSet::<f32>::l2_ball()).unwrap();
    let x = ndarray::array![0.9f32, -0.3];
    let code = lasso_solve(&x.view(), &dict, &PenaltyConfig::l1(0.5f32)).unwrap();
    assert!((code.get(0) - 0.4).abs() < 1e-6);
    assert_eq!(code.get(1), 0.0);

    let b = ndarray::array![3.0f32, 4.0];
    let p = project_l2_ball(&b.view());
    assert!((p[0] - 0.6).abs() < 1e-6);
}

/// Denser dominance check: the projection is the nearest feasible point
/// among a thousand random candidates per instance.
#[test]
fn projection_dominance_thousand_points() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(404);
    for _ in 0..5 {
        let m = rng.gen_range(2..=10);
        let b = gaussian_vec(m, &mut rng) * 2.0;
        let gamma = rng.gen_range(0.0..2.0);
        let tau = rng.gen_range(0.1..1.0);
        let p = project_elastic_net(&b.view(), gamma, tau, false).unwrap();
        let dp = dist(&b, &p);
        for _ in 0..1000 {
            let g = gaussian_vec(m, &mut rng);
            let v = en_value(&g.view(), gamma);
            let y = if v > tau { g * (tau / v) } else { g };
            assert!(dp <= dist(&b, &y) + 1e-12);
        }
    }
}

/// A planted dictionary explains its own data at least as well as a random
/// one, and traces keep increasing iterations with non-decreasing clocks.
#[test]
fn planted_dictionary_beats_random_and_traces_are_monotone() {
    use omf_core::data_io::synth_planted;
    use omf_core::learner::{empirical_objective, train, LearnerConfig};
    use rand::SeedableRng;

    let (data, planted) = synth_planted::<f64>(12, 8, 300, 2, 0.02, 55).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(56);
    let random = unit_dict(12, 8, &mut rng);
    let lambda = 0.02;
    let obj_planted = empirical_objective(&planted, &data.view(), lambda).unwrap();
    let obj_random = empirical_objective(&random, &data.view(), lambda).unwrap();
    assert!(
        obj_planted <= obj_random,
        "planted {obj_planted} vs random {obj_random}"
    );

    let mut config = LearnerConfig::<f64>::new(8, 0.2);
    config.batch_size = 16;
    config.iterations = 30;
    config.rng_seed = 4;
    let (_, trace) = train(&data.view(), &config, None).unwrap();
    for pair in trace.checkpoints.windows(2) {
        assert!(pair[1].iter > pair[0].iter);
        assert!(pair[1].wall_clock_s >= pair[0].wall_clock_s);
    }
}
