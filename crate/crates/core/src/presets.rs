//! Validated learner configurations for the matrix-factorization family:
//! dictionary learning, NMF, NNSC, sparse PCA and simultaneous (group)
//! coding.

use ndarray::{Array2, ArrayView2};

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::float::Float;
use crate::learner::{
    code_batch, init_dictionary, surrogate_objective, LearnerConfig,
    LearnerState, MetricsTrace,
};
use crate::projections::{ConstraintKind, ConstraintSet};
use crate::sparse_coding::{group_lasso_solve, PenaltyConfig, SparseCode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetKind {
    DictLearn,
    Nmf,
    Nnsc,
    Spca,
    GroupDictLearn,
}

/// A factorization preset: the problem kind plus its few tuning knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset<F> {
    pub kind: PresetKind,
    /// Coding penalty level; `None` picks the preset default.
    pub lambda: Option<F>,
    /// Elastic-net sparsity of the dictionary (SPCA only).
    pub gamma: F,
    /// Signals per group (group coding only).
    pub group_size: usize,
}

impl<F: Float> Preset<F> {
    pub fn dict_learn() -> Self {
        Preset {
            kind: PresetKind::DictLearn,
            lambda: None,
            gamma: F::zero(),
            group_size: 1,
        }
    }

    pub fn nmf() -> Self {
        Preset {
            kind: PresetKind::Nmf,
            ..Self::dict_learn()
        }
    }

    pub fn nnsc(lambda: Option<F>) -> Self {
        Preset {
            kind: PresetKind::Nnsc,
            lambda,
            ..Self::dict_learn()
        }
    }

    pub fn spca(gamma: F) -> Self {
        Preset {
            kind: PresetKind::Spca,
            gamma,
            ..Self::dict_learn()
        }
    }

    pub fn group(group_size: usize) -> Self {
        Preset {
            kind: PresetKind::GroupDictLearn,
            group_size,
            ..Self::dict_learn()
        }
    }

    /// Preprocessing the preset expects: (center, normalize). Centering is
    /// off for the non-negative problems to preserve their sign structure.
    pub fn preprocess_flags(&self) -> (bool, bool) {
        match self.kind {
            PresetKind::DictLearn | PresetKind::Spca => (true, true),
            PresetKind::Nmf | PresetKind::Nnsc => (false, true),
            PresetKind::GroupDictLearn => (true, true),
        }
    }
}

/// Wires a learner configuration for the preset; rejects inconsistent
/// parameter combinations (an NMF with a positive lambda, for instance).
pub fn make_preset<F: Float>(preset: &Preset<F>, m: usize, k: usize) -> Result<LearnerConfig<F>> {
    if m == 0 || k == 0 {
        return Err(Error::InvalidConfig("preset needs m, k >= 1".into()));
    }
    if let Some(l) = preset.lambda {
        if l < F::zero() {
            return Err(Error::InvalidConfig("preset lambda must be >= 0".into()));
        }
    }
    let default_lambda = LearnerConfig::<F>::default_lambda(m);
    let mut config = LearnerConfig::new(k, default_lambda);
    match preset.kind {
        PresetKind::DictLearn => {
            config.penalty = PenaltyConfig::l1(preset.lambda.unwrap_or(default_lambda));
            config.constraint = ConstraintSet::l2_ball();
        }
        PresetKind::Nmf => {
            if preset.lambda.is_some_and(|l| l > F::zero()) {
                return Err(Error::InvalidConfig(
                    "NMF has no l1 penalty; use the NNSC preset for lambda > 0".into(),
                ));
            }
            config.penalty = PenaltyConfig::nonneg_l1(F::zero());
            config.constraint = ConstraintSet::nonneg_l2_ball();
        }
        PresetKind::Nnsc => {
            let lambda = preset
                .lambda
                .unwrap_or_else(|| F::one() / F::cast(m).sqrt());
            // The lambda -> 0 limit of NNSC is exactly NMF.
            config.penalty = PenaltyConfig::nonneg_l1(lambda);
            config.constraint = ConstraintSet::nonneg_l2_ball();
        }
        PresetKind::Spca => {
            if preset.gamma < F::zero() {
                return Err(Error::InvalidConfig("SPCA gamma must be >= 0".into()));
            }
            config.penalty = PenaltyConfig::l1(preset.lambda.unwrap_or(default_lambda));
            config.constraint = if preset.gamma > F::zero() {
                ConstraintSet::elastic_net_ball(preset.gamma)
            } else {
                // gamma = 0 degenerates to the plain l2 ball.
                ConstraintSet::l2_ball()
            };
        }
        PresetKind::GroupDictLearn => {
            if preset.group_size == 0 {
                return Err(Error::InvalidConfig("group size must be >= 1".into()));
            }
            config.penalty = PenaltyConfig::l1(preset.lambda.unwrap_or(default_lambda));
            config.constraint = ConstraintSet::l2_ball();
        }
    }
    Ok(config)
}

/// Verifies that a (possibly hand-tuned) config still satisfies the
/// preset's invariants.
pub fn validate_preset_config<F: Float>(
    preset: &Preset<F>,
    config: &LearnerConfig<F>,
) -> Result<()> {
    config.validate()?;
    let nonneg_dict = matches!(config.constraint.kind, ConstraintKind::NonnegL2Ball);
    match preset.kind {
        PresetKind::Nmf => {
            if config.penalty.l1_weight != F::zero() || !config.penalty.nonneg || !nonneg_dict {
                return Err(Error::InvalidConfig(
                    "NMF requires lambda = 0 and non-negative codes and dictionary".into(),
                ));
            }
        }
        PresetKind::Nnsc => {
            // lambda = 0 is the NMF limit, still a valid configuration.
            if config.penalty.l1_weight < F::zero() || !config.penalty.nonneg || !nonneg_dict {
                return Err(Error::InvalidConfig(
                    "NNSC requires lambda >= 0 and non-negative codes and dictionary".into(),
                ));
            }
        }
        PresetKind::Spca => {
            if preset.gamma > F::zero()
                && !matches!(config.constraint.kind, ConstraintKind::ElasticNetBall)
            {
                return Err(Error::InvalidConfig(
                    "SPCA requires the elastic-net dictionary constraint".into(),
                ));
            }
        }
        PresetKind::DictLearn | PresetKind::GroupDictLearn => {}
    }
    Ok(())
}

/// A factorization: the dictionary, the final coding pass, and run metrics.
#[derive(Debug, Clone)]
pub struct FactorizeResult<F> {
    pub dict: Dictionary<F>,
    /// k x n coefficient matrix from one coding pass at the learned
    /// dictionary.
    pub codes: Array2<F>,
    pub trace: MetricsTrace,
    /// Fraction of nonzero dictionary entries (the tau of sparse PCA).
    pub dict_density: F,
}

/// Trains on the columns of `x` with a preset-validated config, then codes
/// the whole input once at the learned dictionary.
pub fn factorize<F: Float>(
    x: &ArrayView2<F>,
    preset: &Preset<F>,
    config: &LearnerConfig<F>,
) -> Result<FactorizeResult<F>> {
    validate_preset_config(preset, config)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("factorization input"));
    }
    let (center, normalize) = preset.preprocess_flags();
    let mut data = x.to_owned();
    crate::data_io::preprocess(&mut data, center, normalize);

    let (dict, trace) = crate::learner::train(&data.view(), config, None)?;
    let codes_sparse = code_batch(&dict, &data.view(), &config.penalty, config.coding)?;
    let mut codes = Array2::zeros((config.k, data.ncols()));
    for (i, code) in codes_sparse.iter().enumerate() {
        for (j, v) in code.iter() {
            codes[[j, i]] = v;
        }
    }
    let total = dict.atoms().len();
    let nonzero = dict.atoms().iter().filter(|v| **v != F::zero()).count();
    Ok(FactorizeResult {
        dict,
        codes,
        trace,
        dict_density: F::cast(nonzero) / F::cast(total),
    })
}

/// Online learning over groups of signals coded jointly with shared row
/// support; each draw is one group, statistics accumulate over the group's
/// columns unchanged.
pub fn group_factorize<F: Float>(
    groups: &[Array2<F>],
    preset: &Preset<F>,
    config: &LearnerConfig<F>,
) -> Result<(Dictionary<F>, MetricsTrace)> {
    validate_preset_config(preset, config)?;
    if groups.is_empty() {
        return Err(Error::EmptySource);
    }
    let m = groups[0].nrows();
    for g in groups {
        if g.nrows() != m {
            return Err(Error::DimensionMismatch {
                context: "group signal dimension",
                expected: m,
                got: g.nrows(),
            });
        }
        if g.ncols() == 0 {
            return Err(Error::InvalidConfig("empty group".into()));
        }
    }
    let group_tol = F::cast(1e-9);

    // Flatten once for the data-driven dictionary start.
    let total_cols: usize = groups.iter().map(|g| g.ncols()).sum();
    let mut flat = Array2::zeros((m, total_cols));
    let mut at = 0;
    for g in groups {
        for col in g.columns() {
            flat.column_mut(at).assign(&col);
            at += 1;
        }
    }
    let d0 = init_dictionary(&flat.view(), config)?;
    let mut state = LearnerState::init(config, d0)?;
    let mut order =
        crate::data_io::IndexCycle::new(groups.len(), config.rng_seed.wrapping_add(2))?;
    state.set_epoch_len(config, groups.len());

    let mut trace = MetricsTrace::default();
    let mut wall = 0.0f64;
    let mut next_checkpoint = 1usize;
    let half = F::cast(0.5);
    for t in 1..=config.iterations {
        let tick = std::time::Instant::now();
        let (gi, crossed) = order.next_index();
        let group = &groups[gi];
        let alpha = group_lasso_solve(
            &group.view(),
            state.dictionary(),
            config.penalty.l1_weight,
            group_tol,
        )?;
        let codes: Vec<SparseCode<F>> = (0..alpha.ncols())
            .map(|c| SparseCode::from_dense(&alpha.column(c)))
            .collect();
        // Constant term of the group surrogate: 1/2 ||X||^2 + lambda ||a||_{1,2}.
        let x_sq: F = group.iter().map(|&v| v * v).sum();
        let mut row_pen = F::zero();
        for j in 0..alpha.nrows() {
            let norm = alpha.row(j).iter().map(|&v| v * v).sum::<F>().sqrt();
            row_pen += norm;
        }
        let const_add = half * x_sq + config.penalty.l1_weight * row_pen;
        let (dict_delta, _) =
            state.apply_codes(config, &group.view(), &codes, F::one(), const_add)?;
        if crossed {
            state.end_epoch();
        }
        wall += tick.elapsed().as_secs_f64();

        if t == next_checkpoint || t == config.iterations {
            let (obj, nnz_rows) =
                group_objective(state.dictionary(), groups, config.penalty.l1_weight, group_tol)?;
            let surrogate = surrogate_objective(&state, state.dictionary())?;
            trace.checkpoints.push(crate::learner::Checkpoint {
                iter: t,
                wall_clock_s: wall,
                train_obj: obj.to_f64_lossy(),
                test_obj: None,
                surrogate_obj: surrogate.to_f64_lossy(),
                mean_nnz: nnz_rows.to_f64_lossy(),
                dict_delta_fro: dict_delta.to_f64_lossy(),
            });
            next_checkpoint =
                (next_checkpoint + 1).max((t as f64 * config.checkpoint_growth).ceil() as usize);
        }
    }
    let dict = state.into_dictionary();
    Ok((dict, trace))
}

/// Mean group-coding objective and mean active-row count over all groups.
fn group_objective<F: Float>(
    dict: &Dictionary<F>,
    groups: &[Array2<F>],
    lambda: F,
    tol: F,
) -> Result<(F, F)> {
    let half = F::cast(0.5);
    let mut total = F::zero();
    let mut rows = 0usize;
    for g in groups {
        let alpha = group_lasso_solve(&g.view(), dict, lambda, tol)?;
        let resid = g - &dict.atoms().dot(&alpha);
        let mut obj = half * resid.iter().map(|&v| v * v).sum::<F>();
        for j in 0..alpha.nrows() {
            let norm = alpha.row(j).iter().map(|&v| v * v).sum::<F>().sqrt();
            obj += lambda * norm;
            if norm > F::zero() {
                rows += 1;
            }
        }
        total += obj;
    }
    let n = F::cast(groups.len());
    Ok((total / n, F::cast(rows) / n))
}

/// Evaluates `l'''` (the group coding loss) for one group; exposed for the
/// benchmark harness.
pub fn group_loss<F: Float>(
    dict: &Dictionary<F>,
    group: &ArrayView2<F>,
    lambda: F,
) -> Result<F> {
    let alpha = group_lasso_solve(group, dict, lambda, F::cast(1e-9))?;
    let resid = group - &dict.atoms().dot(&alpha);
    let half = F::cast(0.5);
    let mut obj = half * resid.iter().map(|&v| v * v).sum::<F>();
    for j in 0..alpha.nrows() {
        let norm = alpha.row(j).iter().map(|&v| v * v).sum::<F>().sqrt();
        obj += lambda * norm;
    }
    Ok(obj)
}
