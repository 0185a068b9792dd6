//! The online learner: draw a mini-batch, sparse-code it against the
//! current dictionary, fold the codes into the surrogate statistics, and
//! minimize the surrogate over the constraint set — plus a batch
//! (full-data alternating) mode and convergence diagnostics.

use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data_io::PermutedCycle;
use crate::dictionary::{
    quadratic_objective, replace_unused_atoms, update_dictionary, Dictionary, SurrogateStats,
};
use crate::error::{Error, Result};
use crate::float::Float;
use crate::projections::ConstraintSet;
use crate::sparse_coding::{lars_path_gram, PenaltyConfig, SparseCode, StopRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnerMode {
    Online,
    Batch,
}

/// How each signal is coded inside the loop: the penalized problem, the
/// l1-budget-constrained variant, or the residual-constrained variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CodingRule<F> {
    Penalized,
    L1Budget(F),
    ResidualTol(F),
}

/// Run parameters of the learner.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig<F> {
    /// Number of atoms.
    pub k: usize,
    /// Coding penalty; its `l1_weight` is the lambda of the objective.
    pub penalty: PenaltyConfig<F>,
    /// Constraint set of the dictionary columns.
    pub constraint: ConstraintSet<F>,
    /// Mini-batch size (eta).
    pub batch_size: usize,
    /// Forgetting exponent rho of `beta_t = (1 - 1/t)^rho`.
    pub forget_exponent: F,
    /// First iteration at which the forgetting factor applies; `None`
    /// defers it to the end of the first epoch.
    pub forget_activation: Option<usize>,
    /// Warm-up mass t0: statistics start at `(t0 I, t0 D0)`.
    pub warmup: F,
    /// Iteration budget: mini-batch steps (online) or full passes (batch).
    pub iterations: usize,
    /// Drop statistics older than two epochs.
    pub purge_fixed_dataset: bool,
    pub mode: LearnerMode,
    pub coding: CodingRule<F>,
    /// Optional ridge added to the surrogate Hessian (per unit of
    /// accumulated weight); keeps the update well-posed on degenerate runs.
    pub hessian_ridge: F,
    /// Column sweeps per online dictionary update.
    pub update_sweeps: usize,
    /// Sweep-change tolerance of the batch-mode dictionary update.
    pub update_tol: F,
    /// Replace atoms unused for this many epochs (0 disables).
    pub unused_atom_epochs: usize,
    /// Growth factor of the geometric checkpoint cadence.
    pub checkpoint_growth: f64,
    pub rng_seed: u64,
}

impl<F: Float> LearnerConfig<F> {
    /// Paper-style defaults around a given atom count and lambda.
    pub fn new(k: usize, lambda: F) -> Self {
        LearnerConfig {
            k,
            penalty: PenaltyConfig::l1(lambda),
            constraint: ConstraintSet::l2_ball(),
            batch_size: 512,
            forget_exponent: F::zero(),
            forget_activation: None,
            warmup: F::zero(),
            iterations: 100,
            purge_fixed_dataset: false,
            mode: LearnerMode::Online,
            coding: CodingRule::Penalized,
            hessian_ridge: F::zero(),
            update_sweeps: 1,
            update_tol: F::cast(1e-8),
            unused_atom_epochs: 2,
            checkpoint_growth: 1.5,
            rng_seed: 0,
        }
    }

    /// The regularization level commonly tuned as `1.2 / sqrt(m)`.
    pub fn default_lambda(m: usize) -> F {
        F::cast(1.2) / F::cast(m).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.forget_exponent < F::zero() {
            return Err(Error::InvalidConfig("rho must be >= 0".into()));
        }
        if self.warmup < F::zero() {
            return Err(Error::InvalidConfig("t0 must be >= 0".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iteration budget must be >= 1".into()));
        }
        if self.update_sweeps == 0 {
            return Err(Error::InvalidConfig("update_sweeps must be >= 1".into()));
        }
        if self.hessian_ridge < F::zero() {
            return Err(Error::InvalidConfig("hessian ridge must be >= 0".into()));
        }
        if self.checkpoint_growth.is_nan() || self.checkpoint_growth < 1.0 {
            return Err(Error::InvalidConfig(
                "checkpoint growth must be >= 1".into(),
            ));
        }
        self.penalty.validate(self.k)?;
        self.constraint.validate()
    }
}

/// What one step produced, for diagnostics and replay tests.
#[derive(Debug, Clone)]
pub struct StepReport<F> {
    pub codes: Vec<SparseCode<F>>,
    /// Frobenius norm of the dictionary change in this step.
    pub dict_delta: F,
    /// Atoms replaced by fresh training samples this step.
    pub replaced: Vec<usize>,
}

/// Mutable state of a training run.
#[derive(Debug, Clone)]
pub struct LearnerState<F> {
    dict: Dictionary<F>,
    stats: SurrogateStats<F>,
    purge_stats: Option<SurrogateStats<F>>,
    /// Completed iterations.
    t: usize,
    /// Accumulated (and forgotten) total weight of the statistics.
    weight_norm: F,
    /// Running constant of the surrogate, for absolute values.
    const_term: F,
    purge_weight: F,
    purge_const: F,
    usage: Vec<usize>,
    unused_threshold: Option<usize>,
    forget_activation: usize,
    rng: ChaCha8Rng,
}

impl<F: Float> LearnerState<F> {
    /// Sets up statistics `(t0 I, t0 D0)` at iteration zero.
    pub fn init(config: &LearnerConfig<F>, d0: Dictionary<F>) -> Result<Self> {
        config.validate()?;
        if d0.k() != config.k {
            return Err(Error::DimensionMismatch {
                context: "initial dictionary atoms",
                expected: config.k,
                got: d0.k(),
            });
        }
        let stats = SurrogateStats::warmup(&d0, config.warmup);
        let purge_stats = config
            .purge_fixed_dataset
            .then(|| SurrogateStats::zeros(d0.m(), d0.k()));
        // Constant making the warm-up term equal (t0/2)||D - D0||_F^2.
        let half = F::cast(0.5);
        let const_term = half * config.warmup * d0.atoms().iter().map(|&v| v * v).sum::<F>();
        Ok(LearnerState {
            usage: vec![0; config.k],
            unused_threshold: None,
            forget_activation: config.forget_activation.unwrap_or(usize::MAX),
            rng: ChaCha8Rng::seed_from_u64(config.rng_seed.wrapping_add(1)),
            dict: d0,
            stats,
            purge_stats,
            t: 0,
            weight_norm: F::zero(),
            const_term,
            purge_weight: F::zero(),
            purge_const: F::zero(),
        })
    }

    /// Resolves epoch-relative knobs once the stream's epoch length (in
    /// steps) is known.
    pub fn set_epoch_len(&mut self, config: &LearnerConfig<F>, steps_per_epoch: usize) {
        if config.forget_activation.is_none() {
            self.forget_activation = steps_per_epoch + 1;
        }
        if config.unused_atom_epochs > 0 {
            self.unused_threshold = Some(config.unused_atom_epochs * steps_per_epoch);
        }
    }

    pub fn dictionary(&self) -> &Dictionary<F> {
        &self.dict
    }

    pub fn into_dictionary(self) -> Dictionary<F> {
        self.dict
    }

    pub fn stats(&self) -> &SurrogateStats<F> {
        &self.stats
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn accumulated_weight(&self) -> F {
        self.weight_norm
    }

    /// One iteration: code the batch against the previous dictionary,
    /// accumulate statistics, minimize the surrogate.
    pub fn step(&mut self, config: &LearnerConfig<F>, batch: &ArrayView2<F>) -> Result<StepReport<F>> {
        if batch.nrows() != self.dict.m() {
            return Err(Error::DimensionMismatch {
                context: "batch signals",
                expected: self.dict.m(),
                got: batch.nrows(),
            });
        }
        if batch.ncols() == 0 {
            return Err(Error::EmptySource);
        }
        if batch.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("batch signals"));
        }

        let codes = code_batch(&self.dict, batch, &config.penalty, config.coding)?;

        // Mini-batch averaging: the batch contributes unit total weight.
        let w = F::one() / F::cast(batch.ncols());
        let half = F::cast(0.5);
        let mut const_add = F::zero();
        for (i, code) in codes.iter().enumerate() {
            let x = batch.column(i);
            let x_sq: F = x.iter().map(|&v| v * v).sum();
            let mut pen = F::zero();
            for (j, v) in code.iter() {
                pen += config.penalty.l1_weight * config.penalty.weight(j) * v.abs();
                pen += half * config.penalty.l2_weight * v * v;
            }
            const_add += w * (half * x_sq + pen);
        }
        let (dict_delta, replaced) = self.apply_codes(config, batch, &codes, w, const_add)?;

        Ok(StepReport {
            codes,
            dict_delta,
            replaced,
        })
    }

    /// The tail every step variant shares: forgetting, accumulation, usage
    /// bookkeeping, surrogate minimization, unused-atom replacement.
    pub(crate) fn apply_codes(
        &mut self,
        config: &LearnerConfig<F>,
        signals: &ArrayView2<F>,
        codes: &[SparseCode<F>],
        weight: F,
        const_add: F,
    ) -> Result<(F, Vec<usize>)> {
        self.t += 1;

        // Forgetting factor on the accumulated history.
        if config.forget_exponent > F::zero() && self.t >= self.forget_activation && self.t > 1 {
            let beta = (F::one() - F::one() / F::cast(self.t)).powf(config.forget_exponent);
            self.stats.scale(beta);
            self.weight_norm *= beta;
            self.const_term *= beta;
            if let Some(p) = &mut self.purge_stats {
                p.scale(beta);
                self.purge_weight *= beta;
                self.purge_const *= beta;
            }
        }

        for (i, code) in codes.iter().enumerate() {
            let x = signals.column(i);
            self.stats.add_code(&x, code, weight);
            if let Some(p) = &mut self.purge_stats {
                p.add_code(&x, code, weight);
            }
        }
        self.weight_norm += F::one();
        self.const_term += const_add;
        if self.purge_stats.is_some() {
            self.purge_weight += F::one();
            self.purge_const += const_add;
        }

        // Usage bookkeeping: an atom is used when any code touches it.
        let mut used = vec![false; self.dict.k()];
        for code in codes {
            for (j, _) in code.iter() {
                used[j] = true;
            }
        }
        for (j, u) in used.iter().enumerate() {
            if *u {
                self.usage[j] = 0;
            } else {
                self.usage[j] += 1;
            }
        }

        // Surrogate minimization, warm-restarted from the current atoms.
        let before = self.dict.atoms().clone();
        let effective;
        let stats_for_update = if config.hessian_ridge > F::zero() {
            let mut s = self.stats.clone();
            let ridge = config.hessian_ridge * self.weight_norm;
            for j in 0..self.dict.k() {
                s.a[[j, j]] += ridge;
            }
            effective = s;
            &effective
        } else {
            &self.stats
        };
        update_dictionary(
            &mut self.dict,
            stats_for_update,
            config.update_sweeps,
            config.update_tol,
        )?;
        let dict_delta = before
            .iter()
            .zip(self.dict.atoms().iter())
            .map(|(a, b)| (*a - *b) * (*a - *b))
            .sum::<F>()
            .sqrt();

        // Refresh atoms that have idled past the threshold.
        let mut replaced = Vec::new();
        if let Some(threshold) = self.unused_threshold {
            if self.usage.iter().any(|&u| u >= threshold) {
                let seed = self.rng.gen();
                replaced =
                    replace_unused_atoms(&mut self.dict, &self.usage, threshold, signals, seed)?;
                for &j in &replaced {
                    self.stats.clear_atom(j);
                    if let Some(p) = &mut self.purge_stats {
                        p.clear_atom(j);
                    }
                    self.usage[j] = 0;
                }
            }
        }
        Ok((dict_delta, replaced))
    }

    /// Epoch boundary: swap in the purge buffers so nothing older than two
    /// epochs survives in the statistics.
    pub fn end_epoch(&mut self) {
        if let Some(p) = &mut self.purge_stats {
            std::mem::swap(&mut self.stats, p);
            p.a.fill(F::zero());
            p.b.fill(F::zero());
            self.weight_norm = self.purge_weight;
            self.const_term = self.purge_const;
            self.purge_weight = F::zero();
            self.purge_const = F::zero();
        }
    }
}

/// Codes every column of `batch` against a shared Gram matrix; the
/// per-signal solves run in parallel, the results are collected in input
/// order.
pub fn code_batch<F: Float>(
    dict: &Dictionary<F>,
    batch: &ArrayView2<F>,
    penalty: &PenaltyConfig<F>,
    rule: CodingRule<F>,
) -> Result<Vec<SparseCode<F>>> {
    let gram = dict.gram();
    let atoms_t = dict.atoms().t();
    (0..batch.ncols())
        .into_par_iter()
        .map(|i| {
            let x = batch.column(i);
            let q = atoms_t.dot(&x);
            let x_sq: F = x.iter().map(|&v| v * v).sum();
            let stop = match rule {
                CodingRule::Penalized => StopRule::LambdaMin(penalty.l1_weight),
                CodingRule::L1Budget(t) => StopRule::L1Budget(t),
                CodingRule::ResidualTol(e) => StopRule::ResidualSq(e),
            };
            let path = lars_path_gram(&gram.view(), &q.view(), x_sq, penalty, stop)?;
            Ok(path.endpoint.code())
        })
        .collect()
}

/// One checkpoint of a run. Objective values are reported in `f64`
/// regardless of the scalar the learner runs in.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub iter: usize,
    /// Training-only seconds (metric evaluation excluded).
    pub wall_clock_s: f64,
    pub train_obj: f64,
    pub test_obj: Option<f64>,
    pub surrogate_obj: f64,
    pub mean_nnz: f64,
    pub dict_delta_fro: f64,
}

/// The time-stamped objective trace a run emits.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsTrace {
    pub checkpoints: Vec<Checkpoint>,
}

impl MetricsTrace {
    pub const CSV_HEADER: &'static str =
        "iter,wall_clock_s,train_obj,test_obj,surrogate_obj,mean_nnz,dict_delta_fro";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for c in &self.checkpoints {
            let test = c.test_obj.map_or("nan".to_string(), |v| format!("{v:?}"));
            out.push_str(&format!(
                "{},{:.6},{:?},{},{:?},{:?},{:?}\n",
                c.iter, c.wall_clock_s, c.train_obj, test, c.surrogate_obj, c.mean_nnz, c.dict_delta_fro
            ));
        }
        out
    }
}

/// Mean coding objective over the columns of `x` at the dictionary, each
/// term evaluated at its own optimum (lambda fixed to `l1_weight`).
pub fn empirical_objective<F: Float>(
    dict: &Dictionary<F>,
    x: &ArrayView2<F>,
    l1_weight: F,
) -> Result<F> {
    let penalty = PenaltyConfig::l1(l1_weight);
    Ok(empirical_objective_penalty(dict, x, &penalty)?.0)
}

/// As [`empirical_objective`] with a full penalty; also reports the mean
/// number of nonzeros of the minimizing codes.
pub fn empirical_objective_penalty<F: Float>(
    dict: &Dictionary<F>,
    x: &ArrayView2<F>,
    penalty: &PenaltyConfig<F>,
) -> Result<(F, F)> {
    if x.ncols() == 0 {
        return Err(Error::EmptySource);
    }
    let gram = dict.gram();
    let atoms_t = dict.atoms().t();
    let half = F::cast(0.5);
    let terms: Result<Vec<(F, usize)>> = (0..x.ncols())
        .into_par_iter()
        .map(|i| {
            let col = x.column(i);
            let q = atoms_t.dot(&col);
            let x_sq: F = col.iter().map(|&v| v * v).sum();
            let path = lars_path_gram(
                &gram.view(),
                &q.view(),
                x_sq,
                penalty,
                StopRule::LambdaMin(penalty.l1_weight),
            )?;
            let code = path.endpoint.code();
            let dense = code.to_dense();
            let r = &col - &dict.atoms().dot(&dense);
            let mut obj = half * r.iter().map(|&v| v * v).sum::<F>();
            for (j, v) in code.iter() {
                obj = obj + penalty.l1_weight * penalty.weight(j) * v.abs()
                    + half * penalty.l2_weight * v * v;
            }
            Ok((obj, code.nnz()))
        })
        .collect();
    let terms = terms?;
    let n = F::cast(terms.len());
    let obj = terms.iter().map(|(o, _)| *o).sum::<F>() / n;
    let nnz = F::cast(terms.iter().map(|(_, z)| *z).sum::<usize>()) / n;
    Ok((obj, nnz))
}

/// Absolute value of the quadratic surrogate at a dictionary, using the
/// accumulated constant term. Rejects a state that has not stepped yet.
pub fn surrogate_objective<F: Float>(state: &LearnerState<F>, dict: &Dictionary<F>) -> Result<F> {
    if state.t == 0 || state.weight_norm <= F::zero() {
        return Err(Error::InvalidConfig(
            "surrogate undefined before the first iteration".into(),
        ));
    }
    Ok((quadratic_objective(dict, &state.stats) + state.const_term) / state.weight_norm)
}

/// Draws `k` columns of the data (without replacement when possible) and
/// projects them onto the constraint set: the usual data-driven start.
pub fn init_dictionary<F: Float>(
    data: &ArrayView2<F>,
    config: &LearnerConfig<F>,
) -> Result<Dictionary<F>> {
    if data.ncols() == 0 {
        return Err(Error::EmptySource);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let n = data.ncols();
    let picks: Vec<usize> = if n >= config.k {
        rand::seq::index::sample(&mut rng, n, config.k).into_vec()
    } else {
        (0..config.k).map(|_| rng.gen_range(0..n)).collect()
    };
    let mut atoms = Array2::zeros((data.nrows(), config.k));
    for (j, &pick) in picks.iter().enumerate() {
        let col = data.column(pick);
        let norm = col.iter().map(|&v| v * v).sum::<F>().sqrt();
        let mut owned = col.to_owned();
        if norm > F::zero() {
            owned.mapv_inplace(|v| v / norm);
        }
        atoms.column_mut(j).assign(&owned);
    }
    Dictionary::from_columns_projected(atoms, config.constraint)
}

/// Runs a full training session over a finite data set and returns the
/// learned dictionary with its metrics trace.
pub fn train<F: Float>(
    data: &ArrayView2<F>,
    config: &LearnerConfig<F>,
    test_set: Option<&ArrayView2<F>>,
) -> Result<(Dictionary<F>, MetricsTrace)> {
    let d0 = init_dictionary(data, config)?;
    train_from(d0, data, config, test_set)
}

/// As [`train`] with an explicit starting dictionary.
pub fn train_from<F: Float>(
    d0: Dictionary<F>,
    data: &ArrayView2<F>,
    config: &LearnerConfig<F>,
    test_set: Option<&ArrayView2<F>>,
) -> Result<(Dictionary<F>, MetricsTrace)> {
    config.validate()?;
    if data.ncols() == 0 {
        return Err(Error::EmptySource);
    }
    if data.nrows() != d0.m() {
        return Err(Error::DimensionMismatch {
            context: "training data rows",
            expected: d0.m(),
            got: data.nrows(),
        });
    }
    match config.mode {
        LearnerMode::Online => train_online(d0, data, config, test_set),
        LearnerMode::Batch => train_batch(d0, data, config, test_set),
    }
}

#[allow(clippy::too_many_arguments)]
fn record_checkpoint<F: Float>(
    trace: &mut MetricsTrace,
    state: &LearnerState<F>,
    config: &LearnerConfig<F>,
    data: &ArrayView2<F>,
    test_set: Option<&ArrayView2<F>>,
    iter: usize,
    wall: f64,
    dict_delta: F,
) -> Result<()> {
    let (train_obj, mean_nnz) =
        empirical_objective_penalty(state.dictionary(), data, &config.penalty)?;
    let test_obj = match test_set {
        Some(t) => Some(
            empirical_objective_penalty(state.dictionary(), t, &config.penalty)?
                .0
                .to_f64_lossy(),
        ),
        None => None,
    };
    let surrogate = surrogate_objective(state, state.dictionary())?;
    trace.checkpoints.push(Checkpoint {
        iter,
        wall_clock_s: wall,
        train_obj: train_obj.to_f64_lossy(),
        test_obj,
        surrogate_obj: surrogate.to_f64_lossy(),
        mean_nnz: mean_nnz.to_f64_lossy(),
        dict_delta_fro: dict_delta.to_f64_lossy(),
    });
    Ok(())
}

fn train_online<F: Float>(
    d0: Dictionary<F>,
    data: &ArrayView2<F>,
    config: &LearnerConfig<F>,
    test_set: Option<&ArrayView2<F>>,
) -> Result<(Dictionary<F>, MetricsTrace)> {
    let mut state = LearnerState::init(config, d0)?;
    let mut stream = PermutedCycle::new(data.view(), config.rng_seed.wrapping_add(2))?;
    state.set_epoch_len(config, stream.steps_per_epoch(config.batch_size));

    let mut trace = MetricsTrace::default();
    let mut wall = 0.0f64;
    let mut next_checkpoint = 1usize;
    for t in 1..=config.iterations {
        let tick = Instant::now();
        let (batch, crossed) = stream.next_batch(config.batch_size);
        let report = state.step(config, &batch.view())?;
        if crossed {
            state.end_epoch();
        }
        wall += tick.elapsed().as_secs_f64();

        if t == next_checkpoint || t == config.iterations {
            record_checkpoint(
                &mut trace,
                &state,
                config,
                data,
                test_set,
                t,
                wall,
                report.dict_delta,
            )?;
            // Geometric cadence, matching log-scale time plots.
            next_checkpoint =
                (next_checkpoint + 1).max((t as f64 * config.checkpoint_growth).ceil() as usize);
        }
    }
    Ok((state.dict, trace))
}

fn train_batch<F: Float>(
    d0: Dictionary<F>,
    data: &ArrayView2<F>,
    config: &LearnerConfig<F>,
    test_set: Option<&ArrayView2<F>>,
) -> Result<(Dictionary<F>, MetricsTrace)> {
    let mut state = LearnerState::init(config, d0)?;
    // Batch alternations rebuild the statistics from scratch, so the
    // online-only refinements do not apply.
    let mut trace = MetricsTrace::default();
    let mut wall = 0.0f64;
    let half = F::cast(0.5);
    for t in 1..=config.iterations {
        let tick = Instant::now();
        let codes = code_batch(&state.dict, data, &config.penalty, config.coding)?;
        let mut stats = SurrogateStats::zeros(state.dict.m(), state.dict.k());
        let mut const_term = F::zero();
        for (i, code) in codes.iter().enumerate() {
            let x = data.column(i);
            stats.add_code(&x, code, F::one());
            let x_sq: F = x.iter().map(|&v| v * v).sum();
            let mut pen = F::zero();
            for (j, v) in code.iter() {
                pen = pen + config.penalty.l1_weight * config.penalty.weight(j) * v.abs()
                    + half * config.penalty.l2_weight * v * v;
            }
            const_term = const_term + half * x_sq + pen;
        }
        state.stats = stats;
        state.const_term = const_term;
        state.weight_norm = F::cast(data.ncols());
        state.t = t;

        let before = state.dict.atoms().clone();
        update_dictionary(&mut state.dict, &state.stats, 1000, config.update_tol)?;
        let dict_delta = before
            .iter()
            .zip(state.dict.atoms().iter())
            .map(|(a, b)| (*a - *b) * (*a - *b))
            .sum::<F>()
            .sqrt();
        wall += tick.elapsed().as_secs_f64();

        record_checkpoint(
            &mut trace, &state, config, data, test_set, t, wall, dict_delta,
        )?;
    }
    Ok((state.dict, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::quadratic_objective;
    use crate::sparse_coding::coding_objective;
    use ndarray::Array1;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn small_config(k: usize, lambda: f64) -> LearnerConfig<f64> {
        let mut c = LearnerConfig::new(k, lambda);
        c.batch_size = 1;
        c.iterations = 4;
        c.unused_atom_epochs = 0;
        c
    }

    fn random_data(m: usize, n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::from_shape_fn((m, n), |_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v
        });
        crate::data_io::preprocess(&mut x, false, true);
        x
    }

    #[test]
    fn init_without_warmup_is_zero_stats() {
        let config = small_config(3, 0.2);
        let d0 = init_dictionary(&random_data(4, 8, 1).view(), &config).unwrap();
        let state = LearnerState::init(&config, d0).unwrap();
        assert!(state.stats().a.iter().all(|&v| v == 0.0));
        assert!(state.stats().b.iter().all(|&v| v == 0.0));
        assert_eq!(state.t(), 0);
    }

    #[test]
    fn init_with_warmup_scales_identity() {
        let mut config = small_config(3, 0.2);
        config.warmup = 0.001;
        let d0 = init_dictionary(&random_data(4, 8, 1).view(), &config).unwrap();
        let state = LearnerState::init(&config, d0.clone()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 0.001 } else { 0.0 };
                assert_eq!(state.stats().a[[i, j]], expect);
            }
        }
        let expect_b = d0.atoms() * 0.001;
        assert_eq!(state.stats().b, expect_b);
    }

    #[test]
    fn init_rejects_wrong_atom_count() {
        let config = small_config(3, 0.2);
        let d0 = init_dictionary(&random_data(4, 8, 1).view(), &small_config(2, 0.2)).unwrap();
        assert!(LearnerState::init(&config, d0).is_err());
    }

    #[test]
    fn single_step_base_case_recursion() {
        // eta = 1, rho = 0, t0 = 0: A1 = a a^T, B1 = x a^T.
        let config = small_config(3, 0.15);
        let data = random_data(4, 8, 2);
        let d0 = init_dictionary(&data.view(), &config).unwrap();
        let mut state = LearnerState::init(&config, d0.clone()).unwrap();
        let batch = data.column(0).insert_axis(ndarray::Axis(1)).to_owned();
        let report = state.step(&config, &batch.view()).unwrap();
        let alpha = report.codes[0].to_dense();
        let outer_a = alpha
            .view()
            .insert_axis(ndarray::Axis(1))
            .dot(&alpha.view().insert_axis(ndarray::Axis(0)));
        for (got, want) in state.stats().a.iter().zip(outer_a.iter()) {
            assert!((got - want).abs() < 1e-15);
        }
        let x = batch.column(0);
        for j in 0..3 {
            for r in 0..4 {
                assert!((state.stats().b[[r, j]] - x[r] * alpha[j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn step_decreases_quadratic_objective() {
        let config = small_config(4, 0.1);
        let data = random_data(5, 16, 3);
        let d0 = init_dictionary(&data.view(), &config).unwrap();
        let mut state = LearnerState::init(&config, d0).unwrap();
        for i in 0..4 {
            let batch = data.column(i).insert_axis(ndarray::Axis(1)).to_owned();
            let before_dict = state.dictionary().clone();
            state.step(&config, &batch.view()).unwrap();
            let after = quadratic_objective(state.dictionary(), state.stats());
            let before = quadratic_objective(&before_dict, state.stats());
            assert!(after <= before + 1e-12, "step {i}: {after} > {before}");
        }
    }

    #[test]
    fn surrogate_single_term_exactness() {
        let config = small_config(3, 0.15);
        let data = random_data(4, 8, 4);
        let d0 = init_dictionary(&data.view(), &config).unwrap();
        let mut state = LearnerState::init(&config, d0.clone()).unwrap();
        let batch = data.column(0).insert_axis(ndarray::Axis(1)).to_owned();
        let report = state.step(&config, &batch.view()).unwrap();
        // f_hat_1(D) = 1/2 ||x - D a||^2 + lambda ||a||_1 for the frozen code.
        let direct = coding_objective(
            &batch.column(0),
            state.dictionary(),
            &report.codes[0],
            &config.penalty,
        );
        let surr = surrogate_objective(&state, state.dictionary()).unwrap();
        assert!((surr - direct).abs() < 1e-12, "{surr} vs {direct}");
        // And the surrogate at the minimizer cannot exceed its value at D0.
        let at_d0 = surrogate_objective(&state, &d0).unwrap();
        assert!(surr <= at_d0 + 1e-12);
    }

    #[test]
    fn surrogate_rejects_unstarted_state() {
        let config = small_config(3, 0.15);
        let d0 = init_dictionary(&random_data(4, 8, 5).view(), &config).unwrap();
        let state = LearnerState::init(&config, d0.clone()).unwrap();
        assert!(surrogate_objective(&state, &d0).is_err());
    }

    #[test]
    fn empirical_objective_identity_zero() {
        let dict = Dictionary::new(Array2::<f64>::eye(3), ConstraintSet::l2_ball()).unwrap();
        let x = Array2::<f64>::eye(3);
        let obj = empirical_objective(&dict, &x.view(), 0.0).unwrap();
        assert!(obj.abs() < 1e-18);
    }

    #[test]
    fn empirical_objective_all_codes_zero() {
        let data = random_data(4, 6, 6);
        let dict = Dictionary::new(Array2::eye(4), ConstraintSet::l2_ball()).unwrap();
        let lambda = data.iter().fold(0.0f64, |a, v| a.max(v.abs())) * 1.01;
        let obj = empirical_objective(&dict, &data.view(), lambda).unwrap();
        let expect: f64 =
            data.columns().into_iter().map(|c| 0.5 * c.dot(&c)).sum::<f64>() / 6.0;
        assert!((obj - expect).abs() < 1e-12);
    }

    #[test]
    fn empirical_objective_matches_per_sample_oracle() {
        let data = random_data(6, 5, 7);
        let config = small_config(8, 0.2);
        let dict = init_dictionary(&data.view(), &config).unwrap();
        let obj = empirical_objective(&dict, &data.view(), 0.2).unwrap();
        let mut oracle = 0.0;
        for c in data.columns() {
            let code = crate::sparse_coding::coordinate_descent_solve(
                &c,
                &dict,
                &PenaltyConfig::l1(0.2),
                1e-12,
            )
            .unwrap();
            oracle += coding_objective(&c, &dict, &code, &PenaltyConfig::l1(0.2));
        }
        oracle /= 5.0;
        assert!((obj - oracle).abs() <= 1e-9 * oracle.max(1.0));
    }

    #[test]
    fn train_is_deterministic_under_seed() {
        let data = random_data(6, 40, 8);
        let mut config = small_config(5, 0.2);
        config.batch_size = 4;
        config.iterations = 12;
        config.rng_seed = 99;
        let (d1, t1) = train(&data.view(), &config, None).unwrap();
        let (d2, t2) = train(&data.view(), &config, None).unwrap();
        assert_eq!(d1.atoms(), d2.atoms());
        assert_eq!(t1.checkpoints.len(), t2.checkpoints.len());
        for (a, b) in t1.checkpoints.iter().zip(t2.checkpoints.iter()) {
            assert_eq!(a.iter, b.iter);
            assert_eq!(a.train_obj, b.train_obj);
            assert_eq!(a.surrogate_obj, b.surrogate_obj);
            assert_eq!(a.mean_nnz, b.mean_nnz);
            assert_eq!(a.dict_delta_fro, b.dict_delta_fro);
        }
    }

    #[test]
    fn batch_iteration_is_monotone_alternation() {
        let data = random_data(5, 30, 9);
        let mut config = small_config(4, 0.15);
        config.mode = LearnerMode::Batch;
        config.iterations = 3;
        let d0 = init_dictionary(&data.view(), &config).unwrap();
        let before = empirical_objective(&d0, &data.view(), 0.15).unwrap();
        let (_, trace) = train_from(d0, &data.view(), &config, None).unwrap();
        let objs: Vec<f64> = trace.checkpoints.iter().map(|c| c.train_obj).collect();
        assert!(objs[0] <= before + 1e-12);
        for w in objs.windows(2) {
            assert!(w[1] <= w[0] + 1e-10, "batch objective increased: {objs:?}");
        }
    }

    #[test]
    fn forgetting_matches_direct_weighted_sums() {
        // With rho > 0 active from the start, stats equal the directly
        // computed weighted sums sum_i (i/t)^rho a_i a_i^T.
        let data = random_data(4, 10, 10);
        let mut config = small_config(3, 0.2);
        config.forget_exponent = 3.0;
        config.forget_activation = Some(0);
        config.iterations = 6;
        let d0 = init_dictionary(&data.view(), &config).unwrap();
        let mut state = LearnerState::init(&config, d0).unwrap();
        let mut history: Vec<(Array1<f64>, Array1<f64>)> = Vec::new();
        for i in 0..6 {
            let batch = data.column(i).insert_axis(ndarray::Axis(1)).to_owned();
            let report = state.step(&config, &batch.view()).unwrap();
            history.push((batch.column(0).to_owned(), report.codes[0].to_dense()));
        }
        let t = history.len() as f64;
        let rho = 3.0;
        let mut a_direct = Array2::<f64>::zeros((3, 3));
        let mut b_direct = Array2::<f64>::zeros((4, 3));
        for (i, (x, alpha)) in history.iter().enumerate() {
            let w = (((i + 1) as f64) / t).powf(rho);
            for p in 0..3 {
                for q in 0..3 {
                    a_direct[[p, q]] += w * alpha[p] * alpha[q];
                }
                for r in 0..4 {
                    b_direct[[r, p]] += w * x[r] * alpha[p];
                }
            }
        }
        for (got, want) in state.stats().a.iter().zip(a_direct.iter()) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
        for (got, want) in state.stats().b.iter().zip(b_direct.iter()) {
            assert!((got - want).abs() < 1e-10);
        }
    }

    #[test]
    fn purge_drops_statistics_older_than_two_epochs() {
        let data = random_data(4, 6, 11);
        let mut config = small_config(3, 0.2);
        config.purge_fixed_dataset = true;
        config.batch_size = 2;
        let d0 = init_dictionary(&data.view(), &config).unwrap();
        let mut state = LearnerState::init(&config, d0).unwrap();
        let mut stream = PermutedCycle::new(data.view(), 123).unwrap();
        // Replay bookkeeping: per-epoch sums in parallel with the learner.
        let mut per_epoch: Vec<(Array2<f64>, Array2<f64>)> = vec![(
            Array2::zeros((3, 3)),
            Array2::zeros((4, 3)),
        )];
        for _ in 0..9 {
            let (batch, crossed) = stream.next_batch(2);
            let report = state.step(&config, &batch.view()).unwrap();
            let cur = per_epoch.last_mut().unwrap();
            for (i, code) in report.codes.iter().enumerate() {
                let alpha = code.to_dense();
                let x = batch.column(i);
                for p in 0..3 {
                    for q in 0..3 {
                        cur.0[[p, q]] += 0.5 * alpha[p] * alpha[q];
                    }
                    for r in 0..4 {
                        cur.1[[r, p]] += 0.5 * x[r] * alpha[p];
                    }
                }
            }
            if crossed {
                state.end_epoch();
                per_epoch.push((Array2::zeros((3, 3)), Array2::zeros((4, 3))));
            }
        }
        // Live stats must equal the last two epochs' sums exactly.
        let tail = per_epoch.len().saturating_sub(2);
        let mut a_expect = Array2::<f64>::zeros((3, 3));
        let mut b_expect = Array2::<f64>::zeros((4, 3));
        for (a, b) in &per_epoch[tail..] {
            a_expect += a;
            b_expect += b;
        }
        for (got, want) in state.stats().a.iter().zip(a_expect.iter()) {
            assert!((got - want).abs() < 1e-12);
        }
        for (got, want) in state.stats().b.iter().zip(b_expect.iter()) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_schema_is_stable() {
        assert_eq!(
            MetricsTrace::CSV_HEADER,
            "iter,wall_clock_s,train_obj,test_obj,surrogate_obj,mean_nnz,dict_delta_fro"
        );
        let trace = MetricsTrace {
            checkpoints: vec![Checkpoint {
                iter: 1,
                wall_clock_s: 0.25,
                train_obj: 0.5,
                test_obj: None,
                surrogate_obj: 0.75,
                mean_nnz: 3.5,
                dict_delta_fro: 0.125,
            }],
        };
        let csv = trace.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), MetricsTrace::CSV_HEADER);
        assert_eq!(lines.next().unwrap(), "1,0.250000,0.5,nan,0.75,3.5,0.125");
    }
}
