//! Experiment settings: a flat key=value config file overlaid by command
//! line flags, resolved into a learner configuration and a data source.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use omf_core::learner::{CodingRule, LearnerConfig, LearnerMode};
use omf_core::presets::{make_preset, Preset, PresetKind};
use omf_core::projections::ConstraintSet;
use omf_core::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataSource {
    Matrix(PathBuf),
    Images(PathBuf),
    /// m,k,n,sparsity,sigma
    Synth(String),
}

/// Everything a run needs, before resolution. All fields optional so that
/// file values and flag values merge cleanly (flags win).
#[derive(Debug, Clone, Default)]
pub struct Settings {
    pub data: Option<DataSource>,
    pub preset: Option<String>,
    pub k: Option<usize>,
    pub lambda: Option<f64>,
    pub lambda2: Option<f64>,
    pub eta: Option<usize>,
    pub rho: Option<f64>,
    pub t0: Option<f64>,
    pub epochs: Option<usize>,
    pub iterations: Option<usize>,
    pub constraint: Option<String>,
    pub gamma: Option<f64>,
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
    pub penalty: Option<String>,
    pub group_size: Option<usize>,
    pub mode: Option<String>,
    pub purge: Option<bool>,
    pub seed: Option<u64>,
    pub test_split: Option<f64>,
    pub checkpoint_factor: Option<f64>,
    pub patch_edge: Option<usize>,
    pub patch_stride: Option<usize>,
    pub patches_per_image: Option<usize>,
    pub out: Option<PathBuf>,
    pub center: Option<bool>,
    pub normalize: Option<bool>,
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::InvalidConfig(format!("{key}: expected a boolean, got {v:?}"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse {v:?}")))
}

impl Settings {
    /// Parses the flat `key=value` format (one entry per line, `#` comments).
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let mut map = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "{}:{}: expected key=value, got {line:?}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        let mut s = Settings::default();
        for (key, value) in &map {
            match key.as_str() {
                "data" => s.data = Some(DataSource::Matrix(PathBuf::from(value))),
                "images" => s.data = Some(DataSource::Images(PathBuf::from(value))),
                "synth" => s.data = Some(DataSource::Synth(value.clone())),
                "preset" => s.preset = Some(value.clone()),
                "k" => s.k = Some(parse_num(key, value)?),
                "lambda" => s.lambda = Some(parse_num(key, value)?),
                "lambda2" => s.lambda2 = Some(parse_num(key, value)?),
                "eta" => s.eta = Some(parse_num(key, value)?),
                "rho" => s.rho = Some(parse_num(key, value)?),
                "t0" => s.t0 = Some(parse_num(key, value)?),
                "epochs" => s.epochs = Some(parse_num(key, value)?),
                "iterations" => s.iterations = Some(parse_num(key, value)?),
                "constraint" => s.constraint = Some(value.clone()),
                "gamma" => s.gamma = Some(parse_num(key, value)?),
                "gamma1" => s.gamma1 = Some(parse_num(key, value)?),
                "gamma2" => s.gamma2 = Some(parse_num(key, value)?),
                "penalty" => s.penalty = Some(value.clone()),
                "group_size" => s.group_size = Some(parse_num(key, value)?),
                "mode" => s.mode = Some(value.clone()),
                "purge" => s.purge = Some(parse_bool(key, value)?),
                "seed" => s.seed = Some(parse_num(key, value)?),
                "test_split" => s.test_split = Some(parse_num(key, value)?),
                "checkpoint_factor" => s.checkpoint_factor = Some(parse_num(key, value)?),
                "patch_edge" => s.patch_edge = Some(parse_num(key, value)?),
                "patch_stride" => s.patch_stride = Some(parse_num(key, value)?),
                "patches_per_image" => s.patches_per_image = Some(parse_num(key, value)?),
                "out" => s.out = Some(PathBuf::from(value)),
                "center" => s.center = Some(parse_bool(key, value)?),
                "normalize" => s.normalize = Some(parse_bool(key, value)?),
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown config key {other:?} in {}",
                        path.display()
                    )))
                }
            }
        }
        Ok(s)
    }

    /// Overlays `other` (flag values) onto `self`; present values win.
    pub fn overlay(mut self, other: Settings) -> Settings {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if other.$field.is_some() { self.$field = other.$field; })*
            };
        }
        take!(
            data, preset, k, lambda, lambda2, eta, rho, t0, epochs, iterations, constraint,
            gamma, gamma1, gamma2, penalty, group_size, mode, purge, seed, test_split,
            checkpoint_factor, patch_edge, patch_stride, patches_per_image, out, center,
            normalize
        );
        self
    }

    /// Seed resolution order: explicit setting, then OMF_SEED, then 0.
    pub fn resolved_seed(&self) -> Result<u64> {
        if let Some(s) = self.seed {
            return Ok(s);
        }
        match std::env::var("OMF_SEED") {
            Ok(v) => v
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("OMF_SEED: cannot parse {v:?}"))),
            Err(_) => Ok(0),
        }
    }

    pub fn preset_struct(&self) -> Result<Preset<f64>> {
        let kind = match self.preset.as_deref().unwrap_or("dict") {
            "dict" | "dict_learn" => PresetKind::DictLearn,
            "nmf" => PresetKind::Nmf,
            "nnsc" => PresetKind::Nnsc,
            "spca" => PresetKind::Spca,
            "group" => PresetKind::GroupDictLearn,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown preset {other:?} (expected dict|nmf|nnsc|spca|group)"
                )))
            }
        };
        let mut preset = match kind {
            PresetKind::DictLearn => Preset::dict_learn(),
            PresetKind::Nmf => Preset::nmf(),
            PresetKind::Nnsc => Preset::nnsc(self.lambda),
            PresetKind::Spca => Preset::spca(self.gamma.unwrap_or(0.5)),
            PresetKind::GroupDictLearn => Preset::group(self.group_size.unwrap_or(2)),
        };
        preset.lambda = self.lambda;
        Ok(preset)
    }

    /// Builds the learner configuration for data of height `m` and `n`
    /// training columns.
    pub fn learner_config(&self, m: usize, n: usize) -> Result<LearnerConfig<f64>> {
        let preset = self.preset_struct()?;
        let mut config = make_preset(&preset, m, self.k.unwrap_or(2 * m))?;
        if let Some(l) = self.lambda {
            config.penalty.l1_weight = l;
        }
        if let Some(l2) = self.lambda2 {
            config.penalty.l2_weight = l2;
        }
        match self.penalty.as_deref() {
            None | Some("l1") => {}
            Some("elastic") => {
                if config.penalty.l2_weight == 0.0 {
                    return Err(Error::InvalidConfig(
                        "penalty=elastic requires --lambda2 > 0".into(),
                    ));
                }
            }
            Some("group") => {} // handled by the group training path
            Some(other) => {
                return Err(Error::InvalidConfig(format!(
                    "unknown penalty {other:?} (expected l1|elastic|group)"
                )))
            }
        }
        if let Some(c) = self.constraint.as_deref() {
            config.constraint = match c {
                "l2" => ConstraintSet::l2_ball(),
                "nonneg" => ConstraintSet::nonneg_l2_ball(),
                "elastic" => ConstraintSet::elastic_net_ball(self.gamma.unwrap_or(0.5)),
                "fused" => ConstraintSet::fused_lasso_ball(
                    self.gamma1.unwrap_or(0.0),
                    self.gamma2.unwrap_or(0.0),
                ),
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown constraint {other:?} (expected l2|nonneg|elastic|fused)"
                    )))
                }
            };
            if config.penalty.nonneg
                && !matches!(
                    config.constraint.kind,
                    omf_core::projections::ConstraintKind::NonnegL2Ball
                )
            {
                // Non-negative presets keep their dictionary constraint.
                config.constraint = ConstraintSet::nonneg_l2_ball();
            }
        }
        if let Some(eta) = self.eta {
            config.batch_size = eta;
        }
        if let Some(rho) = self.rho {
            config.forget_exponent = rho;
        }
        if let Some(t0) = self.t0 {
            config.warmup = t0;
        }
        if let Some(mode) = self.mode.as_deref() {
            config.mode = match mode {
                "online" => LearnerMode::Online,
                "batch" => LearnerMode::Batch,
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown mode {other:?} (expected online|batch)"
                    )))
                }
            };
        }
        if let Some(p) = self.purge {
            config.purge_fixed_dataset = p;
        }
        if let Some(f) = self.checkpoint_factor {
            config.checkpoint_growth = f;
        }
        config.rng_seed = self.resolved_seed()?;
        config.coding = CodingRule::Penalized;
        config.iterations = match (self.iterations, self.epochs) {
            (Some(it), _) => it,
            (None, Some(ep)) => match config.mode {
                LearnerMode::Online => {
                    let steps = n.div_ceil(config.batch_size).max(1);
                    (ep * steps).max(1)
                }
                LearnerMode::Batch => ep.max(1),
            },
            (None, None) => match config.mode {
                LearnerMode::Online => {
                    // Two passes over the data by default.
                    (2 * n.div_ceil(config.batch_size)).max(1)
                }
                LearnerMode::Batch => 10,
            },
        };
        if config.penalty.l1_weight < 0.0 || !config.penalty.l1_weight.is_finite() {
            return Err(Error::InvalidConfig("lambda must be finite and >= 0".into()));
        }
        config.validate()?;
        Ok(config)
    }

    pub fn preprocess_flags(&self) -> Result<(bool, bool)> {
        let preset = self.preset_struct()?;
        let (mut center, mut normalize) = preset.preprocess_flags();
        if let Some(c) = self.center {
            center = c;
        }
        if let Some(nz) = self.normalize {
            normalize = nz;
        }
        Ok((center, normalize))
    }
}
