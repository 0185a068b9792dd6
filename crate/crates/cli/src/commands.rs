//! Subcommand implementations.

use std::path::{Path, PathBuf};

use clap::Args;
use ndarray::{Array1, Array2};

use omf_core::data_io::{
    extract_patches, load_matrix, load_raster, preprocess, save_matrix, save_matrix_text,
    synth_planted, PatchSpec,
};
use omf_core::learner::{train as train_learner, MetricsTrace};
use omf_core::presets::{factorize as run_factorize, group_factorize, PresetKind};
use omf_core::projections::{fl_value, project_elastic_net, ConstraintSet};
use omf_core::sparse_coding::{
    kkt_residual, lars_lasso_path, PenaltyConfig, StopRule,
};
use omf_core::{Dictionary64, Error, Result};

use crate::settings::{DataSource, Settings};

#[derive(Args, Debug, Default)]
pub struct CommonTrainArgs {
    /// Flat key=value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Train on the columns of a matrix file.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Train on random patches from the PGM/PPM images in a directory.
    #[arg(long)]
    images: Option<PathBuf>,
    /// Synthetic planted data: "m,k,n,sparsity,sigma".
    #[arg(long)]
    synth: Option<String>,
    /// Factorization preset: dict|nmf|nnsc|spca|group.
    #[arg(long)]
    preset: Option<String>,
    /// Number of dictionary atoms.
    #[arg(long)]
    k: Option<usize>,
    /// Coding penalty level (defaults to 1.2/sqrt(m)).
    #[arg(long)]
    lambda: Option<f64>,
    /// Elastic-net quadratic weight of the coding penalty.
    #[arg(long)]
    lambda2: Option<f64>,
    /// Mini-batch size.
    #[arg(long)]
    eta: Option<usize>,
    /// Forgetting exponent.
    #[arg(long)]
    rho: Option<f64>,
    /// Warm-up mass slowing the first iterations.
    #[arg(long)]
    t0: Option<f64>,
    /// Passes over the data (converted to iterations for online mode).
    #[arg(long)]
    epochs: Option<usize>,
    /// Iteration budget; overrides --epochs.
    #[arg(long)]
    iterations: Option<usize>,
    /// Dictionary constraint: l2|nonneg|elastic|fused.
    #[arg(long)]
    constraint: Option<String>,
    /// Elastic-net constraint sparsity.
    #[arg(long)]
    gamma: Option<f64>,
    /// Fused-lasso constraint l1 weight.
    #[arg(long)]
    gamma1: Option<f64>,
    /// Fused-lasso constraint difference weight.
    #[arg(long)]
    gamma2: Option<f64>,
    /// Coding penalty family: l1|elastic|group.
    #[arg(long)]
    penalty: Option<String>,
    /// Signals per group for group coding.
    #[arg(long)]
    group_size: Option<usize>,
    /// online or batch.
    #[arg(long)]
    mode: Option<String>,
    /// Purge statistics older than two epochs.
    #[arg(long)]
    purge: bool,
    /// RNG seed (falls back to $OMF_SEED, then 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Fraction of columns held out for the test objective.
    #[arg(long)]
    test_split: Option<f64>,
    /// Geometric checkpoint growth factor.
    #[arg(long)]
    checkpoint_factor: Option<f64>,
    /// Patch side length for --images.
    #[arg(long)]
    patch_edge: Option<usize>,
    /// Patch grid stride for --images.
    #[arg(long)]
    patch_stride: Option<usize>,
    /// Patches drawn per image for --images.
    #[arg(long)]
    patches_per_image: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonTrainArgs {
    fn settings(&self) -> Result<Settings> {
        let base = match &self.config {
            Some(path) => Settings::from_file(path)?,
            None => Settings::default(),
        };
        let data = match (&self.data, &self.images, &self.synth) {
            (Some(p), None, None) => Some(DataSource::Matrix(p.clone())),
            (None, Some(p), None) => Some(DataSource::Images(p.clone())),
            (None, None, Some(s)) => Some(DataSource::Synth(s.clone())),
            (None, None, None) => None,
            _ => {
                return Err(Error::InvalidConfig(
                    "give exactly one of --data, --images, --synth".into(),
                ))
            }
        };
        let flags = Settings {
            data,
            preset: self.preset.clone(),
            k: self.k,
            lambda: self.lambda,
            lambda2: self.lambda2,
            eta: self.eta,
            rho: self.rho,
            t0: self.t0,
            epochs: self.epochs,
            iterations: self.iterations,
            constraint: self.constraint.clone(),
            gamma: self.gamma,
            gamma1: self.gamma1,
            gamma2: self.gamma2,
            penalty: self.penalty.clone(),
            group_size: self.group_size,
            mode: self.mode.clone(),
            purge: if self.purge { Some(true) } else { None },
            seed: self.seed,
            test_split: self.test_split,
            checkpoint_factor: self.checkpoint_factor,
            patch_edge: self.patch_edge,
            patch_stride: self.patch_stride,
            patches_per_image: self.patches_per_image,
            out: self.out.clone(),
            center: None,
            normalize: None,
        };
        Ok(base.overlay(flags))
    }
}

/// Loads the training matrix for a resolved settings object.
fn load_data(settings: &Settings) -> Result<Array2<f64>> {
    let seed = settings.resolved_seed()?;
    match settings
        .data
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("no data source configured".into()))?
    {
        DataSource::Matrix(path) => load_matrix(path),
        DataSource::Images(dir) => {
            let edge = settings.patch_edge.unwrap_or(8);
            let stride = settings.patch_stride.unwrap_or(1);
            let per_image = settings.patches_per_image.unwrap_or(1000);
            let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
                .map_err(|e| Error::Io {
                    path: dir.display().to_string(),
                    source: e,
                })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    matches!(
                        p.extension().and_then(|e| e.to_str()),
                        Some("pgm") | Some("ppm")
                    )
                })
                .collect();
            files.sort();
            if files.is_empty() {
                return Err(Error::EmptySource);
            }
            let mut blocks: Vec<Array2<f64>> = Vec::new();
            for (i, file) in files.iter().enumerate() {
                let raster = load_raster(file)?;
                let spec = PatchSpec::new(edge, stride, raster.channels);
                let patches =
                    extract_patches::<f64>(&raster, &spec, per_image, seed.wrapping_add(i as u64))?;
                blocks.push(patches);
            }
            let m = blocks[0].nrows();
            if blocks.iter().any(|b| b.nrows() != m) {
                return Err(Error::InvalidConfig(
                    "images mix color and grayscale; patch dimensions differ".into(),
                ));
            }
            let n: usize = blocks.iter().map(|b| b.ncols()).sum();
            let mut all = Array2::zeros((m, n));
            let mut at = 0;
            for b in &blocks {
                for col in b.columns() {
                    all.column_mut(at).assign(&col);
                    at += 1;
                }
            }
            Ok(all)
        }
        DataSource::Synth(spec) => {
            let parts: Vec<&str> = spec.split(',').collect();
            if parts.len() != 5 {
                return Err(Error::InvalidConfig(
                    "--synth expects m,k,n,sparsity,sigma".into(),
                ));
            }
            let m: usize = parts[0]
                .trim()
                .parse()
                .map_err(|_| Error::InvalidConfig("synth m".into()))?;
            let k: usize = parts[1]
                .trim()
                .parse()
                .map_err(|_| Error::InvalidConfig("synth k".into()))?;
            let n: usize = parts[2]
                .trim()
                .parse()
                .map_err(|_| Error::InvalidConfig("synth n".into()))?;
            let s: usize = parts[3]
                .trim()
                .parse()
                .map_err(|_| Error::InvalidConfig("synth sparsity".into()))?;
            let sigma: f64 = parts[4]
                .trim()
                .parse()
                .map_err(|_| Error::InvalidConfig("synth sigma".into()))?;
            let (x, _) = synth_planted(m, k, n, s, sigma, seed)?;
            Ok(x)
        }
    }
}

/// Deterministic train/test split by a seeded column permutation.
fn split_columns(
    x: &Array2<f64>,
    fraction: f64,
    seed: u64,
) -> Result<(Array2<f64>, Option<Array2<f64>>)> {
    if fraction == 0.0 {
        return Ok((x.clone(), None));
    }
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidConfig("test_split must lie in [0, 1)".into()));
    }
    let mut cycle = omf_core::data_io::IndexCycle::new(x.ncols(), seed.wrapping_add(7))?;
    let order: Vec<usize> = (0..x.ncols()).map(|_| cycle.next_index().0).collect();
    let n_test = ((x.ncols() as f64) * fraction).floor() as usize;
    let n_train = x.ncols() - n_test;
    if n_train == 0 {
        return Err(Error::InvalidConfig("test split leaves no training data".into()));
    }
    let mut train = Array2::zeros((x.nrows(), n_train));
    for (i, &c) in order[..n_train].iter().enumerate() {
        train.column_mut(i).assign(&x.column(c));
    }
    let test = if n_test > 0 {
        let mut t = Array2::zeros((x.nrows(), n_test));
        for (i, &c) in order[n_train..].iter().enumerate() {
            t.column_mut(i).assign(&x.column(c));
        }
        Some(t)
    } else {
        None
    };
    Ok((train, test))
}

fn write_outputs(out: &Path, dict: &Dictionary64, trace: &MetricsTrace) -> Result<PathBuf> {
    std::fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.display().to_string(),
        source: e,
    })?;
    let dict_path = out.join("dictionary.omf");
    save_matrix(&dict.atoms().view(), &dict_path)?;
    let metrics_path = out.join("metrics.csv");
    std::fs::write(&metrics_path, trace.to_csv()).map_err(|e| Error::Io {
        path: metrics_path.display().to_string(),
        source: e,
    })?;
    Ok(dict_path)
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    common: CommonTrainArgs,
}

pub fn train_with_settings(settings: &Settings) -> Result<(Dictionary64, MetricsTrace, PathBuf)> {
    let mut data = load_data(settings)?;
    let (center, normalize) = settings.preprocess_flags()?;
    preprocess(&mut data, center, normalize);
    let (train_x, test_x) = split_columns(&data, settings.test_split.unwrap_or(0.0), settings.resolved_seed()?)?;
    let config = settings.learner_config(train_x.nrows(), train_x.ncols())?;
    let preset = settings.preset_struct()?;

    let out = settings
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("omf-out"));
    if preset.kind == PresetKind::GroupDictLearn
        || settings.penalty.as_deref() == Some("group")
    {
        let q = preset.group_size.max(1);
        let groups: Vec<Array2<f64>> = (0..train_x.ncols() / q)
            .map(|g| {
                let mut block = Array2::zeros((train_x.nrows(), q));
                for c in 0..q {
                    block.column_mut(c).assign(&train_x.column(g * q + c));
                }
                block
            })
            .collect();
        let (dict, trace) = group_factorize(&groups, &preset, &config)?;
        let dict_path = write_outputs(&out, &dict, &trace)?;
        return Ok((dict, trace, dict_path));
    }

    let test_view = test_x.as_ref().map(|t| t.view());
    let (dict, trace) = train_learner(&train_x.view(), &config, test_view.as_ref())?;
    let dict_path = write_outputs(&out, &dict, &trace)?;
    Ok((dict, trace, dict_path))
}

pub fn train_cmd(args: TrainArgs) -> Result<()> {
    let settings = args.common.settings()?;
    let (dict, trace, dict_path) = train_with_settings(&settings)?;
    let last = trace.checkpoints.last();
    println!("dictionary: {} ({}x{})", dict_path.display(), dict.m(), dict.k());
    println!(
        "metrics: {} checkpoints{}",
        trace.checkpoints.len(),
        last.map(|c| format!(
            ", final train_obj {:.6}{}",
            c.train_obj,
            c.test_obj
                .map(|t| format!(", test_obj {t:.6}"))
                .unwrap_or_default()
        ))
        .unwrap_or_default()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct LassoArgs {
    /// Signal vector file (m x 1 matrix, text or binary).
    signal: PathBuf,
    /// Dictionary matrix file (m x k).
    dictionary: PathBuf,
    /// Solve at this penalty level.
    #[arg(long)]
    lambda: Option<f64>,
    /// Solve the l1-budget-constrained variant.
    #[arg(long)]
    budget: Option<f64>,
    /// Solve the residual-constrained variant (squared residual bound).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Elastic-net quadratic weight.
    #[arg(long, default_value_t = 0.0)]
    lambda2: f64,
    /// Restrict coefficients to be non-negative.
    #[arg(long)]
    nonneg: bool,
    /// Output code file (text matrix).
    #[arg(long, default_value = "code.txt")]
    out: PathBuf,
}

fn load_vector(path: &Path) -> Result<Array1<f64>> {
    let m = load_matrix::<f64>(path)?;
    if m.ncols() == 1 {
        Ok(m.column(0).to_owned())
    } else if m.nrows() == 1 {
        Ok(m.row(0).to_owned())
    } else {
        Err(Error::InvalidConfig(format!(
            "{}: expected a vector, found {}x{}",
            path.display(),
            m.nrows(),
            m.ncols()
        )))
    }
}

pub fn lasso(args: LassoArgs) -> Result<()> {
    let x = load_vector(&args.signal)?;
    let atoms = load_matrix::<f64>(&args.dictionary)?;
    // Columns of stored dictionaries satisfy the base unit ball.
    let dict = Dictionary64::new(atoms, ConstraintSet::l2_ball())?;
    let stop = match (args.lambda, args.budget, args.epsilon) {
        (Some(l), None, None) => StopRule::LambdaMin(l),
        (None, Some(t), None) => StopRule::L1Budget(t),
        (None, None, Some(e)) => StopRule::ResidualSq(e),
        _ => {
            return Err(Error::InvalidConfig(
                "give exactly one of --lambda, --budget, --epsilon".into(),
            ))
        }
    };
    let mut penalty = PenaltyConfig::l1(args.lambda.unwrap_or(0.0));
    penalty.l2_weight = args.lambda2;
    penalty.nonneg = args.nonneg;
    let path = lars_lasso_path(&x.view(), &dict, &penalty, stop)?;
    let code = path.endpoint.code();
    let dense = code.to_dense().insert_axis(ndarray::Axis(1));
    save_matrix_text(&dense.view(), &args.out)?;
    let residual = kkt_residual(&x.view(), &dict, &code, path.endpoint.lambda)?;
    println!("nonzeros: {}", code.nnz());
    println!("lambda: {:.12}", path.endpoint.lambda);
    println!("kkt_residual: {residual:.3e}");
    Ok(())
}

#[derive(Args, Debug)]
pub struct ProjectArgs {
    /// Vector file to project.
    vector: PathBuf,
    /// Constraint set: l2|nonneg|elastic|fused.
    #[arg(long, default_value = "l2")]
    constraint: String,
    /// Elastic-net sparsity weight.
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    /// Fused-lasso l1 weight.
    #[arg(long, default_value_t = 0.0)]
    gamma1: f64,
    /// Fused-lasso difference weight.
    #[arg(long, default_value_t = 0.0)]
    gamma2: f64,
    /// Constraint radius.
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    /// Restrict the elastic-net projection to the non-negative orthant.
    #[arg(long)]
    nonneg: bool,
    /// Output vector file (text matrix).
    #[arg(long, default_value = "projected.txt")]
    out: PathBuf,
}

pub fn project(args: ProjectArgs) -> Result<()> {
    let b = load_vector(&args.vector)?;
    let (projected, value) = match args.constraint.as_str() {
        // The elastic-net projection keeps its own parametrization:
        // ||u||_1 + (gamma/2)||u||_2^2 <= tau, so gamma = 0 is the l1 ball.
        "elastic" => {
            let u = project_elastic_net(&b.view(), args.gamma, args.tau, args.nonneg)?;
            let l1: f64 = u.iter().map(|v| v.abs()).sum();
            let sq: f64 = u.iter().map(|v| v * v).sum();
            let value = l1 + 0.5 * args.gamma * sq;
            (u, value)
        }
        name => {
            let set = match name {
                "l2" => ConstraintSet::l2_ball(),
                "nonneg" => ConstraintSet::nonneg_l2_ball(),
                "fused" => ConstraintSet::fused_lasso_ball(args.gamma1, args.gamma2),
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown constraint {other:?} (expected l2|nonneg|elastic|fused)"
                    )))
                }
            }
            .with_radius(args.tau);
            set.validate()?;
            let u = set.project(&b.view())?;
            let value = set.value(&u.view());
            (u, value)
        }
    };
    let dense = projected.insert_axis(ndarray::Axis(1));
    save_matrix_text(&dense.view(), &args.out)?;
    println!("constraint_value: {value:.12}");
    if args.constraint == "fused" {
        println!("fl_value: {:.12}", fl_value(&dense.column(0)));
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct FactorizeArgs {
    #[command(flatten)]
    common: CommonTrainArgs,
}

pub fn factorize(args: FactorizeArgs) -> Result<()> {
    let settings = args.common.settings()?;
    let preset = settings.preset_struct()?;
    let out = settings
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("omf-out"));

    if preset.kind == PresetKind::GroupDictLearn {
        // Group factorization emits the dictionary and trace only.
        let (dict, trace, dict_path) = train_with_settings(&settings)?;
        println!("dictionary: {} ({}x{})", dict_path.display(), dict.m(), dict.k());
        println!("checkpoints: {}", trace.checkpoints.len());
        return Ok(());
    }

    let data = load_data(&settings)?;
    let config = settings.learner_config(data.nrows(), data.ncols())?;
    let result = run_factorize(&data.view(), &preset, &config)?;
    std::fs::create_dir_all(&out).map_err(|e| Error::Io {
        path: out.display().to_string(),
        source: e,
    })?;
    let dict_path = out.join("dictionary.omf");
    save_matrix(&result.dict.atoms().view(), &dict_path)?;
    let codes_path = out.join("codes.omf");
    save_matrix(&result.codes.view(), &codes_path)?;
    let metrics_path = out.join("metrics.csv");
    std::fs::write(&metrics_path, result.trace.to_csv()).map_err(|e| Error::Io {
        path: metrics_path.display().to_string(),
        source: e,
    })?;
    println!(
        "dictionary: {} ({}x{})",
        dict_path.display(),
        result.dict.m(),
        result.dict.k()
    );
    println!("codes: {}", codes_path.display());
    println!("dictionary_density: {:.4}", result.dict_density);
    Ok(())
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// metrics.csv files to merge.
    #[arg(required = true)]
    traces: Vec<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn compare(args: CompareArgs) -> Result<()> {
    // Label by file stem; fall back to the full path on collisions.
    let stems: Vec<String> = args
        .traces
        .iter()
        .map(|p| {
            p.file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("run")
                .to_string()
        })
        .collect();
    let labels: Vec<String> = stems
        .iter()
        .enumerate()
        .map(|(i, stem)| {
            if stems.iter().filter(|s| *s == stem).count() > 1 {
                args.traces[i].display().to_string()
            } else {
                stem.clone()
            }
        })
        .collect();
    let mut rows = String::from("run,wall_clock_s,test_obj\n");
    for (path, label) in args.traces.iter().zip(&labels) {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format("metrics csv", "empty file"))?;
        if header != MetricsTrace::CSV_HEADER {
            return Err(Error::format(
                "metrics csv",
                format!("{}: unexpected header {header:?}", path.display()),
            ));
        }
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(Error::format(
                    "metrics csv",
                    format!("{}:{}: expected 7 fields", path.display(), lineno + 2),
                ));
            }
            let wall: f64 = fields[1].parse().map_err(|_| {
                Error::format(
                    "metrics csv",
                    format!("{}:{}: bad wall_clock_s", path.display(), lineno + 2),
                )
            })?;
            // The trace writes "nan" when no test set was configured.
            let test: f64 = fields[3].parse().map_err(|_| {
                Error::format(
                    "metrics csv",
                    format!("{}:{}: bad test_obj", path.display(), lineno + 2),
                )
            })?;
            rows.push_str(&format!("{label},{wall:.6},{test:?}\n"));
        }
    }
    match &args.out {
        Some(path) => std::fs::write(path, rows).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?,
        None => print!("{rows}"),
    }
    Ok(())
}

pub use train_cmd as train;
