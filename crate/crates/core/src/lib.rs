//! Online matrix factorization and sparse coding.
//!
//! The crate learns a dictionary `D` whose sparse linear combinations
//! approximate a stream of signals, by stochastically minimizing a quadratic
//! surrogate of the empirical cost. Around that loop it provides the
//! LARS-Lasso homotopy and coordinate-descent sparse coders, projections
//! onto the dictionary-column constraint sets (l2, non-negative,
//! elastic-net and fused-lasso balls), presets for NMF, NNSC, sparse PCA
//! and simultaneous (group) coding, and file/stream plumbing for running
//! benchmarks.
//!
//! All numerical code is generic over the [`Float`] scalar; concrete
//! aliases for the common `f64` instantiation live at the crate root.

pub mod data_io;
pub mod dictionary;
pub mod error;
mod float;
pub mod learner;
pub mod linalg;
pub mod presets;
pub mod projections;
pub mod sparse_coding;

pub use error::{Error, Result};
pub use float::Float;

/// `f64` instantiations of the central types.
pub type Dictionary64 = dictionary::Dictionary<f64>;
pub type SurrogateStats64 = dictionary::SurrogateStats<f64>;
pub type SparseCode64 = sparse_coding::SparseCode<f64>;
pub type RegPath64 = sparse_coding::RegPath<f64>;
pub type PenaltyConfig64 = sparse_coding::PenaltyConfig<f64>;
pub type ConstraintSet64 = projections::ConstraintSet<f64>;
pub type LearnerConfig64 = learner::LearnerConfig<f64>;
pub type LearnerState64 = learner::LearnerState<f64>;
pub type MetricsTrace64 = learner::MetricsTrace;

/// `f32` instantiations, for single-precision experiments.
pub type Dictionary32 = dictionary::Dictionary<f32>;
pub type SparseCode32 = sparse_coding::SparseCode<f32>;
pub type PenaltyConfig32 = sparse_coding::PenaltyConfig<f32>;
pub type ConstraintSet32 = projections::ConstraintSet<f32>;
