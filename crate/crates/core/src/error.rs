/// Errors shared by the solvers, the learner and the I/O layer.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{context}: expected dimension {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// The active Gram matrix lost rank along the homotopy path.
    #[error("degenerate path: active Gram matrix singular when adding atom {atom} (pivot {pivot:e})")]
    DegeneratePath { atom: usize, pivot: f64 },

    #[error("no convergence after {iterations} iterations (optimality residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty sample source")]
    EmptySource,

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },
}

impl Error {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
