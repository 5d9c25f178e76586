use std::path::PathBuf;

/// Errors produced by the bound pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("measure has an atom at the origin (weight {0}); its Coulomb self-energy is infinite")]
    InfiniteSelfEnergy(f64),

    #[error("memory budget exceeded: {what} needs {required_bytes} bytes, budget is {budget_bytes} bytes")]
    Resource {
        what: &'static str,
        required_bytes: u64,
        budget_bytes: u64,
    },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("starting vector is not feasible: psi[{ell}][{m}] = {psi:e} exceeds F[{ell}] + F[{m}] = {sum:e}")]
    Infeasible {
        ell: usize,
        m: usize,
        psi: f64,
        sum: f64,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Whether the error (possibly wrapped in stages) is a failed certificate.
    pub fn is_infeasible(&self) -> bool {
        match self {
            Error::Infeasible { .. } => true,
            Error::Stage { source, .. } => source.is_infeasible(),
            _ => false,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
