use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Physically meaningless circuit parameters (singular phasor system).
    #[error("configuration error: {0}")]
    Config(String),

    /// Singular nodal matrix during time stepping.
    #[error("topology error: {0}")]
    Topology(String),

    #[error("SMO did not converge after {sweeps} sweeps (worst KKT violation {worst_violation:.3e})")]
    Convergence { sweeps: usize, worst_violation: f64 },

    #[error("load error: {0}")]
    Load(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn load(msg: impl Into<String>) -> Self {
        Error::Load(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
