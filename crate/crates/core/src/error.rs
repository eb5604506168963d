use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("integrand returned NaN at x = {x:e}")]
    NanIntegrand { x: f64 },

    #[error("quadrature did not converge: value {value:e}, error estimate {error:e}")]
    NoConvergence { value: f64, error: f64 },

    #[error("bracket sign violation: {0}")]
    Bracket(String),

    #[error("no sign change of H(rho) on the scan grid:\n{table}")]
    NoSignChange { table: String },

    #[error("branch tracking failed: {0}")]
    Branch(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
