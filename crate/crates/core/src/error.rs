use std::path::PathBuf;

/// Errors raised by the simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("singular geometry: tx element {tx} and rx element {rx} coincide")]
    SingularGeometry { tx: usize, rx: usize },

    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    #[error("{what} = {value} is outside the feasible range ({low}, {high}]")]
    Domain {
        what: &'static str,
        value: f64,
        low: f64,
        high: f64,
    },

    #[error("C({n},{k}) = {count} subsets exceeds {bound}; pass an explicit cap")]
    CapRequired {
        n: usize,
        k: usize,
        count: u128,
        bound: usize,
    },

    #[error("unknown preset {name:?}; known presets: {known}")]
    UnknownPreset { name: String, known: String },

    #[error("config: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::SingularGeometry { .. } => "singular_geometry",
            Error::DegenerateChannel(_) => "degenerate_channel",
            Error::Domain { .. } => "domain",
            Error::CapRequired { .. } => "cap_required",
            Error::UnknownPreset { .. } => "unknown_preset",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
