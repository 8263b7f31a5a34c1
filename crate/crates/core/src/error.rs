use thiserror::Error;

/// Errors raised by the mapping, planning and exploration layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("rejected input: {0}")]
    InvalidInput(String),

    #[error("parameter {name} outside its domain: {value}")]
    Domain { name: &'static str, value: f64 },

    #[error("invalid pose ({x:.3}, {y:.3}): {reason}")]
    InvalidPose { x: f64, y: f64, reason: String },

    #[error("gram matrix singular after jitter {jitter:e} (condition estimate {condition:e})")]
    SingularGram { jitter: f64, condition: f64 },

    #[error("start pose unsafe: occupancy {occupancy:.3} exceeds p_safe {p_safe:.3}")]
    UnsafeStart { occupancy: f64, p_safe: f64 },

    #[error("malformed PGM at byte {offset}: {reason}")]
    Pgm { offset: usize, reason: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
