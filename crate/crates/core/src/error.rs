use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("coordinate {coord} out of range for n = {n}")]
    CoordinateOutOfRange { coord: usize, n: usize },

    #[error("point coordinate {index} is {value}, expected -1 or 1")]
    NotASignVector { index: usize, value: i64 },

    #[error("n = {n} exceeds the limit of {limit} for {what}")]
    TooLarge { what: &'static str, n: usize, limit: usize },

    #[error("function is not monotone")]
    NotMonotone,

    #[error("function is not antipodal")]
    NotAntipodal,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid field `{field}`: {reason}")]
    InvalidField { field: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidField { field: field.into(), reason: reason.into() }
    }
}

/// Deserializes JSON, naming the offending field path on failure (`root`
/// when the error is not inside a field).
pub(crate) fn parse_json<T: serde::de::DeserializeOwned>(s: &str, root: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(s);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { root.to_string() } else { path };
        Error::field(field, e.into_inner().to_string())
    })
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
