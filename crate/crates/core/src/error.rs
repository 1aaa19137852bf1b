use thiserror::Error;

/// Errors raised by the factorization toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NmfError {
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sample {sample} of config `{config}` failed: {source}")]
    Sample {
        config: String,
        sample: usize,
        #[source]
        source: Box<NmfError>,
    },
}

pub type Result<T> = std::result::Result<T, NmfError>;

pub(crate) fn dim_err(op: &'static str, detail: impl Into<String>) -> NmfError {
    NmfError::Dimension {
        op,
        detail: detail.into(),
    }
}
