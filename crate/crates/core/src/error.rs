use thiserror::Error;

/// Errors produced across the library.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("site index {index} outside valid range [{lo}, {hi}]")]
    Range { index: i64, lo: i64, hi: i64 },

    #[error("class value {value} invalid for a configuration with {n_classes} classes")]
    Domain { value: u32, n_classes: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("infeasible input: {0}")]
    Infeasible(String),

    #[error("bell cascade leaves the window at line {line} (site {site})")]
    Boundary { line: usize, site: i64 },

    #[error("integer overflow computing {0}")]
    Overflow(String),

    #[error("enumeration of {size} configurations exceeds the cap of {cap}")]
    Resource { size: u128, cap: u128 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("decode error: {0}")]
    Decode(String),
}

pub type Result<T> = std::result::Result<T, Error>;
