use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid probability data: {0}")]
    Probability(String),

    #[error("invalid value: {0}")]
    Invalid(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("game does not follow the zero-sum reward convention: {0}")]
    NotZeroSum(String),

    #[error("class not enumerable: {0}")]
    NotEnumerable(String),

    #[error("class has {size} members, above the enumeration cap {cap}")]
    EnumerationCap { size: u128, cap: u64 },

    #[error("empty strategy class")]
    EmptyClass,

    #[error("oracle budget exceeded: {what} needs {needed}, budget is {budget}")]
    Budget {
        what: &'static str,
        needed: u128,
        budget: u128,
    },

    #[error("support enumeration found no equilibrium for a {rows}x{cols} matrix")]
    SupportEnumeration { rows: usize, cols: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}
