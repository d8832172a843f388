use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates an invariant. `path` names the field.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    /// The requested computation does not fit the memory budget.
    #[error("resource budget exceeded: need {needed} amplitudes, budget allows {allowed}; {suggestion}")]
    Resource {
        needed: u128,
        allowed: u128,
        suggestion: String,
    },

    /// θ too close to π/4, where the metric family is singular.
    #[error("metric family is singular at theta = {theta} (|cos 2θ| = {cos2:e} < 1e-8)")]
    Singular { theta: f64, cos2: f64 },

    /// The requested analysis is not defined for the given input.
    #[error("unsupported input: {0}")]
    Unsupported(String),

    /// Two independent routes disagree beyond tolerance.
    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("binary state file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Memory budget for dense amplitude tables, counted in complex amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub max_amplitudes: u128,
}

impl Budget {
    pub fn from_mb(mb: u64) -> Self {
        Self {
            max_amplitudes: (mb as u128) * (1 << 20) / 16,
        }
    }

    pub fn unlimited() -> Self {
        Self {
            max_amplitudes: u128::MAX,
        }
    }

    pub fn check(&self, needed: u128, suggestion: impl FnOnce() -> String) -> Result<()> {
        if needed > self.max_amplitudes {
            return Err(Error::Resource {
                needed,
                allowed: self.max_amplitudes,
                suggestion: suggestion(),
            });
        }
        Ok(())
    }
}

impl Default for Budget {
    fn default() -> Self {
        Self::from_mb(1024)
    }
}

/// `base^exp` without overflow, saturating at `u128::MAX`.
pub fn checked_pow(base: u128, exp: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = match acc.checked_mul(base) {
            Some(v) => v,
            None => return u128::MAX,
        };
    }
    acc
}
