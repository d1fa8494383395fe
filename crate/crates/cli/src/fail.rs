//! Exit-code contract: 0 success, 1 runtime fault, 2 validation.

use std::fmt;

use aerogh_core::RuntimeError;
use aerogh_server::ServeError;
use aerogh_vision::VisionError;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn validation(error: impl Into<anyhow::Error>) -> Self {
        Self { code: 2, error: error.into() }
    }

    pub fn runtime(error: impl Into<anyhow::Error>) -> Self {
        Self { code: 1, error: error.into() }
    }

    pub fn context(self, what: impl fmt::Display) -> Self {
        Self { code: self.code, error: self.error.context(what.to_string()) }
    }
}

impl From<RuntimeError> for Failure {
    fn from(e: RuntimeError) -> Self {
        if e.is_validation() {
            Self::validation(e)
        } else {
            Self::runtime(e)
        }
    }
}

impl From<ServeError> for Failure {
    fn from(e: ServeError) -> Self {
        match e {
            ServeError::Listen { .. } => Self::validation(e),
            e if e.is_validation() => Self::validation(e),
            e => Self::runtime(e),
        }
    }
}

/// Bad inputs are the caller's problem; a diverging run is ours.
impl From<VisionError> for Failure {
    fn from(e: VisionError) -> Self {
        match e {
            VisionError::NonFinite { .. } => Self::runtime(e),
            _ => Self::validation(e),
        }
    }
}

pub type CliResult<T = ()> = Result<T, Failure>;

#[cfg(test)]
mod tests {
    use super::*;
    use aerogh_core::ConfigError;

    #[test]
    fn codes_follow_the_contract() {
        assert_eq!(Failure::from(RuntimeError::Config(ConfigError::Invalid("x".into()))).code, 2);
        assert_eq!(Failure::from(VisionError::Config("x".into())).code, 2);
        assert_eq!(Failure::from(VisionError::NonFinite { epoch: 0, batch: 0, grad_norm: f64::NAN }).code, 1);
        let io = std::io::Error::other("disk");
        assert_eq!(Failure::from(ServeError::Io(io)).code, 1);
    }
}
