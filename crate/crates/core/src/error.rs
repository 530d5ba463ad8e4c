// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("index error: {0}")]
    Index(String),

    #[error("validation error: {0}")]
    Validation(String),

    /// Two candidate quadratics coincide, so no breakpoint between them exists.
    #[error("identical functions: {0}")]
    IdenticalFunctions(String),

    /// The detected changepoint vector is not selected anywhere along the line.
    #[error("empty truncation region: {0}")]
    EmptyRegion(String),

    #[error("numerically degenerate: {0}")]
    Degenerate(String),

    #[error("estimation error: {0}")]
    Estimation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! validation {
    ($($arg:tt)*) => {
        $crate::error::Error::Validation(format!($($arg)*))
    };
}
pub(crate) use validation;
