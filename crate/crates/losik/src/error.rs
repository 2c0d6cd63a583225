//! Crate-wide error type.
//!
//! Every evaluator in the crate (Taylor arithmetic, expression evaluation,
//! jet transitions, form evaluators, flows) shares this error enum so that
//! boxed closures can propagate failures uniformly.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("division by a series with zero constant term")]
    DivisionBySingular,
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("syntax error at position {pos}: expected {expected}")]
    SyntaxError { pos: usize, expected: String },
    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("arity error: {0}")]
    ArityError(String),
    #[error("singular Jacobian")]
    SingularJacobian,
    #[error("singular matrix")]
    SingularMatrix,
    #[error("zero determinant coordinate")]
    ZeroDeterminant,
    #[error("trajectory blow-up: {0}")]
    BlowUp(String),
    #[error("integrand singular: {0}")]
    IntegrandSingular(String),
    #[error("profile domain error: {0}")]
    ProfileDomainError(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
