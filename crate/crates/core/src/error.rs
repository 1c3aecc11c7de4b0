use thiserror::Error;

/// Errors produced by the rigidity toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("{invariant}: {entity}")]
    Validation { invariant: String, entity: String },

    #[error("state is not a configuration: block {block} deviates from identity by {deviation:e}")]
    NotConfiguration { block: usize, deviation: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("order {requested} exceeds available order {available}")]
    OrderExceeded { requested: usize, available: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("vector is not a selfstress: |w^T R| = {0:e}")]
    NotSelfstress(f64),

    #[error("material stiffness not positive definite (block {0})")]
    Stiffness(usize),

    #[error("prestress too large: eps*|w| = {value:e} exceeds sigma_min(K)/{guard} = {limit:e}")]
    PrestressGuard { value: f64, guard: f64, limit: f64 },

    #[error("right-hand side not in the column space of R (residual {0:e})")]
    NotExtendable(f64),

    #[error("direction is not in the null space of R (residual {0:e})")]
    NotInNullSpace(f64),

    #[error("nullity is {0}, expected 1")]
    NullityNotOne(usize),

    #[error("exponent not resolvable: {0}")]
    Unresolvable(String),
}

impl Error {
    pub(crate) fn validation(invariant: impl Into<String>, entity: impl Into<String>) -> Self {
        Error::Validation {
            invariant: invariant.into(),
            entity: entity.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
