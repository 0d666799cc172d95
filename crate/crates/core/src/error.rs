use thiserror::Error;

/// Errors raised by the algebra, weight, operator, spectral and harness layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("algebra must have at least one block")]
    EmptyBlockList,
    #[error("block {index} has non-positive weight {weight}")]
    NonpositiveWeight { index: usize, weight: f64 },
    #[error("block {index} has zero dimension")]
    NonpositiveDim { index: usize },
    #[error("elements live on different algebras")]
    AlgebraMismatch,
    #[error("block shapes do not match the algebra: {0}")]
    ShapeMismatch(String),
    #[error("invalid exponent {0}: need p >= 1 or p = infinity")]
    InvalidExponent(f64),
    #[error("element is not self-adjoint (residual {0:.3e})")]
    NotSelfAdjoint(f64),

    #[error("complex number {re}+{im}i is not unimodular")]
    NotUnimodular { re: f64, im: f64 },
    #[error("invalid horizon {0}: need at least 10 steps")]
    InvalidHorizon(usize),
    #[error("invalid tail window {0}: need 0 < window <= 1")]
    InvalidWindow(f64),
    #[error("weight class mismatch: expected {expected}, found {found}")]
    ClassMismatch { expected: String, found: String },

    #[error("element is not a contraction (operator norm {0})")]
    NotContraction(f64),
    #[error("map is not a trace-preserving *-automorphism: {0}")]
    NotAutomorphism(String),
    #[error("measure is not a probability: {0}")]
    NotProbability(String),
    #[error("conditional expectation is incompatible with the algebra: {0}")]
    IncompatibleSubalgebra(String),
    #[error("gcd({p}, {q}) != 1")]
    NotCoprime { p: i64, q: usize },
    #[error("time parameter must be positive, got {0}")]
    NonpositiveTime(f64),
    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("eigenvalue modulus {modulus} falls in the ambiguous band around the unit circle")]
    UnimodularGap { modulus: f64 },
    #[error("operator is not power bounded: {0}")]
    NotPowerBounded(String),
    #[error("flight spectral radius {0} is not separated from 1")]
    DecompositionDegenerate(f64),
    #[error("operator is not a contraction on L2 (norm {0})")]
    NotL2Contraction(f64),

    #[error("moving window is invalid: {0}")]
    InvalidMovingWindow(String),
    #[error("trace budget {budget} is not usable (total trace {total})")]
    BudgetTooSmall { budget: f64, total: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
