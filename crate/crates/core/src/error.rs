use thiserror::Error;

/// Errors raised by the solvers. Variants carry enough context to tell the
/// caller which module rejected the input.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("position {x} lies outside the unit interval")]
    Domain { x: f64 },

    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("evaluation failed at x = {x}: {message}")]
    Evaluation { x: f64, message: String },

    #[error("invalid coefficient table: {0}")]
    Table(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error(
        "coefficient degenerates ({0}); boundary-degenerate problems go through the `degenerate` module"
    )]
    Degeneracy(String),

    #[error("assembly failed: {0}")]
    Assembly(String),

    #[error("degenerate boundary coupling: {0}")]
    DegenerateCoupling(String),

    #[error("law {index} is not a conservation law: kernel residual {residual:e} exceeds {tolerance:e}")]
    NotAConservationLaw {
        index: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("conservation laws are linearly dependent: {0}")]
    Rank(String),

    #[error("no steady state: the spectrum has no zero eigenvalue")]
    NoSteadyState,

    #[error("incompatible moment prescription: {0}")]
    Compatibility(String),

    #[error("change of variables failed: {0}")]
    Transform(String),

    #[error("regularity tier: {0}")]
    RegularityTier(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
