//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("undeclared identifier `{name}` at byte {pos}")]
    UndeclaredIdentifier { name: String, pos: usize },

    #[error("evaluation error in {context}: {msg}")]
    Eval { context: String, msg: String },

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("{what} failed to converge after {iters} iterations (residual {residual:.3e})")]
    NoConvergence {
        what: String,
        iters: usize,
        residual: f64,
    },

    #[error("branch end reached near mu = {mu}: {msg}")]
    BranchEnd { mu: f64, msg: String },

    #[error("no sign change of {what} found in [{lo}, {hi}]")]
    NoSignChange { what: String, lo: f64, hi: f64 },

    #[error("mu = {mu} is not a Turing point: {reason}")]
    NotTuringPoint { mu: f64, reason: String },

    #[error("repeated positive spatial eigenvalue {lambda} at mu = {mu}: Belyakov-Devaney point, not a Turing point")]
    BelyakovDevaney { mu: f64, lambda: f64 },

    #[error("degenerate eigenbasis: d f/d v = {fv:.3e} at the Turing point")]
    DegenerateEigenbasis { fv: f64 },

    #[error("gamma = {gamma:.3e} is below the nondegeneracy threshold {threshold:.3e}; P3 undefined")]
    GammaDegenerate { gamma: f64, threshold: f64 },

    #[error("matching solve diverged after {iters} iterations")]
    MatchingDiverged { iters: usize },

    #[error("matching solve converged to the trivial zero solution")]
    MatchingTrivial,

    #[error("matching Jacobian is degenerate (smallest singular value {min_sv:.3e})")]
    MatchingDegenerate { min_sv: f64 },

    #[error("ring sign exponent m(|i|+|j|-|k|-n)/2 is not an integer for (i,j,k,n)=({i},{j},{k},{n})")]
    SignExponentNonIntegral { i: i64, j: i64, k: i64, n: i64 },

    #[error("invalid pattern specification: {0}")]
    PatternSpec(String),

    #[error("cross-diffusion transform is singular: D_v = 1 with beta != 0")]
    SingularTransform,

    #[error("field blew up at t = {t} (max |value| = {max:.3e})")]
    BlowUp { t: f64, max: f64 },

    #[error("non-finite field value at t = {t}")]
    NonFinite { t: f64 },

    #[error("Bessel order {0} above supported bound")]
    BesselOrder(usize),

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("singular linear system")]
    SingularSystem,

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
