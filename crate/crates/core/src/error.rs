use thiserror::Error;

use crate::dynamics::StateKind;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not diagonalizable (cond(P) = {cond_p:.3e}, residual = {residual:.3e})")]
    NotDiagonalizable { cond_p: f64, residual: f64 },

    #[error("input contains NaN or infinite entries")]
    NonFinite,

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not positive definite (min eigenvalue = {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("matrix is singular (pivot magnitude {pivot:.3e})")]
    Singular { pivot: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not Hermitian (relative residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("operator is not Q-Hermitian (relative residual {residual:.3e})")]
    NotQHermitian { residual: f64 },

    #[error("state kind mismatch: expected {expected:?}, found {found:?}")]
    KindMismatch { expected: StateKind, found: StateKind },

    #[error("parameter index {index} is outside the maximal-imaginary subset")]
    SubsetMismatch { index: usize },

    #[error("invalid parameters: {0}")]
    BadParams(String),

    #[error("invalid generator options: {0}")]
    BadOptions(String),

    #[error("iteration did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("transition amplitude vanishes (|<B|A>| = {magnitude:.3e})")]
    VanishingDenominator { magnitude: f64 },

    #[error("invalid time span: T_B - T_A = {0} must be positive")]
    BadTimeSpan(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
