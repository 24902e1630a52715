//! Transition-amplitude maximization and weak values for non-Hermitian
//! Hamiltonians under the metric `Q = (P†)⁻¹P⁻¹` built from the eigenvectors.

// `!(x > 0.0)` style guards are kept so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod maximizer;
pub mod qmetric;
pub mod sampling;
pub mod weakvalue;

pub use dynamics::{Classification, EvolvingState, StateKind, System, TimeSpan};
pub use error::{Error, Result};
pub use linalg::{c64, CMat, CVec, EigOptions, EigenDecomposition};
pub use maximizer::{MaxMethod, MaximizationResult};
pub use qmetric::QMetric;
