//! Collaborative ranking from pairwise comparisons.
//!
//! The model is a rank-`r` score matrix `X = U V^T` fitted to observations
//! "user `i` prefers item `j` over item `k`". [`altsvm`] fits it by
//! alternating dual coordinate descent, [`sgd`] is a plain stochastic
//! gradient baseline, [`eval`] computes ranking metrics and [`theory`]
//! checks the statistical scaling laws on synthetic data.

pub mod altsvm;
pub mod error;
pub mod eval;
pub mod format;
pub mod ingest;
pub mod loss;
pub mod model;
pub mod sgd;
pub mod theory;
pub mod trace;

pub use error::{Error, ErrorClass, Result};
pub use loss::LossKind;
pub use model::{margin, primal_objective, ComparisonSet, ComparisonTriple, FactorPair, Label};
pub use trace::{ConvergenceTrace, TraceRecord};
