//! Factorization of time-resolved Raman measurements `M ≈ W·H` without a
//! separability assumption.
//!
//! The measurement matrix is projected onto a low-dimensional basis whose first
//! vector is constant, an inner simplex in that basis seeds a transformation
//! matrix `A`, and `A` is then tuned by Nelder–Mead against a weighted penalty
//! on the structural properties of the factors:
//!
//! * `W` (component spectra) is non-negative,
//! * `H` (relative concentrations) is non-negative and column stochastic,
//! * the step-to-step transition matrix `P` with `h(t_{i-1})ᵀ P = h(t_i)ᵀ`
//!   is non-negative and row stochastic.
//!
//! All three factors are functions of `A` only:
//! `H = (U A)ᵀ`, `W = M (Aᵀ Uᵀ)†` and `P = A⁻¹ (U₋† U₊) A`.
//!
//! The [`synth`] module generates first-order reaction datasets with
//! Lorentzian component spectra, and [`metrics`] scores a recovery against
//! ground truth.

// `!(x > 0.0)` is used throughout to reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod io;
pub mod metrics;
pub mod numerics;
pub mod objective;
pub mod optimizer;
pub mod pcca;
pub mod pipeline;
pub mod preprocess;
pub mod synth;

pub use error::{Error, Result};
pub use metrics::{match_components, report, GroundTruth, MatchReport, RecoveredFactors};
pub use numerics::{Matrix, Vector};
pub use objective::{PenaltyBreakdown, PenaltyWeights};
pub use optimizer::{nelder_mead, NmOptions, NmResult, Termination};
pub use pipeline::{factorize, Factorization, PipelineConfig};
pub use preprocess::{build_context, PccaContext, SpectralMatrix};
