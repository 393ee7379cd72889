//! Numerical laboratory for the one-dimensional quasilinear
//! parabolic-parabolic Keller-Segel system
//!
//! ```text
//! u_t = (a(u) u_x - u v_x)_x,   eps v_t = D v_xx - gamma v + u - M   on (0, 1)
//! ```
//!
//! with no-flux boundaries. The crate provides a mass-conservative
//! finite-volume solver with blow-up detection, the Liapunov and virial
//! diagnostics along trajectories, and explicit finite-time blow-up
//! certificates together with an upper bound on the blow-up time.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod criterion;
pub mod diagnostics;
pub mod diffusion;
pub mod error;
pub mod initial;
pub mod model;
pub mod quadrature;
pub mod solver;

pub use criterion::{Certificate, CertificateQuery, Verdict};
pub use diagnostics::{DiagnosticsConfig, DiagnosticsRecord, DiagnosticsSeries};
pub use diffusion::{DecayBound, DiffusionModel, EntropyTable};
pub use error::{Error, Result};
pub use initial::{InitialSpec, UKind, VKind};
pub use model::{Grid, Params, RunOutcome, State, StopReason};
pub use solver::{RunResult, SolverConfig, VSolver};
