//! Robust dictionary learning in a factorized compressed space.
//!
//! Two solvers share one inexact augmented-Lagrangian loop:
//!
//! * **J-RFDL** couples an L2,1-robust concept factorization `Xᵀ ≈ V Wᵀ Xᵀ`
//!   with projective dictionary learning `Vᵀ ≈ D P X`, while the
//!   coefficients `P X` are pushed to be jointly low-rank and sparse.
//! * **DJ-RFDL** additionally learns a linear classifier `C` on the
//!   coefficients with an L2,1 regression loss.
//!
//! New samples are handled inductively: `P* x` is the coefficient vector and
//! `C*ᵀ P* x` the soft label.
//!
//! Matrices follow the column-sample convention: `X` is `n × N` with one
//! sample per column.

pub mod classify;
pub mod data;
pub mod dictsolve;
mod error;
pub mod factorize;
pub mod linalg;
pub mod model;
pub mod prox;
pub mod solver;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use model::{Method, Model, Preprocessing};
pub use prox::DiagWeights;
pub use solver::{ConvergenceTrace, HyperParams, SolverState, StopReason};
