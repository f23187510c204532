//! Experiment-conditional identifiability of controlled linear systems.
//!
//! Given `dx/dt = A x + B u` and a single experiment `(x0, u)`, the data
//! determine `(A, B)` only on the visible subspace
//! `V(x0) = span{x0, B, A x0, A B, ..., A^{n-1} [x0 B]}`. This crate computes
//! that subspace, the margins that measure how close an experiment is to
//! losing identifiability, the full family of systems consistent with the
//! data, and the baseline estimators and random ensembles used to study
//! recovery in practice.

pub mod consistent;
pub mod ensembles;
pub mod error;
pub mod estimators;
pub mod identifiability;
pub mod linalg;
pub mod lti;
pub mod visibility;

pub use error::{Error, Result};
pub use lti::{DiscreteSystem, Experiment, LtiSystem, Trajectory};
pub use visibility::{BlockForm, Subspace};
