//! Nonlinearly preconditioned Newton methods.
//!
//! The crate provides the reference-function machinery (scalar kernels and
//! their conjugates), the preconditioned Newton iterations (pure, globalized,
//! regularized, adaptive), the generalized-eigenvalue subproblem solver behind
//! the regularized variants, built-in test problems, and numerical validation
//! oracles.

pub mod linalg;
pub mod problems;
pub mod reference;
pub mod solvers;
pub mod subproblem;
pub mod validation;

pub use reference::{KernelKind, Reference, ReferenceFunction, ScalarKernel, Structure};
pub use solvers::{SolverTrace, StopMeasure, StoppingCriteria, TerminationReason};
