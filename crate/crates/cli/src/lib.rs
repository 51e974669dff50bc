//! Experiment harness around the preconditioned Newton solvers: run
//! configuration, solver dispatch, artifact output, benchmark drivers and the
//! numerical validation battery.

pub mod config;
pub mod experiments;
pub mod output;
pub mod runner;
pub mod validate;
