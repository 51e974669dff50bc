//! Optimization drivers: the nonlinearly preconditioned Newton iteration, its
//! linesearch globalization, the regularized variant with exact pencil
//! subproblems, the adaptive regularized variant, and the preconditioned
//! gradient baseline.

use nalgebra::DVector;
use thiserror::Error;

use crate::problems::Objective;
use crate::reference::Reference;

mod adaptive;
mod globalized;
mod pn;
mod regularized;

pub use adaptive::{run_adaptive, AdaptiveConfig, InexactMode};
pub use globalized::{min_stationarity_bound, run_globalized, GlobalizedConfig};
pub use pn::{pg_step, pn_direction, run_newton, run_pg, run_pn, run_pn_with, PnDirection};
pub use regularized::{run_regularized, RegularizedConfig};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("this solver requires an isotropic reference function")]
    RequiresIsotropic,
    #[error(transparent)]
    Subproblem(#[from] crate::subproblem::SubproblemError),
}

/// Optimality gauge used for termination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopMeasure {
    /// `‖∇φ*(∇f(x))‖`
    PrecondGradNorm,
    /// `‖∇f(x)‖`
    GradNorm,
    /// `φ(∇φ*(∇f(x)))`
    Stationarity,
}

#[derive(Debug, Clone, Copy)]
pub struct StoppingCriteria {
    pub epsilon: f64,
    pub measure: StopMeasure,
    pub max_iters: usize,
}

impl StoppingCriteria {
    pub fn new(epsilon: f64, measure: StopMeasure, max_iters: usize) -> Self {
        assert!(epsilon > 0.0, "termination tolerance must be positive");
        Self {
            epsilon,
            measure,
            max_iters,
        }
    }
}

impl Default for StoppingCriteria {
    fn default() -> Self {
        Self {
            epsilon: 1e-8,
            measure: StopMeasure::PrecondGradNorm,
            max_iters: 500,
        }
    }
}

/// How linear systems inside the Newton-type steps are solved.
#[derive(Debug, Clone, Copy, Default)]
pub enum LinearSolverStrategy {
    /// Dense factorization of the Hessian.
    Direct,
    /// Conjugate gradients on the Hessian-sided symmetric system.
    Cg { tol: f64, maxit: usize },
    /// GMRES on the raw (asymmetric) preconditioned system.
    Gmres { tol: f64, restart: usize, maxit: usize },
    /// Direct when a dense Hessian is available, CG otherwise.
    #[default]
    Auto,
}

/// Why a run stopped.
#[derive(Debug, Clone, PartialEq)]
pub enum TerminationReason {
    /// The stopping measure fell below its tolerance.
    Converged,
    /// The step length collapsed below resolution before the measure did.
    ConvergedStepSize,
    BudgetExhausted,
    /// Iterates or objective values left the overflow guard.
    Diverged,
    /// The Newton-type system was singular and the method has no fallback.
    SingularSystem,
    /// Backtracking or smoothness-constant doubling ran out of attempts.
    LinesearchFailed { iteration: usize, detail: String },
}

impl TerminationReason {
    pub fn converged(&self) -> bool {
        matches!(
            self,
            TerminationReason::Converged | TerminationReason::ConvergedStepSize
        )
    }
}

/// Snapshot of one iteration: the point it started from and the step taken.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub k: usize,
    pub x: DVector<f64>,
    pub f: f64,
    pub grad_norm: f64,
    /// `‖∇φ*(∇f)‖`
    pub precond_grad_norm: f64,
    /// `φ(∇φ*(∇f))`
    pub stationarity: f64,
    pub step_norm: f64,
    pub tau: Option<f64>,
    pub sigma: Option<f64>,
    pub lambda: Option<f64>,
    pub rho: Option<f64>,
    pub accepted: bool,
    pub matvecs: usize,
    pub l_doublings: usize,
}

/// Full run record. `records[k]` describes iteration `k`; the `final_*`
/// fields describe the last iterate.
#[derive(Debug, Clone)]
pub struct SolverTrace {
    pub records: Vec<IterationRecord>,
    pub final_x: DVector<f64>,
    pub final_f: f64,
    pub final_grad_norm: f64,
    pub final_precond_grad_norm: f64,
    pub final_stationarity: f64,
    pub reason: TerminationReason,
    pub total_matvecs: usize,
    /// Smoothness constant after adaptive doubling, for linesearch runs.
    pub l_final: Option<f64>,
    /// Linesearch parameters `(α, σ)`, for linesearch runs.
    pub ls_params: Option<(f64, f64)>,
}

impl SolverTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn accepted_steps(&self) -> usize {
        self.records.iter().filter(|r| r.accepted).count()
    }

    pub fn f0(&self) -> f64 {
        self.records.first().map_or(self.final_f, |r| r.f)
    }

    pub fn best_f(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.f)
            .fold(self.final_f, f64::min)
    }

    /// Smallest stationarity measure over all visited iterates.
    pub fn min_stationarity(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.stationarity)
            .fold(self.final_stationarity, f64::min)
    }

    /// Errors `‖x^k − x⋆‖` over all visited iterates (including the final one).
    pub fn errors_to(&self, xstar: &DVector<f64>) -> Vec<f64> {
        let mut out: Vec<f64> = self.records.iter().map(|r| (&r.x - xstar).norm()).collect();
        out.push((&self.final_x - xstar).norm());
        out
    }
}

/// Per-point measurements shared by all drivers.
pub(crate) struct PointEval {
    pub f: f64,
    pub grad: DVector<f64>,
    pub grad_norm: f64,
    pub precond_grad_norm: f64,
    pub stationarity: f64,
}

pub(crate) fn eval_point<O, R>(obj: &O, rf: &R, x: &DVector<f64>) -> PointEval
where
    O: Objective + ?Sized,
    R: Reference + ?Sized,
{
    let f = obj.value(x);
    let grad = obj.gradient(x);
    let grad_norm = grad.norm();
    if !f.is_finite() || !grad_norm.is_finite() {
        // preconditioning an overflowed gradient is meaningless; the caller's
        // divergence guard fires on these markers
        return PointEval {
            f,
            grad_norm,
            precond_grad_norm: f64::INFINITY,
            stationarity: f64::INFINITY,
            grad,
        };
    }
    let g = rf.dual_grad(&grad);
    PointEval {
        f,
        grad_norm,
        precond_grad_norm: g.norm(),
        stationarity: rf.stationarity(&grad),
        grad,
    }
}

pub(crate) fn measure_value(ev: &PointEval, measure: StopMeasure) -> f64 {
    match measure {
        StopMeasure::PrecondGradNorm => ev.precond_grad_norm,
        StopMeasure::GradNorm => ev.grad_norm,
        StopMeasure::Stationarity => ev.stationarity,
    }
}

pub(crate) const OVERFLOW_GUARD: f64 = 1e300;

pub(crate) fn diverged(x: &DVector<f64>, ev: &PointEval) -> bool {
    !ev.f.is_finite()
        || !ev.grad_norm.is_finite()
        || ev.f.abs() > OVERFLOW_GUARD
        || x.iter().any(|v| !v.is_finite() || v.abs() > OVERFLOW_GUARD)
}

/// Relative step-length floor under which a step is treated as converged
/// rather than fed into vanishing-denominator ratios.
pub(crate) fn step_vanished(step_norm: f64, x: &DVector<f64>) -> bool {
    step_norm < 1e-14 * (1.0 + x.norm())
}
