//! Pure preconditioned Newton iteration and the preconditioned gradient
//! baseline.
//!
//! The Newton-type system `∇²φ*(∇f) ∇²f d = −∇φ*(∇f)` is solved on its
//! Hessian-sided form `∇²f d = −M(∇f)·∇φ*(∇f)` whenever a symmetric solver is
//! in play (same Hessian as a vanilla Newton step, different right-hand
//! side); the raw asymmetric operator is kept for the GMRES path.

use nalgebra::DVector;

use crate::linalg::{cg_solve, gmres_solve, solve_dense};
use crate::problems::Objective;
use crate::reference::{KernelKind, Reference, ReferenceFunction, ScalarKernel};

use super::{
    diverged, eval_point, measure_value, IterationRecord, LinearSolverStrategy, SolverTrace,
    StoppingCriteria, TerminationReason,
};

/// One preconditioned gradient step `x − γ∇φ*(∇f(x))`.
pub fn pg_step<O, R>(obj: &O, rf: &R, x: &DVector<f64>, gamma: f64) -> DVector<f64>
where
    O: Objective + ?Sized,
    R: Reference + ?Sized,
{
    assert!(gamma > 0.0, "stepsize must be positive");
    x - rf.dual_grad(&obj.gradient(x)) * gamma
}

/// Preconditioned gradient descent with fixed stepsize.
pub fn run_pg<O, R>(
    obj: &O,
    rf: &R,
    gamma: f64,
    x0: &DVector<f64>,
    stop: &StoppingCriteria,
) -> SolverTrace
where
    O: Objective + ?Sized,
    R: Reference + ?Sized,
{
    assert!(gamma > 0.0, "stepsize must be positive");
    run_simple(obj, rf, x0, stop, |_, ev| {
        Some((rf.dual_grad(&ev.grad) * (-gamma), 0))
    })
}

/// Direction solve outcome; `d = None` is the singular signal that drives
/// linesearch fallbacks.
#[derive(Debug, Clone)]
pub struct PnDirection {
    pub d: Option<DVector<f64>>,
    pub matvecs: usize,
}

/// Solve the preconditioned Newton system at `x` with gradient `y = ∇f(x)`.
pub fn pn_direction<O, R>(
    obj: &O,
    rf: &R,
    x: &DVector<f64>,
    y: &DVector<f64>,
    strategy: LinearSolverStrategy,
) -> PnDirection
where
    O: Objective + ?Sized,
    R: Reference + ?Sized,
{
    let strategy = match strategy {
        LinearSolverStrategy::Auto => {
            if obj.has_dense_hessian() {
                LinearSolverStrategy::Direct
            } else {
                LinearSolverStrategy::Cg {
                    tol: 1e-10,
                    maxit: 10 * obj.dim(),
                }
            }
        }
        other => other,
    };
    match strategy {
        LinearSolverStrategy::Direct => {
            let rhs = rf.newton_rhs(y);
            let hess = obj.hessian(x);
            PnDirection {
                d: solve_dense(&hess, &rhs, true),
                matvecs: 0,
            }
        }
        LinearSolverStrategy::Cg { tol, maxit } => {
            let rhs = rf.newton_rhs(y);
            let mut apply = |v: &DVector<f64>| obj.hess_vec(x, v);
            let res = cg_solve(&mut apply, &rhs, tol, maxit);
            PnDirection {
                d: if res.converged { Some(res.x) } else { None },
                matvecs: res.matvecs,
            }
        }
        LinearSolverStrategy::Gmres { tol, restart, maxit } => {
            let rhs = -rf.dual_grad(y);
            let mut apply = |v: &DVector<f64>| rf.dual_hess_apply(y, &obj.hess_vec(x, v));
            let res = gmres_solve(&mut apply, &rhs, tol, restart, maxit);
            PnDirection {
                d: if res.converged { Some(res.x) } else { None },
                matvecs: res.matvecs,
            }
        }
        LinearSolverStrategy::Auto => unreachable!(),
    }
}

/// Pure preconditioned Newton iteration with a dense/auto linear solver.
pub fn run_pn<O, R>(obj: &O, rf: &R, x0: &DVector<f64>, stop: &StoppingCriteria) -> SolverTrace
where
    O: Objective + ?Sized,
    R: Reference + ?Sized,
{
    run_pn_with(obj, rf, x0, stop, LinearSolverStrategy::Auto)
}

/// Pure preconditioned Newton iteration with an explicit linear solver choice.
pub fn run_pn_with<O, R>(
    obj: &O,
    rf: &R,
    x0: &DVector<f64>,
    stop: &StoppingCriteria,
    strategy: LinearSolverStrategy,
) -> SolverTrace
where
    O: Objective + ?Sized,
    R: Reference + ?Sized,
{
    run_simple(obj, rf, x0, stop, |x, ev| {
        let dir = pn_direction(obj, rf, x, &ev.grad, strategy);
        dir.d.map(|d| (d, dir.matvecs))
    })
}

/// Vanilla Newton, realized as the quadratic-kernel special case.
pub fn run_newton<O>(obj: &O, x0: &DVector<f64>, stop: &StoppingCriteria) -> SolverTrace
where
    O: Objective + ?Sized,
{
    let rf = ReferenceFunction::isotropic(ScalarKernel::unit(KernelKind::Quadratic), obj.dim());
    run_pn(obj, &rf, x0, stop)
}

/// Shared driver for fixed-step iterations: `step` returns the displacement
/// and its matvec cost, or `None` on a singular system.
fn run_simple<O, R, F>(
    obj: &O,
    rf: &R,
    x0: &DVector<f64>,
    stop: &StoppingCriteria,
    mut step: F,
) -> SolverTrace
where
    O: Objective + ?Sized,
    R: Reference + ?Sized,
    F: FnMut(&DVector<f64>, &super::PointEval) -> Option<(DVector<f64>, usize)>,
{
    let mut x = x0.clone();
    let mut records = Vec::new();
    let mut total_matvecs = 0;
    let reason;
    loop {
        let ev = eval_point(obj, rf, &x);
        if diverged(&x, &ev) {
            reason = TerminationReason::Diverged;
            break;
        }
        if measure_value(&ev, stop.measure) <= stop.epsilon {
            reason = TerminationReason::Converged;
            break;
        }
        if records.len() >= stop.max_iters {
            reason = TerminationReason::BudgetExhausted;
            break;
        }
        let Some((d, matvecs)) = step(&x, &ev) else {
            reason = TerminationReason::SingularSystem;
            break;
        };
        total_matvecs += matvecs;
        records.push(IterationRecord {
            k: records.len(),
            x: x.clone(),
            f: ev.f,
            grad_norm: ev.grad_norm,
            precond_grad_norm: ev.precond_grad_norm,
            stationarity: ev.stationarity,
            step_norm: d.norm(),
            tau: None,
            sigma: None,
            lambda: None,
            rho: None,
            accepted: true,
            matvecs,
            l_doublings: 0,
        });
        x += d;
    }
    let ev = eval_point(obj, rf, &x);
    SolverTrace {
        records,
        final_f: ev.f,
        final_grad_norm: ev.grad_norm,
        final_precond_grad_norm: ev.precond_grad_norm,
        final_stationarity: ev.stationarity,
        final_x: x,
        reason,
        total_matvecs,
        l_final: None,
        ls_params: None,
    }
}
