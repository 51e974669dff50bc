//! Regularized preconditioned Newton iteration with exact subproblem solves:
//! each step solves `(∇²f(x) + λM)s = −M·∇φ*(∇f(x))` with `λ = σ‖s‖` and
//! `∇²f(x) + λM ⪰ 0`, where `M = [∇²φ*(∇f(x))]⁻¹`.

use nalgebra::DVector;

use crate::problems::Objective;
use crate::reference::Reference;
use crate::subproblem::solve_exact;

use super::{
    diverged, eval_point, measure_value, step_vanished, IterationRecord, SolverError, SolverTrace,
    StoppingCriteria, TerminationReason,
};

#[derive(Debug, Clone, Copy)]
pub struct RegularizedConfig {
    /// Regularization weight; the decrease guarantee needs it at or above the
    /// Lipschitz constant of the preconditioned Hessian.
    pub sigma: f64,
    pub tol_lambda: f64,
}

impl RegularizedConfig {
    pub fn new(sigma: f64) -> Self {
        Self {
            sigma,
            tol_lambda: 1e-10,
        }
    }
}

pub fn run_regularized<O, R>(
    obj: &O,
    rf: &R,
    cfg: &RegularizedConfig,
    x0: &DVector<f64>,
    stop: &StoppingCriteria,
) -> Result<SolverTrace, SolverError>
where
    O: Objective + ?Sized,
    R: Reference + ?Sized,
{
    if !(cfg.sigma > 0.0 && cfg.sigma.is_finite()) {
        return Err(SolverError::InvalidConfig(format!(
            "sigma must be positive, got {}",
            cfg.sigma
        )));
    }
    if !rf.is_isotropic() {
        return Err(SolverError::RequiresIsotropic);
    }
    let mut x = x0.clone();
    let mut records = Vec::new();
    let reason;
    loop {
        let ev = eval_point(obj, rf, &x);
        if diverged(&x, &ev) {
            reason = TerminationReason::Diverged;
            break;
        }
        if measure_value(&ev, stop.measure) <= stop.epsilon || ev.grad_norm == 0.0 {
            reason = TerminationReason::Converged;
            break;
        }
        if records.len() >= stop.max_iters {
            reason = TerminationReason::BudgetExhausted;
            break;
        }
        let g = rf.dual_grad(&ev.grad);
        let a = obj.hessian(&x);
        let m = rf.precond_matrix(&ev.grad);
        let sol = solve_exact(&a, &m, &g, cfg.sigma, cfg.tol_lambda)?;
        let vanished = step_vanished(sol.s.norm(), &x);
        records.push(IterationRecord {
            k: records.len(),
            x: x.clone(),
            f: ev.f,
            grad_norm: ev.grad_norm,
            precond_grad_norm: ev.precond_grad_norm,
            stationarity: ev.stationarity,
            step_norm: sol.s.norm(),
            tau: None,
            sigma: Some(cfg.sigma),
            lambda: Some(sol.lambda),
            rho: None,
            accepted: true,
            matvecs: 0,
            l_doublings: 0,
        });
        x += &sol.s;
        if vanished {
            reason = TerminationReason::ConvergedStepSize;
            break;
        }
    }
    let ev = eval_point(obj, rf, &x);
    Ok(SolverTrace {
        records,
        final_f: ev.f,
        final_grad_norm: ev.grad_norm,
        final_precond_grad_norm: ev.precond_grad_norm,
        final_stationarity: ev.stationarity,
        final_x: x,
        reason,
        total_matvecs: 0,
        l_final: None,
        ls_params: None,
    })
}
