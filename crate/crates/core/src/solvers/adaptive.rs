//! Adaptive regularized preconditioned Newton iteration: the weight `σ_k` is
//! adjusted from the ratio of achieved to model decrease
//! `ρ_k = (f(x^k) − f(x^k+s^k)) / ((L̃/4)σ_k‖s^k‖³)`, steps are accepted when
//! `ρ_k ≥ η₁`, and inexact subproblem solutions are admissible as long as
//! their preconditioned residual satisfies `‖z‖ ≤ ½θ‖s‖²`.

use nalgebra::DVector;

use crate::problems::Objective;
use crate::reference::Reference;
use crate::subproblem::{accept_inexact, solve_exact, solve_truncated};

use super::{
    diverged, eval_point, measure_value, step_vanished, IterationRecord, SolverError, SolverTrace,
    StoppingCriteria, TerminationReason,
};

/// How subproblem solutions are produced when an inexactness budget is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InexactMode {
    /// Always solve exactly (`z = 0`), which is admissible for every `θ`.
    Exact,
    /// Try dropping up to `max_drop` smallest eigen-components of the
    /// right-hand side; fall back to the exact solve when the truncation
    /// violates the admissibility bound.
    TruncateSmallest { max_drop: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct AdaptiveConfig {
    pub sigma0: f64,
    pub sigma_min: f64,
    /// Inexactness budget `θ ≥ 0`.
    pub theta: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub tol_lambda: f64,
    pub inexact: InexactMode,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            sigma0: 1.0,
            sigma_min: 1e-8,
            theta: 0.0,
            eta1: 0.1,
            eta2: 0.9,
            gamma1: 0.5,
            gamma2: 2.0,
            gamma3: 10.0,
            tol_lambda: 1e-10,
            inexact: InexactMode::Exact,
        }
    }
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let ok = self.sigma0 > 0.0
            && self.sigma_min > 0.0
            && self.sigma_min <= self.sigma0
            && self.theta >= 0.0
            && 0.0 < self.eta1
            && self.eta1 <= self.eta2
            && self.eta2 < 1.0
            && 0.0 < self.gamma1
            && self.gamma1 < 1.0
            && 1.0 < self.gamma2
            && self.gamma2 < self.gamma3;
        if ok {
            Ok(())
        } else {
            Err(SolverError::InvalidConfig(
                "need 0 < sigma_min <= sigma0, theta >= 0, 0 < eta1 <= eta2 < 1, \
                 0 < gamma1 < 1 < gamma2 < gamma3"
                    .into(),
            ))
        }
    }
}

pub fn run_adaptive<O, R>(
    obj: &O,
    rf: &R,
    cfg: &AdaptiveConfig,
    x0: &DVector<f64>,
    stop: &StoppingCriteria,
) -> Result<SolverTrace, SolverError>
where
    O: Objective + ?Sized,
    R: Reference + ?Sized,
{
    cfg.validate()?;
    if !rf.is_isotropic() {
        return Err(SolverError::RequiresIsotropic);
    }
    let ltilde = rf.ltilde();
    let mut sigma = cfg.sigma0;
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
        let sol = match cfg.inexact {
            InexactMode::Exact => solve_exact(&a, &m, &g, sigma, cfg.tol_lambda)?,
            InexactMode::TruncateSmallest { max_drop } => {
                let mut chosen = None;
                for drop in (1..=max_drop.min(g.len().saturating_sub(1))).rev() {
                    let cand = solve_truncated(&a, &m, &g, sigma, cfg.tol_lambda, drop)?;
                    if accept_inexact(&cand, cfg.theta) {
                        chosen = Some(cand);
                        break;
                    }
                }
                match chosen {
                    Some(c) => c,
                    None => solve_exact(&a, &m, &g, sigma, cfg.tol_lambda)?,
                }
            }
        };

        let step_norm = sol.s.norm();
        if step_vanished(step_norm, &x) {
            reason = TerminationReason::ConvergedStepSize;
            break;
        }
        let f_trial = obj.value(&(&x + &sol.s));
        let rho = (ev.f - f_trial) / (0.25 * ltilde * sigma * step_norm.powi(3));
        let accepted = rho >= cfg.eta1;

        records.push(IterationRecord {
            k: records.len(),
            x: x.clone(),
            f: ev.f,
            grad_norm: ev.grad_norm,
            precond_grad_norm: ev.precond_grad_norm,
            stationarity: ev.stationarity,
            step_norm,
            tau: None,
            sigma: Some(sigma),
            lambda: Some(sol.lambda),
            rho: Some(rho),
            accepted,
            matvecs: 0,
            l_doublings: 0,
        });

        if accepted {
            x += &sol.s;
        }
        // lower endpoints of the admissible update intervals: shrink on very
        // successful steps, hold on successful ones, grow on rejections
        sigma = if rho >= cfg.eta2 {
            (cfg.gamma1 * sigma).max(cfg.sigma_min)
        } else if rho >= cfg.eta1 {
            sigma
        } else {
            cfg.gamma2 * sigma
        };
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
