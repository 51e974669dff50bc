//! Linesearch globalization of the preconditioned Newton iteration.
//!
//! Preconditioned Newton directions need not be descent directions, so a plain
//! Armijo search along `d` cannot work. Instead each candidate
//! `x(τ) = x + τd + (1−τ)p` interpolates between the Newton-type direction `d`
//! and the preconditioned gradient step `p = −γ∇φ*(∇f)`; as `τ → 0` the
//! candidate approaches `x + p`, which decreases `f` by at least
//! `γ·φ(∇φ*(∇f))` under the smoothness model. The accepted decrease is
//! `f(x(τ)) − f(x) ≤ −γσφ(∇φ*(∇f))` for the largest `τ ∈ {2^{−i}}`.
//!
//! The smoothness constant can be estimated on the fly: whenever the pure
//! gradient candidate fails its model decrease, `L` is doubled, the stepsize
//! `γ = α/L` is recomputed and the iteration restarts. This can only happen
//! finitely often when the model holds for some finite `L`.

use nalgebra::DVector;

use crate::problems::Objective;
use crate::reference::Reference;

use super::pn::pn_direction;
use super::{
    diverged, eval_point, measure_value, IterationRecord, LinearSolverStrategy, SolverError,
    SolverTrace, StoppingCriteria, TerminationReason,
};

#[derive(Debug, Clone, Copy)]
pub struct GlobalizedConfig {
    /// Initial smoothness-constant estimate; `γ = alpha/L`.
    pub l0: f64,
    /// Stepsize fraction in (0, 1).
    pub alpha: f64,
    /// Sufficient-decrease fraction in (0, 1).
    pub sigma_ls: f64,
    /// Double `L` whenever the gradient candidate violates its model decrease.
    pub adaptive_l: bool,
    pub max_backtracks: usize,
    pub max_l_doublings: usize,
    pub strategy: LinearSolverStrategy,
}

impl Default for GlobalizedConfig {
    fn default() -> Self {
        Self {
            l0: 1.0,
            alpha: 0.5,
            sigma_ls: 0.1,
            adaptive_l: true,
            max_backtracks: 60,
            max_l_doublings: 60,
            strategy: LinearSolverStrategy::Auto,
        }
    }
}

impl GlobalizedConfig {
    fn validate(&self) -> Result<(), SolverError> {
        if !(self.l0 > 0.0 && self.l0.is_finite()) {
            return Err(SolverError::InvalidConfig(format!("l0 must be positive, got {}", self.l0)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(SolverError::InvalidConfig(format!(
                "alpha must lie in (0,1), got {}",
                self.alpha
            )));
        }
        if !(self.sigma_ls > 0.0 && self.sigma_ls < 1.0) {
            return Err(SolverError::InvalidConfig(format!(
                "sigma_ls must lie in (0,1), got {}",
                self.sigma_ls
            )));
        }
        Ok(())
    }
}

pub fn run_globalized<O, R>(
    obj: &O,
    rf: &R,
    cfg: &GlobalizedConfig,
    x0: &DVector<f64>,
    stop: &StoppingCriteria,
) -> Result<SolverTrace, SolverError>
where
    O: Objective + ?Sized,
    R: Reference + ?Sized,
{
    cfg.validate()?;
    let mut l = cfg.l0;
    let mut x = x0.clone();
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut total_matvecs = 0;
    let reason;

    'outer: loop {
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

        let g = rf.dual_grad(&ev.grad);
        let phi_g = ev.stationarity;
        let mut gamma = cfg.alpha / l;
        let mut doublings = 0;

        // model-decrease check on the pure gradient candidate; doubling L
        // shrinks γ until the candidate conforms
        if cfg.adaptive_l {
            loop {
                let f_p = obj.value(&(&x - &g * gamma));
                if f_p - ev.f <= -gamma * phi_g {
                    break;
                }
                if doublings >= cfg.max_l_doublings {
                    reason = TerminationReason::LinesearchFailed {
                        iteration: records.len(),
                        detail: format!(
                            "smoothness constant doubling exhausted at L = {l:.3e} \
                             (f = {:.6e}, measure = {:.3e})",
                            ev.f, phi_g
                        ),
                    };
                    break 'outer;
                }
                l *= 2.0;
                gamma = cfg.alpha / l;
                doublings += 1;
            }
        }

        let p = &g * (-gamma);
        let dir = pn_direction(obj, rf, &x, &ev.grad, cfg.strategy);
        total_matvecs += dir.matvecs;
        let fell_back = dir.d.is_none();
        let d = dir.d.unwrap_or_else(|| p.clone());

        let mut tau = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let cand = &x + &d * tau + &p * (1.0 - tau);
            let f_cand = obj.value(&cand);
            if f_cand - ev.f <= -gamma * cfg.sigma_ls * phi_g {
                accepted = Some((cand, tau));
                break;
            }
            if fell_back {
                // d == p makes every τ the same candidate
                break;
            }
            tau *= 0.5;
        }
        let Some((x_next, tau)) = accepted else {
            reason = TerminationReason::LinesearchFailed {
                iteration: records.len(),
                detail: format!(
                    "backtracking exhausted after {} halvings at L = {l:.3e}",
                    cfg.max_backtracks
                ),
            };
            break;
        };

        records.push(IterationRecord {
            k: records.len(),
            x: x.clone(),
            f: ev.f,
            grad_norm: ev.grad_norm,
            precond_grad_norm: ev.precond_grad_norm,
            stationarity: ev.stationarity,
            step_norm: (&x_next - &x).norm(),
            tau: Some(tau),
            sigma: None,
            lambda: None,
            rho: None,
            accepted: true,
            matvecs: dir.matvecs,
            l_doublings: doublings,
        });
        x = x_next;
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
        total_matvecs,
        l_final: Some(l),
        ls_params: Some((cfg.alpha, cfg.sigma_ls)),
    })
}

/// Left- and right-hand side of the sublinear rate bound
/// `min_k φ(g^k) ≤ L·(f(x⁰) − f_best)/(ασ(K+1))` for a linesearch trace.
/// Returns `None` for traces not produced by the globalized driver.
pub fn min_stationarity_bound(trace: &SolverTrace) -> Option<(f64, f64)> {
    let l = trace.l_final?;
    let (alpha, sigma) = trace.ls_params?;
    let k = trace.iterations();
    let lhs = trace.min_stationarity();
    let rhs = l * (trace.f0() - trace.best_f()) / (alpha * sigma * (k as f64 + 1.0));
    Some((lhs, rhs))
}
