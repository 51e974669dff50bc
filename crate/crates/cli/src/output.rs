//! Run artifacts: timestamped run directories, the per-iteration `trace.csv`
//! and the flat `meta.json` echo of configuration, environment and outcome.
//!
//! CSV conventions: comma separation, `\n` line endings, floats in shortest
//! round-trip decimal, `nan`/`inf`/`-inf` for non-finite values, empty cells
//! for fields a record does not carry.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pnewton_core::solvers::{SolverTrace, TerminationReason};

use crate::config::RunConfig;

/// Shortest round-trip decimal with lowercase non-finite spellings.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{x}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub const TRACE_COLUMNS: &str =
    "k,f,grad_norm,precond_grad_norm,stationarity,step_norm,tau,sigma,lambda,rho,accepted,matvecs,l_doublings";

/// Render the whole trace as CSV; the last row carries the final iterate with
/// empty step fields.
pub fn trace_csv(trace: &SolverTrace) -> String {
    let mut out = String::new();
    out.push_str(TRACE_COLUMNS);
    out.push('\n');
    for r in &trace.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.k,
            fmt_f64(r.f),
            fmt_f64(r.grad_norm),
            fmt_f64(r.precond_grad_norm),
            fmt_f64(r.stationarity),
            fmt_f64(r.step_norm),
            fmt_opt(r.tau),
            fmt_opt(r.sigma),
            fmt_opt(r.lambda),
            fmt_opt(r.rho),
            r.accepted,
            r.matvecs,
            r.l_doublings
        );
    }
    let _ = writeln!(
        out,
        "{},{},{},{},{},,,,,,,,",
        trace.records.len(),
        fmt_f64(trace.final_f),
        fmt_f64(trace.final_grad_norm),
        fmt_f64(trace.final_precond_grad_norm),
        fmt_f64(trace.final_stationarity),
    );
    out
}

pub fn trace_has_nan(trace: &SolverTrace) -> bool {
    let rec_nan = trace.records.iter().any(|r| {
        r.f.is_nan()
            || r.grad_norm.is_nan()
            || r.precond_grad_norm.is_nan()
            || r.stationarity.is_nan()
            || r.step_norm.is_nan()
    });
    rec_nan || trace.final_f.is_nan() || trace.final_grad_norm.is_nan()
}

pub fn outcome_name(reason: &TerminationReason) -> &'static str {
    match reason {
        TerminationReason::Converged => "converged",
        TerminationReason::ConvergedStepSize => "converged-step-size",
        TerminationReason::BudgetExhausted => "budget-exhausted",
        TerminationReason::Diverged => "diverged",
        TerminationReason::SingularSystem => "singular-system",
        TerminationReason::LinesearchFailed { .. } => "linesearch-failed",
    }
}

pub fn exit_code(reason: &TerminationReason) -> i32 {
    match reason {
        TerminationReason::Converged | TerminationReason::ConvergedStepSize => 0,
        TerminationReason::BudgetExhausted => 2,
        _ => 3,
    }
}

/// Flat key/value JSON: config echo, environment, outcome summary.
pub fn meta_json(cfg: &RunConfig, resolved_scale: f64, trace: &SolverTrace) -> String {
    let mut m = serde_json::Map::new();
    let mut put = |k: &str, v: serde_json::Value| {
        m.insert(k.to_string(), v);
    };
    put("seed", cfg.seed.into());
    put("problem_kind", cfg.problem.kind_name().into());
    match &cfg.problem {
        crate::config::ProblemSpec::Poly1d { p, coeffs } => {
            if let Some(p) = p {
                put("problem_p", (*p).into());
            }
            if let Some(c) = coeffs {
                put("problem_degree", (c.len() - 1).into());
            }
        }
        crate::config::ProblemSpec::Quadratic { n, cond } => {
            put("problem_n", (*n).into());
            put("problem_cond", (*cond).into());
        }
        crate::config::ProblemSpec::Logistic { path, l2 } => {
            put("problem_path", path.display().to_string().into());
            put("problem_l2", (*l2).into());
        }
        crate::config::ProblemSpec::Matfact { n, r, cond } => {
            put("problem_n", (*n).into());
            put("problem_r", (*r).into());
            put("problem_cond", (*cond).into());
        }
    }
    put("init_mode", format!("{:?}", cfg.init.mode).to_lowercase().into());
    put("init_scale", cfg.init.scale.into());
    put("kernel", cfg.reference.kernel.as_str().into());
    put(
        "structure",
        match cfg.reference.structure {
            crate::config::StructureName::Isotropic => "isotropic",
            crate::config::StructureName::Separable => "separable",
        }
        .into(),
    );
    put("scale_resolved", resolved_scale.into());
    put("algo", cfg.algorithm.name.as_str().into());
    put("eps", cfg.stopping.eps.into());
    put("measure", cfg.stopping.measure.as_str().into());
    put("max_iters", cfg.stopping.max_iters.into());
    put("outcome", outcome_name(&trace.reason).into());
    put("iterations", trace.iterations().into());
    put("accepted_steps", trace.accepted_steps().into());
    put("f_final", trace.final_f.into());
    put("grad_norm_final", trace.final_grad_norm.into());
    put("precond_grad_norm_final", trace.final_precond_grad_norm.into());
    put("matvecs_total", trace.total_matvecs.into());
    if let Some(l) = trace.l_final {
        put("l_final", l.into());
    }
    put("nan_in_trace", trace_has_nan(trace).into());
    put("platform", format!("{}-{}", std::env::consts::OS, std::env::consts::ARCH).into());
    put("version", env!("CARGO_PKG_VERSION").into());
    serde_json::to_string_pretty(&serde_json::Value::Object(m)).expect("static structure")
}

/// Create `<out>/<timestamp>-<algo>-<problem>[ -N ]`.
pub fn make_run_dir(cfg: &RunConfig) -> std::io::Result<PathBuf> {
    let stamp = chrono::Utc::now().format("%Y%m%d-%H%M%S");
    let base = format!(
        "{stamp}-{}-{}",
        cfg.algorithm.name.as_str(),
        cfg.problem.kind_name()
    );
    let mut dir = cfg.out.join(&base);
    let mut n = 1;
    while dir.exists() {
        n += 1;
        dir = cfg.out.join(format!("{base}-{n}"));
    }
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

pub fn write_run_artifacts(
    dir: &Path,
    cfg: &RunConfig,
    resolved_scale: f64,
    trace: &SolverTrace,
) -> std::io::Result<()> {
    std::fs::write(dir.join("trace.csv"), trace_csv(trace))?;
    std::fs::write(dir.join("meta.json"), meta_json(cfg, resolved_scale, trace))?;
    Ok(())
}
