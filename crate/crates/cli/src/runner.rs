//! Turn a [`RunConfig`] into a solver run: problem construction, seeded
//! initialization, reference resolution (including the auto scale rule) and
//! dispatch to the solver drivers.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use pnewton_core::problems::{
    parse_libsvm, LibsvmError, Objective, Poly1D, ProblemError, QuadraticProblem,
    SymMatFactProblem,
};
use pnewton_core::reference::{ReferenceFunction, ScalarKernel};
use pnewton_core::solvers::{
    run_adaptive, run_globalized, run_pg, run_pn_with, run_regularized, AdaptiveConfig,
    GlobalizedConfig, LinearSolverStrategy, RegularizedConfig, SolverError, SolverTrace,
    StoppingCriteria,
};

use crate::config::{AlgoName, InitMode, LinsolveName, ProblemSpec, RunConfig, ScaleSpec};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Data(#[from] LibsvmError),
    #[error("failed to read dataset {0}: {1}")]
    DataIo(std::path::PathBuf, std::io::Error),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("invalid run: {0}")]
    Invalid(String),
}

pub struct PreparedRun {
    pub problem: Box<dyn Objective>,
    pub x0: DVector<f64>,
    pub reference: ReferenceFunction,
    /// Scale actually used after resolving `auto`.
    pub resolved_scale: f64,
    pub stop: StoppingCriteria,
}

pub fn build_problem(spec: &ProblemSpec, seed: u64) -> Result<Box<dyn Objective>, RunError> {
    Ok(match spec {
        ProblemSpec::Poly1d { p, coeffs } => match (p, coeffs) {
            (Some(p), _) => Box::new(Poly1D::power_family(*p)),
            (None, Some(c)) => Box::new(Poly1D::new(c.clone())),
            (None, None) => return Err(RunError::Invalid("poly1d needs p or coeffs".into())),
        },
        ProblemSpec::Quadratic { n, cond } => Box::new(QuadraticProblem::random(*n, *cond, seed)),
        ProblemSpec::Logistic { path, l2 } => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| RunError::DataIo(path.clone(), e))?;
            Box::new(parse_libsvm(text.as_bytes())?.with_l2(*l2))
        }
        ProblemSpec::Matfact { n, r, cond } => {
            Box::new(SymMatFactProblem::generate(*n, *r, *cond, seed)?)
        }
    })
}

pub fn prepare(cfg: &RunConfig) -> Result<PreparedRun, RunError> {
    let problem = build_problem(&cfg.problem, cfg.seed)?;
    let dim = problem.dim();

    let x0 = match cfg.init.mode {
        InitMode::Zeros => DVector::zeros(dim),
        InitMode::Randn => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9);
            DVector::from_fn(dim, |_, _| {
                let v: f64 = StandardNormal.sample(&mut rng);
                v * cfg.init.scale
            })
        }
        InitMode::Value => {
            let v = cfg.init.value.clone().ok_or_else(|| {
                RunError::Invalid("init mode 'value' needs an init.value vector".into())
            })?;
            if v.len() != dim {
                return Err(RunError::Invalid(format!(
                    "init.value has length {}, problem dimension is {dim}",
                    v.len()
                )));
            }
            DVector::from_vec(v)
        }
    };

    let resolved_scale = match cfg.reference.scale {
        ScaleSpec::Fixed(s) => {
            if !(s > 0.0 && s.is_finite()) {
                return Err(RunError::Invalid(format!("kernel scale must be positive, got {s}")));
            }
            s
        }
        // heuristic: match the kernel scale to the initial gradient magnitude
        ScaleSpec::Auto(_) => {
            let g0 = problem.gradient(&x0).norm();
            if g0 > 0.0 {
                g0
            } else {
                1.0
            }
        }
    };
    let kernel = ScalarKernel::new(cfg.reference.kernel.to_kind(), resolved_scale)
        .map_err(|e| RunError::Invalid(e.to_string()))?;
    let reference =
        ReferenceFunction::new(kernel, cfg.reference.structure.to_structure(), dim);

    let stop = StoppingCriteria::new(
        cfg.stopping.eps,
        cfg.stopping.measure.to_measure(),
        cfg.stopping.max_iters,
    );

    Ok(PreparedRun {
        problem,
        x0,
        reference,
        resolved_scale,
        stop,
    })
}

pub fn strategy_from(cfg: &RunConfig, dim: usize) -> LinearSolverStrategy {
    match cfg.algorithm.linsolve {
        LinsolveName::Direct => LinearSolverStrategy::Direct,
        LinsolveName::Cg => LinearSolverStrategy::Cg {
            tol: cfg.algorithm.krylov_tol,
            maxit: 20 * dim.max(10),
        },
        LinsolveName::Gmres => LinearSolverStrategy::Gmres {
            tol: cfg.algorithm.krylov_tol,
            restart: cfg.algorithm.gmres_restart,
            maxit: 20 * dim.max(10),
        },
        LinsolveName::Auto => LinearSolverStrategy::Auto,
    }
}

pub fn execute(cfg: &RunConfig) -> Result<(PreparedRun, SolverTrace), RunError> {
    let run = prepare(cfg)?;
    let strategy = strategy_from(cfg, run.problem.dim());
    let a = &cfg.algorithm;
    let trace = match a.name {
        AlgoName::Pg => run_pg(run.problem.as_ref(), &run.reference, a.gamma, &run.x0, &run.stop),
        AlgoName::Newton | AlgoName::Pn => {
            let rf = if a.name == AlgoName::Newton {
                ReferenceFunction::isotropic(
                    ScalarKernel::unit(pnewton_core::reference::KernelKind::Quadratic),
                    run.problem.dim(),
                )
            } else {
                run.reference.clone()
            };
            run_pn_with(run.problem.as_ref(), &rf, &run.x0, &run.stop, strategy)
        }
        AlgoName::Globalized => {
            let gcfg = GlobalizedConfig {
                l0: a.l0,
                alpha: a.alpha,
                sigma_ls: a.sigma_ls,
                adaptive_l: a.adaptive_l,
                max_backtracks: a.max_backtracks,
                max_l_doublings: a.max_l_doublings,
                strategy,
            };
            run_globalized(run.problem.as_ref(), &run.reference, &gcfg, &run.x0, &run.stop)?
        }
        AlgoName::Regularized => {
            let rcfg = RegularizedConfig::new(a.sigma);
            run_regularized(run.problem.as_ref(), &run.reference, &rcfg, &run.x0, &run.stop)?
        }
        AlgoName::Adaptive => {
            let acfg = AdaptiveConfig {
                sigma0: a.sigma0,
                sigma_min: a.sigma_min,
                theta: a.theta,
                eta1: a.eta1,
                eta2: a.eta2,
                gamma1: a.gamma1,
                gamma2: a.gamma2,
                gamma3: a.gamma3,
                ..Default::default()
            };
            run_adaptive(run.problem.as_ref(), &run.reference, &acfg, &run.x0, &run.stop)?
        }
    };
    Ok((run, trace))
}
