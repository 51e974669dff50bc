//! Benchmark drivers: the polynomial grid, the logistic-regression iteration
//! comparison and the matrix-factorization matvec comparison. All grids are
//! seeded and run serially, so their CSV output is byte-reproducible.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use pnewton_core::problems::{parse_libsvm, Objective, Poly1D, SymMatFactProblem};
use pnewton_core::reference::{KernelKind, ReferenceFunction, ScalarKernel};
use pnewton_core::solvers::{
    run_globalized, run_newton, run_pn, GlobalizedConfig, LinearSolverStrategy, SolverTrace,
    StopMeasure, StoppingCriteria,
};

use crate::config::{KernelName, ScaleSpec};
use crate::output::fmt_f64;
use crate::runner::RunError;

/// Method selector for the polynomial grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolyMethod {
    Newton,
    Pn(KernelName),
    Globalized(KernelName),
}

impl PolyMethod {
    pub fn label(&self) -> String {
        match self {
            PolyMethod::Newton => "newton".into(),
            PolyMethod::Pn(k) => format!("pn-{}", k.as_str()),
            PolyMethod::Globalized(k) => format!("globalized-{}", k.as_str()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PolyCell {
    pub p: usize,
    pub x0: f64,
    pub method: String,
    pub iterations: usize,
    pub converged: bool,
}

/// Iterations to drive `|f'| ≤ eps` on `f = x^p/p + x²/2` for each grid cell.
pub fn poly1d_grid(
    ps: &[usize],
    x0s: &[f64],
    methods: &[PolyMethod],
    scale: ScaleSpec,
    eps: f64,
    max_iters: usize,
) -> Vec<PolyCell> {
    let stop = StoppingCriteria::new(eps, StopMeasure::GradNorm, max_iters);
    let mut rows = Vec::new();
    for &p in ps {
        let poly = Poly1D::power_family(p);
        for &x0 in x0s {
            let start = DVector::from_element(1, x0);
            for method in methods {
                let trace = match method {
                    PolyMethod::Newton => run_newton(&poly, &start, &stop),
                    PolyMethod::Pn(k) | PolyMethod::Globalized(k) => {
                        let s = match scale {
                            ScaleSpec::Fixed(v) => v,
                            ScaleSpec::Auto(_) => poly.gradient(&start).norm().max(1e-12),
                        };
                        let rf = ReferenceFunction::isotropic(
                            ScalarKernel::new(k.to_kind(), s).unwrap(),
                            1,
                        );
                        if matches!(method, PolyMethod::Pn(_)) {
                            run_pn(&poly, &rf, &start, &stop)
                        } else {
                            run_globalized(&poly, &rf, &GlobalizedConfig::default(), &start, &stop)
                                .expect("valid default config")
                        }
                    }
                };
                rows.push(PolyCell {
                    p,
                    x0,
                    method: method.label(),
                    iterations: trace.iterations(),
                    converged: trace.reason.converged(),
                });
            }
        }
    }
    rows
}

pub fn poly1d_csv(rows: &[PolyCell]) -> String {
    let mut out = String::from("p,x0,method,iterations,converged\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.p,
            fmt_f64(r.x0),
            r.method,
            r.iterations,
            r.converged
        ));
    }
    out
}

#[derive(Debug, Clone)]
pub struct LogregRow {
    pub dataset: String,
    pub method: String,
    pub iterations: usize,
    pub success: bool,
}

/// Iteration comparison on logistic-regression files: zero initialization,
/// success means the gradient norm drops below `1e-6` within 100 iterations.
/// Kernel scales follow the initial-gradient-norm heuristic.
pub fn logreg_bench(
    paths: &[std::path::PathBuf],
    kernels: &[KernelName],
    l2: f64,
) -> Result<Vec<LogregRow>, RunError> {
    let stop = StoppingCriteria::new(1e-6, StopMeasure::GradNorm, 100);
    let mut rows = Vec::new();
    for path in paths {
        let dataset = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let text =
            std::fs::read_to_string(path).map_err(|e| RunError::DataIo(path.clone(), e))?;
        let prob = parse_libsvm(text.as_bytes())?.with_l2(l2);
        let n = prob.dim();
        let zero = DVector::zeros(n);
        let g0 = prob.gradient(&zero).norm().max(1e-12);

        let newton = run_newton(&prob, &zero, &stop);
        rows.push(LogregRow {
            dataset: dataset.clone(),
            method: "newton".into(),
            iterations: newton.iterations(),
            success: newton.reason.converged(),
        });
        for k in kernels {
            let rf =
                ReferenceFunction::isotropic(ScalarKernel::new(k.to_kind(), g0).unwrap(), n);
            let trace = run_pn(&prob, &rf, &zero, &stop);
            rows.push(LogregRow {
                dataset: dataset.clone(),
                method: format!("pn-{}", k.as_str()),
                iterations: trace.iterations(),
                success: trace.reason.converged(),
            });
        }
    }
    Ok(rows)
}

pub fn logreg_csv(rows: &[LogregRow]) -> String {
    let mut out = String::from("dataset,method,iterations,success\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.dataset, r.method, r.iterations, r.success
        ));
    }
    out
}

#[derive(Debug, Clone)]
pub struct MatfactRow {
    pub cond: f64,
    pub method: String,
    pub median_matvecs: f64,
    pub converged_runs: usize,
    pub repeats: usize,
}

/// Inner solver for the preconditioned rows of the factorization benchmark:
/// conjugate gradients on the Hessian-sided symmetric form (the default for
/// isotropic references — same Hessian as the vanilla rows, different
/// right-hand side), or GMRES on the raw asymmetric system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum PnSolver {
    #[default]
    Cg,
    Gmres,
}

/// Matrix-factorization comparison: globalized vanilla Newton always solves
/// its systems with conjugate gradients; the fast-growth preconditioned rows
/// use `pn_solver`. The reported cost is the median number of Hessian
/// products per run.
#[allow(clippy::too_many_arguments)]
pub fn matfact_bench(
    conds: &[f64],
    x0_scale: f64,
    repeats: usize,
    seed: u64,
    n: usize,
    r: usize,
    kernels: &[KernelName],
    pn_solver: PnSolver,
) -> Result<Vec<MatfactRow>, RunError> {
    let dim = n * r;
    let stop = StoppingCriteria::new(1e-6, StopMeasure::GradNorm, 500);
    // inexact inner solves: loose relative tolerance, stagnation budget capped
    let cg = LinearSolverStrategy::Cg {
        tol: 1e-4,
        maxit: 20 * dim,
    };
    let gmres = LinearSolverStrategy::Gmres {
        tol: 1e-4,
        restart: 50,
        maxit: 2 * dim + 4,
    };
    let pn_strategy = match pn_solver {
        PnSolver::Cg => cg,
        PnSolver::Gmres => gmres,
    };
    let mut rows = Vec::new();
    for (ci, &cond) in conds.iter().enumerate() {
        // one problem/start pair per repeat, shared across methods
        let mut instances = Vec::with_capacity(repeats);
        for rep in 0..repeats {
            let inst_seed = seed
                .wrapping_add(0x1000 * ci as u64)
                .wrapping_add(rep as u64);
            let prob = SymMatFactProblem::generate(n, r, cond, inst_seed)?;
            let mut rng = ChaCha8Rng::seed_from_u64(inst_seed ^ 0x5eed);
            let x0 = DVector::from_fn(dim, |_, _| {
                let v: f64 = StandardNormal.sample(&mut rng);
                v * x0_scale
            });
            instances.push((prob, x0));
        }

        let run_method = |label: String,
                              kernel: KernelKind,
                              strategy: LinearSolverStrategy|
         -> MatfactRow {
            let mut matvecs = Vec::with_capacity(repeats);
            let mut converged = 0;
            for (prob, x0) in &instances {
                let rf = ReferenceFunction::isotropic(ScalarKernel::unit(kernel), dim);
                let cfg = GlobalizedConfig {
                    strategy,
                    ..Default::default()
                };
                let trace: SolverTrace =
                    run_globalized(prob, &rf, &cfg, x0, &stop).expect("valid config");
                if trace.reason.converged() {
                    converged += 1;
                }
                matvecs.push(trace.total_matvecs as f64);
            }
            matvecs.sort_by(f64::total_cmp);
            let median = if repeats % 2 == 1 {
                matvecs[repeats / 2]
            } else {
                0.5 * (matvecs[repeats / 2 - 1] + matvecs[repeats / 2])
            };
            MatfactRow {
                cond,
                method: label,
                median_matvecs: median,
                converged_runs: converged,
                repeats,
            }
        };

        rows.push(run_method("newton".into(), KernelKind::Quadratic, cg));
        for k in kernels {
            rows.push(run_method(format!("pn-{}", k.as_str()), k.to_kind(), pn_strategy));
        }
    }
    Ok(rows)
}

pub fn matfact_csv(rows: &[MatfactRow]) -> String {
    let mut out = String::from("cond,method,median_matvecs,converged_runs,repeats\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(r.cond),
            r.method,
            fmt_f64(r.median_matvecs),
            r.converged_runs,
            r.repeats
        ));
    }
    out
}
