//! Invariant driver behind the `validate` command: a fixed battery of
//! numerical checks across the kernels, the built-in problems, the linear
//! algebra and the subproblem solver, reported as machine-readable lines.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use pnewton_core::linalg::{cg_solve, gen_sym_eig, gmres_solve, solve_dense};
use pnewton_core::problems::{
    parse_libsvm, serialize_libsvm, Objective, Poly1D, QuadraticProblem, SymMatFactProblem,
};
use pnewton_core::reference::{
    KernelKind, Reference, ReferenceFunction, ScalarKernel, Structure,
};
use pnewton_core::subproblem::solve_exact;
use pnewton_core::validation::fd_check;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Deliberate corruptions for exercising the validator itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Fault {
    /// Bias the analytic side of the kernel-curvature cross-check.
    KernelHess,
    /// Bias analytic gradients in the finite-difference checks.
    GradBias,
}

struct Ctx {
    rng: ChaCha8Rng,
    fault: Option<Fault>,
}

impl Ctx {
    fn randn(&mut self, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| StandardNormal.sample(&mut self.rng))
    }
}

const ALL_PROBLEMS: &[&str] = &["poly1d", "quadratic", "logistic", "matfact"];

/// Run the battery, restricted to the named problem families (all by default).
pub fn run_validation(
    problems: &[String],
    fault: Option<Fault>,
    data_dir: &std::path::Path,
) -> Result<Vec<CheckResult>, String> {
    let selected: Vec<&str> = if problems.is_empty() {
        ALL_PROBLEMS.to_vec()
    } else {
        let sel: Vec<&str> = ALL_PROBLEMS
            .iter()
            .copied()
            .filter(|p| problems.iter().any(|q| q == p))
            .collect();
        if sel.is_empty() {
            return Err(format!(
                "no known problem families in {problems:?}; expected from {ALL_PROBLEMS:?}"
            ));
        }
        sel
    };

    let mut ctx = Ctx {
        rng: ChaCha8Rng::seed_from_u64(20_24),
        fault,
    };
    let mut out = Vec::new();

    kernel_checks(&mut ctx, &mut out);
    linalg_checks(&mut ctx, &mut out);
    subproblem_checks(&mut ctx, &mut out);

    for family in selected {
        problem_checks(&mut ctx, family, data_dir, &mut out);
    }
    Ok(out)
}

fn push(out: &mut Vec<CheckResult>, name: &str, pass: bool, detail: String) {
    out.push(CheckResult {
        name: name.to_string(),
        pass,
        detail,
    });
}

fn all_kernels() -> [KernelKind; 4] {
    [
        KernelKind::Quadratic,
        KernelKind::Cosh,
        KernelKind::ExpAbs,
        KernelKind::LogBarrier,
    ]
}

fn kernel_checks(ctx: &mut Ctx, out: &mut Vec<CheckResult>) {
    // conjugate gradient inverts the kernel derivative
    let mut worst = 0.0f64;
    for kind in all_kernels() {
        for scale in [1.0, 0.5, 3.0] {
            let k = ScalarKernel::new(kind, scale).unwrap();
            let ts: &[f64] = if kind == KernelKind::LogBarrier {
                &[1e-6, 0.2, 0.7, 0.99]
            } else {
                &[1e-6, 0.2, 2.0, 20.0]
            };
            for &t in ts {
                let back = k.conj_grad(k.deriv(t).unwrap()).unwrap();
                worst = worst.max(((back - t) / t).abs());
            }
        }
    }
    push(out, "reference.conjugate-inverts-derivative", worst <= 1e-10, format!("worst relative error {worst:.2e}"));

    // numerical curvature of the conjugate against the closed form
    let mut worst = 0.0f64;
    for kind in all_kernels() {
        let k = ScalarKernel::new(kind, 1.3).unwrap();
        for y in [0.05, 0.7, 3.0, 40.0] {
            let h = 1e-6 * (1.0 + y);
            let fd = (k.conj_grad(y + h).unwrap() - k.conj_grad(y - h).unwrap()) / (2.0 * h);
            let mut analytic = k.conj_hess(y).unwrap();
            if ctx.fault == Some(Fault::KernelHess) {
                analytic *= 1.001;
            }
            worst = worst.max(((analytic - fd) / fd).abs());
        }
    }
    push(out, "reference.conjugate-curvature-numeric", worst <= 1e-6, format!("worst relative error {worst:.2e}"));

    // preconditioner times the differenced curvature of the dual map
    let mut worst = 0.0f64;
    for kind in all_kernels() {
        for structure in [Structure::Isotropic, Structure::Separable] {
            let rf = ReferenceFunction::new(ScalarKernel::unit(kind), structure, 3);
            for _ in 0..5 {
                let y = ctx.randn(3);
                let n = 3;
                let h = 1e-6 * (1.0 + y.norm());
                let mut num = DMatrix::zeros(n, n);
                for j in 0..n {
                    let mut yp = y.clone();
                    let mut ym = y.clone();
                    yp[j] += h;
                    ym[j] -= h;
                    num.set_column(j, &((rf.dual_grad(&yp) - rf.dual_grad(&ym)) / (2.0 * h)));
                }
                let prod = rf.precond_matrix(&y) * num;
                worst = worst.max((prod - DMatrix::identity(n, n)).norm());
            }
        }
    }
    push(out, "reference.precond-inverts-numeric-curvature", worst <= 1e-5, format!("worst deviation from identity {worst:.2e}"));

    // stationarity identity for the hyperbolic-cosine kernel
    let rf = ReferenceFunction::isotropic(ScalarKernel::unit(KernelKind::Cosh), 2);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let y = ctx.randn(2) * 10f64.powf(ctx.rng.random_range(-4.0..4.0));
        let r = y.norm();
        let reference = if r > 1e8 {
            r.hypot(1.0) - 1.0
        } else {
            r * r / (r.hypot(1.0) + 1.0)
        };
        worst = worst.max((rf.stationarity(&y) - reference).abs());
    }
    push(out, "reference.cosh-stationarity-identity", worst <= 1e-10, format!("worst gap {worst:.2e}"));

    // step factor at least one, gradient ratio at least the scale
    let mut ok = true;
    for kind in [KernelKind::Cosh, KernelKind::ExpAbs, KernelKind::LogBarrier] {
        for scale in [1.0, 2.0] {
            let k = ScalarKernel::new(kind, scale).unwrap();
            for i in 0..=120 {
                let y = 10f64.powf(-12.0 + 0.2 * i as f64);
                ok &= k.step_factor(y).unwrap() >= 1.0;
                ok &= k.grad_ratio(y).unwrap() >= scale;
            }
        }
    }
    push(out, "reference.step-factor-and-ratio-bounds", ok, "log grid 1e-12..1e12".into());
}

fn linalg_checks(ctx: &mut Ctx, out: &mut Vec<CheckResult>) {
    let mut worst = 0.0f64;
    let mut all_ok = true;
    for trial in 0..40 {
        let n = 2 + trial % 10;
        let raw = DMatrix::from_fn(n, n, |_, _| ctx.rng.random_range(-1.0..1.0));
        let a = &raw + DMatrix::identity(n, n) * 3.0;
        let b = ctx.randn(n);
        match solve_dense(&a, &b, false) {
            Some(x) => {
                let r = (&a * &x - &b).norm() / (a.norm() * x.norm() + b.norm());
                worst = worst.max(r);
            }
            None => all_ok = false,
        }
        let spd = &raw * raw.transpose() + DMatrix::identity(n, n);
        let mut apply = |v: &DVector<f64>| &spd * v;
        let res = cg_solve(&mut apply, &b, 1e-10, 40 * n);
        all_ok &= res.converged && (&spd * &res.x - &b).norm() <= 1.1e-10 * b.norm();
        let mut apply = |v: &DVector<f64>| &a * v;
        let res = gmres_solve(&mut apply, &b, 1e-10, 50, 40 * n);
        all_ok &= res.converged && (&a * &res.x - &b).norm() <= 1.1e-10 * b.norm();
    }
    push(out, "linalg.solver-residual-contracts", all_ok && worst <= 1e-10, format!("worst direct residual {worst:.2e}"));

    // pencil shift definiteness boundary
    let mut ok = true;
    for _ in 0..10 {
        let n = 4;
        let raw = DMatrix::from_fn(n, n, |_, _| ctx.rng.random_range(-1.0..1.0));
        let a = (&raw + raw.transpose()) * 0.5;
        let spd_raw = DMatrix::from_fn(n, n, |_, _| ctx.rng.random_range(-1.0..1.0));
        let m = &spd_raw * spd_raw.transpose() + DMatrix::identity(n, n) * 0.5;
        let ge = gen_sym_eig(&a, &m).unwrap();
        let xi1 = ge.xi[0];
        for dl in [-1e-3, 1e-3, 0.5] {
            let lambda = -xi1 + dl;
            let min_eig = ((&a + &m * lambda) as DMatrix<f64>)
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .fold(f64::INFINITY, |acc, &e| acc.min(e));
            let tol = 1e-8 * (a.norm() + lambda.abs() * m.norm());
            if dl > 0.0 {
                ok &= min_eig >= -tol;
            } else {
                ok &= min_eig < 0.0;
            }
        }
    }
    push(out, "linalg.pencil-definiteness-boundary", ok, "shift scan around the bottom eigenvalue".into());
}

fn subproblem_checks(ctx: &mut Ctx, out: &mut Vec<CheckResult>) {
    let mut ok = true;
    let mut worst = 0.0f64;
    for trial in 0..60 {
        let n = 2 + trial % 8;
        let raw = DMatrix::from_fn(n, n, |_, _| ctx.rng.random_range(-1.0..1.0));
        let a = (&raw + raw.transpose()) * 0.5;
        let spd_raw = DMatrix::from_fn(n, n, |_, _| ctx.rng.random_range(-1.0..1.0));
        let m = &spd_raw * spd_raw.transpose() + DMatrix::identity(n, n) * 0.5;
        let mut g = ctx.randn(n);
        if g.norm() < 1e-6 {
            g[0] = 1.0;
        }
        let sigma = 10f64.powf(ctx.rng.random_range(-2.0..2.0));
        match solve_exact(&a, &m, &g, sigma, 1e-12) {
            Ok(sol) => {
                let resid = ((&a + &m * sol.lambda) * &sol.s + &m * &g).norm()
                    / ((a.norm() + sol.lambda * m.norm()) * (1.0 + sol.s.norm()));
                worst = worst.max(resid);
                ok &= resid <= 1e-8;
                ok &= (sol.lambda - sigma * sol.s.norm()).abs() <= 1e-10 * (1.0 + sol.lambda);
                ok &= sol.psd_margin >= -sol.psd_tol;
            }
            Err(_) => ok = false,
        }
    }
    push(out, "subproblem.defining-conditions", ok, format!("worst scaled residual {worst:.2e}"));
}

fn problem_checks(
    ctx: &mut Ctx,
    family: &str,
    data_dir: &std::path::Path,
    out: &mut Vec<CheckResult>,
) {
    let probs: Vec<(String, Box<dyn Objective>)> = match family {
        "poly1d" => [2usize, 4, 8, 16]
            .iter()
            .map(|&p| {
                (
                    format!("poly1d p={p}"),
                    Box::new(Poly1D::power_family(p)) as Box<dyn Objective>,
                )
            })
            .collect(),
        "quadratic" => vec![
            ("quadratic n=5".into(), Box::new(QuadraticProblem::random(5, 100.0, 1)) as _),
        ],
        "logistic" => {
            let path = data_dir.join("tiny1.libsvm");
            match std::fs::read_to_string(&path) {
                Ok(text) => {
                    let prob = parse_libsvm(text.as_bytes()).expect("bundled file parses");
                    // format round trip while the file is at hand
                    let back = parse_libsvm(serialize_libsvm(&prob).as_bytes()).unwrap();
                    push(
                        out,
                        "problems.libsvm-round-trip",
                        back == prob,
                        format!("{} samples", prob.n_samples()),
                    );
                    vec![("logistic tiny1".into(), Box::new(prob) as _)]
                }
                Err(e) => {
                    push(out, "problems.logistic-data", false, format!("{path:?}: {e}"));
                    vec![]
                }
            }
        }
        "matfact" => {
            // spectrum property across the condition-number grid
            let mut ok = true;
            for cond in [1.0, 1e2, 1e4, 1e6, 1e8] {
                let p = SymMatFactProblem::generate(10, 5, cond, 77).unwrap();
                let mut ev: Vec<f64> = p
                    .data()
                    .clone()
                    .symmetric_eigen()
                    .eigenvalues
                    .iter()
                    .copied()
                    .collect();
                ev.sort_by(|x, y| y.total_cmp(x));
                let ratio = ev[0] / ev[4];
                ok &= (ratio / cond - 1.0).abs() <= 1e-6;
                ok &= ev[5..].iter().all(|&e| e.abs() <= 1e-10);
            }
            push(out, "problems.matfact-spectrum", ok, "cond grid 1..1e8".into());
            vec![(
                "matfact 6x3".into(),
                Box::new(SymMatFactProblem::generate(6, 3, 100.0, 3).unwrap()) as _,
            )]
        }
        _ => vec![],
    };

    let mut worst_grad = 0.0f64;
    let mut worst_hess = 0.0f64;
    for (_, prob) in &probs {
        for _ in 0..5 {
            let x = ctx.randn(prob.dim());
            let step = 1e-5 * (1.0 + x.norm());
            let mut rep = fd_check(prob.as_ref(), &x, step);
            if ctx.fault == Some(Fault::GradBias) {
                rep.grad_relerr += 1e-3;
            }
            worst_grad = worst_grad.max(rep.grad_relerr);
            worst_hess = worst_hess.max(rep.hess_relerr);
        }
    }
    if !probs.is_empty() {
        push(
            out,
            &format!("problems.{family}.fd-derivatives"),
            worst_grad <= 1e-5 && worst_hess <= 1e-4,
            format!("grad {worst_grad:.2e} (≤1e-5), hess {worst_hess:.2e} (≤1e-4)"),
        );
    }
}
