//! Regularization subproblem: find `(s, λ)` with
//!
//! ```text
//!   (A + λM) s = −M g,     λ = σ‖s‖,     A + λM ⪰ 0,
//! ```
//!
//! for a symmetric `A`, SPD metric `M`, nonzero right-hand side `g` and
//! regularization weight `σ > 0`. The solution is built from the generalized
//! eigendecomposition of the pencil `(A, M)`: writing `s(λ)` in the
//! eigenbasis, the secular function `Ψ(λ) = ‖s(λ)‖² − λ²/σ²` has a root on
//! `(λ_s, ∞)` with `λ_s = max(−ξ₁, 0)`, except in the hard case where the
//! right-hand side is M-orthogonal to the bottom eigenspace and a multiple of
//! the bottom eigenvector is mixed in at `λ = λ_s` instead.
//!
//! The root search runs in the shifted variable `t = λ − λ_s` so that the
//! boundary layer next to `λ_s` keeps full precision; no monotonicity of `Ψ`
//! is assumed, only the sign change guaranteed by its boundary limits.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{gen_sym_eig, GenEig, LinalgError};

#[derive(Debug, Error)]
pub enum SubproblemError {
    #[error("right-hand side must be nonzero; detect stationarity before solving")]
    ZeroGradient,
    #[error("regularization weight must be positive, got {0}")]
    BadSigma(f64),
    #[error("secular function evaluation needs lambda > {lambda_s}, got {lambda}")]
    LambdaOutOfDomain { lambda: f64, lambda_s: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("secular root bracketing failed: {0}")]
    Bracketing(String),
}

/// Pencil decomposition of `(A, M)` with the right-hand side expressed in the
/// generalized eigenbasis.
#[derive(Debug, Clone)]
pub struct PencilData {
    pub decomp: GenEig,
    /// Components `gVᵢ = vᵢᵀ M g` (equals `V⁻¹ g`).
    pub g_v: DVector<f64>,
    /// Gram matrix `Gᵢⱼ = vᵢᵀvⱼ`; SPD because the eigenvectors are independent.
    pub gram: DMatrix<f64>,
    /// `λ_s = max(−ξ₁, 0)`, the lower edge of admissible weights.
    pub lambda_s: f64,
    /// Indices of the bottom eigenvalue (ties within `1e-10·max(1,|ξ₁|)`).
    pub hard_indices: Vec<usize>,
}

/// Solution triple with inexactness residual and definiteness diagnostics.
#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub s: DVector<f64>,
    pub lambda: f64,
    /// Residual of the preconditioned system `M⁻¹(A+λM)s = −g + z`; zero for
    /// exact solves.
    pub z: DVector<f64>,
    pub hard_case: bool,
    /// Smallest eigenvalue of `A + λM`.
    pub psd_margin: f64,
    /// Tolerance floor used for the definiteness check, `1e-8·(‖A‖+λ‖M‖)`.
    pub psd_tol: f64,
    /// Residual `‖(A+λM)s + Mg − Mz‖` of the unpreconditioned system.
    pub eq_residual: f64,
    /// Weight the solve was performed with.
    pub sigma: f64,
    /// Tolerance used for the `λ = σ‖s‖` condition.
    pub tol_lambda: f64,
}

pub fn build_pencil(
    a: &DMatrix<f64>,
    m: &DMatrix<f64>,
    g: &DVector<f64>,
) -> Result<PencilData, SubproblemError> {
    if g.norm() == 0.0 {
        return Err(SubproblemError::ZeroGradient);
    }
    let decomp = gen_sym_eig(a, m)?;
    let g_v = decomp.v.transpose() * (m * g);
    let gram = decomp.v.transpose() * &decomp.v;
    let xi1 = decomp.xi[0];
    let lambda_s = (-xi1).max(0.0);
    let tie = 1e-10 * xi1.abs().max(1.0);
    let hard_indices = (0..decomp.xi.len())
        .filter(|&i| decomp.xi[i] <= xi1 + tie)
        .collect();
    Ok(PencilData {
        decomp,
        g_v,
        gram,
        lambda_s,
        hard_indices,
    })
}

/// Secular function `Ψ(λ) = ‖s(λ)‖² − λ²/σ²` on `(λ_s, ∞)`.
pub fn psi_eval(pd: &PencilData, lambda: f64, sigma: f64) -> Result<f64, SubproblemError> {
    if sigma <= 0.0 {
        return Err(SubproblemError::BadSigma(sigma));
    }
    if lambda <= pd.lambda_s {
        return Err(SubproblemError::LambdaOutOfDomain {
            lambda,
            lambda_s: pd.lambda_s,
        });
    }
    let t = lambda / sigma;
    let sn = step_norm(pd, &pd.g_v, lambda - pd.lambda_s);
    Ok(sn * sn - t * t)
}

const HARD_REL: f64 = 1e-10;

/// `‖s(λ_s + t)‖` in the Gram form, with the spectrum pre-shifted so the
/// boundary layer `t → 0` does not cancel.
fn step_norm(pd: &PencilData, g_v: &DVector<f64>, t: f64) -> f64 {
    let c = step_coefficients(pd, g_v, t);
    if c.iter().any(|x| !x.is_finite()) {
        return f64::INFINITY;
    }
    c.dot(&(&pd.gram * &c)).max(0.0).sqrt()
}

fn step_coefficients(pd: &PencilData, g_v: &DVector<f64>, t: f64) -> DVector<f64> {
    DVector::from_fn(g_v.len(), |i, _| {
        if g_v[i] == 0.0 {
            0.0
        } else {
            let delta = (pd.decomp.xi[i] + pd.lambda_s).max(0.0);
            g_v[i] / (delta + t)
        }
    })
}

/// Exact solve. An interior secular root is located whenever one exists;
/// otherwise the bottom eigenspace carries no right-hand side mass and the
/// boundary solution is completed with a multiple of `v₁` whose magnitude is
/// fixed by `‖s‖ = λ_s/σ` (smaller-magnitude root, ties broken positive).
pub fn solve_exact(
    a: &DMatrix<f64>,
    m: &DMatrix<f64>,
    g: &DVector<f64>,
    sigma: f64,
    tol_lambda: f64,
) -> Result<SubproblemSolution, SubproblemError> {
    if sigma <= 0.0 {
        return Err(SubproblemError::BadSigma(sigma));
    }
    let pd = build_pencil(a, m, g)?;
    solve_from_pencil(a, m, g, &pd, pd.g_v.clone(), sigma, tol_lambda)
}

/// Inexact solve used to exercise admissibility checks: the eigen-expansion of
/// the right-hand side is truncated by dropping the `drop_count` components of
/// smallest magnitude (at least one is always kept), which yields the
/// preconditioned residual `z = Σ_dropped gVᵢ vᵢ` independently of `λ`.
pub fn solve_truncated(
    a: &DMatrix<f64>,
    m: &DMatrix<f64>,
    g: &DVector<f64>,
    sigma: f64,
    tol_lambda: f64,
    drop_count: usize,
) -> Result<SubproblemSolution, SubproblemError> {
    if sigma <= 0.0 {
        return Err(SubproblemError::BadSigma(sigma));
    }
    let pd = build_pencil(a, m, g)?;
    let n = g.len();
    let keep = n.saturating_sub(drop_count).max(1);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| pd.g_v[i].abs().total_cmp(&pd.g_v[j].abs()));
    let mut g_v = pd.g_v.clone();
    let mut z = DVector::zeros(n);
    for &i in order.iter().take(n - keep) {
        z += pd.decomp.v.column(i) * g_v[i];
        g_v[i] = 0.0;
    }
    let mut sol = solve_from_pencil(a, m, g, &pd, g_v, sigma, tol_lambda)?;
    sol.eq_residual = ((a + m * sol.lambda) * &sol.s + m * g - m * &z).norm();
    sol.z = z;
    Ok(sol)
}

fn solve_from_pencil(
    a: &DMatrix<f64>,
    m: &DMatrix<f64>,
    g: &DVector<f64>,
    pd: &PencilData,
    g_v: DVector<f64>,
    sigma: f64,
    tol_lambda: f64,
) -> Result<SubproblemSolution, SubproblemError> {
    let lambda_s = pd.lambda_s;
    let n = g.len();
    let gv_norm = g_v.norm();

    let bottom_clean = pd
        .hard_indices
        .iter()
        .all(|&i| g_v[i].abs() <= HARD_REL * gv_norm);
    let mut g_eff = g_v;
    if bottom_clean && lambda_s > 0.0 {
        for &i in &pd.hard_indices {
            g_eff[i] = 0.0;
        }
    }

    let secular = |t: f64| sigma * step_norm(pd, &g_eff, t) - (lambda_s + t);

    let mut hard_case = false;
    let (lambda, s);

    let boundary_hard = bottom_clean && lambda_s > 0.0 && secular(0.0) <= 0.0;
    if boundary_hard {
        hard_case = true;
        lambda = lambda_s;
        s = hard_case_step(pd, &g_eff, sigma);
    } else {
        // Bracket σ‖s(λ_s+t)‖ − (λ_s+t): positive near the boundary, negative
        // for large t.
        let mut t_hi = lambda_s.max(1.0);
        let mut guard = 0;
        while secular(t_hi) >= 0.0 {
            t_hi *= 2.0;
            guard += 1;
            if guard > 2000 || !t_hi.is_finite() {
                return Err(SubproblemError::Bracketing(format!(
                    "no sign change up to lambda = {:e}",
                    lambda_s + t_hi
                )));
            }
        }
        let mut t_lo = t_hi;
        let mut found_positive = false;
        while t_lo > 1e-300 {
            t_lo *= 0.125;
            if secular(t_lo) > 0.0 {
                found_positive = true;
                break;
            }
            t_hi = t_lo;
        }
        if !found_positive {
            // the (tiny but nonzero) bottom mass cannot lift the step norm in
            // representable arithmetic: numerically a hard case
            if lambda_s > 0.0 {
                for &i in &pd.hard_indices {
                    g_eff[i] = 0.0;
                }
                hard_case = true;
                lambda = lambda_s;
                s = hard_case_step(pd, &g_eff, sigma);
            } else {
                // λ_s = 0 and σ‖s(t)‖ < t all the way down: the unregularized
                // step is interior and vanishing regularization is exact
                lambda = 0.0 + 1e-300;
                let c = step_coefficients(pd, &g_eff, lambda);
                s = -(&pd.decomp.v * c);
            }
        } else {
            let t_root = bisect_secular(&secular, t_lo, t_hi, lambda_s, tol_lambda);
            lambda = lambda_s + t_root;
            let c = step_coefficients(pd, &g_eff, t_root);
            s = -(&pd.decomp.v * c);
        }
    }

    let shifted = a + m * lambda;
    let psd_margin = ((&shifted + shifted.transpose()) * 0.5)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |acc, &e| acc.min(e));
    let psd_tol = 1e-8 * (a.norm() + lambda * m.norm());
    let eq_residual = (&shifted * &s + m * g).norm();

    Ok(SubproblemSolution {
        s,
        lambda,
        z: DVector::zeros(n),
        hard_case,
        psd_margin,
        psd_tol,
        eq_residual,
        sigma,
        tol_lambda,
    })
}

/// Boundary solution `s_s + α v₁` with `‖s‖ = λ_s/σ`; `α` is the
/// smaller-magnitude root of the norm equation, ties broken positive.
fn hard_case_step(pd: &PencilData, g_eff: &DVector<f64>, sigma: f64) -> DVector<f64> {
    let c = step_coefficients(pd, g_eff, 0.0);
    let s_s = -(&pd.decomp.v * c);
    let v1 = pd.decomp.v.column(0).into_owned();
    let target = pd.lambda_s / sigma;
    let qa = v1.norm_squared();
    let qb = 2.0 * s_s.dot(&v1);
    let qc = s_s.norm_squared() - target * target;
    let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
    let alpha = if qb == 0.0 {
        ((-qc).max(0.0) / qa).sqrt()
    } else {
        // roots are qq/qa and qc/qq; qc ≤ 0 makes qc/qq the smaller one
        let qq = -0.5 * (qb + qb.signum() * disc);
        qc / qq
    };
    s_s + v1 * alpha
}

/// Safeguarded secant/bisection on a bracketed sign change of
/// `f(t) = σ‖s(λ_s+t)‖ − (λ_s+t)`, geometric steps while the bracket spans
/// decades. Terminates on `|f| ≤ tol·(1+λ)`.
fn bisect_secular(
    f: &dyn Fn(f64) -> f64,
    mut t_lo: f64,
    mut t_hi: f64,
    lambda_s: f64,
    tol: f64,
) -> f64 {
    let mut f_lo = f(t_lo);
    let mut f_hi = f(t_hi);
    debug_assert!(f_lo > 0.0 && f_hi < 0.0);
    let mut best = 0.5 * (t_lo + t_hi);
    for _ in 0..300 {
        let spread = t_hi / t_lo.max(1e-300);
        let mut cand = if !f_lo.is_finite() || !f_hi.is_finite() || spread > 10.0 {
            (t_lo * t_hi).sqrt()
        } else {
            t_lo - f_lo * (t_hi - t_lo) / (f_hi - f_lo)
        };
        if !(cand > t_lo && cand < t_hi) || !cand.is_finite() {
            cand = 0.5 * (t_lo + t_hi);
        }
        let f_cand = f(cand);
        best = cand;
        if f_cand.abs() <= tol * (1.0 + lambda_s + cand) {
            return cand;
        }
        if f_cand > 0.0 {
            t_lo = cand;
            f_lo = f_cand;
        } else {
            t_hi = cand;
            f_hi = f_cand;
        }
        if t_hi - t_lo <= f64::EPSILON * (lambda_s + t_hi) {
            return 0.5 * (t_lo + t_hi);
        }
    }
    best
}

/// Admissibility of an inexact solution for inexactness budget `θ`:
/// `‖z‖ ≤ ½θ‖s‖²`, positive semidefiniteness within tolerance, and
/// `λ = σ‖s‖` within tolerance.
pub fn accept_inexact(sol: &SubproblemSolution, theta: f64) -> bool {
    let z_ok = sol.z.norm() <= 0.5 * theta * sol.s.norm_squared();
    let psd_ok = sol.psd_margin >= -sol.psd_tol;
    let lambda_ok =
        (sol.lambda - sol.sigma * sol.s.norm()).abs() <= sol.tol_lambda * (1.0 + sol.lambda);
    z_ok && psd_ok && lambda_ok
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn diag2(a: f64, b: f64) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(vec![a, b]))
    }

    fn id2() -> DMatrix<f64> {
        DMatrix::identity(2, 2)
    }

    #[test]
    fn pencil_on_diagonal_problems() {
        let pd = build_pencil(&diag2(1.0, 2.0), &id2(), &DVector::from_vec(vec![1.0, 1.0])).unwrap();
        assert_relative_eq!(pd.decomp.xi[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(pd.decomp.xi[1], 2.0, max_relative = 1e-12);
        assert_eq!(pd.lambda_s, 0.0);
        assert_relative_eq!(pd.g_v.amax(), 1.0, max_relative = 1e-12);
        assert!((&pd.gram - DMatrix::<f64>::identity(2, 2)).norm() <= 1e-12);

        let pd = build_pencil(&diag2(-1.0, 1.0), &id2(), &DVector::from_vec(vec![0.0, 1.0])).unwrap();
        assert_relative_eq!(pd.lambda_s, 1.0, max_relative = 1e-12);
        assert_eq!(pd.hard_indices, vec![0]);
        assert_abs_diff_eq!(pd.g_v[0], 0.0, epsilon = 1e-14);

        // positive pencil: lambda_s = 0
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let a = &m * 2.0;
        let pd = build_pencil(&a, &m, &DVector::from_vec(vec![0.5, -0.5])).unwrap();
        assert_eq!(pd.lambda_s, 0.0);
        assert_relative_eq!(pd.decomp.xi[0], 2.0, max_relative = 1e-10);
    }

    #[test]
    fn pencil_rejects_zero_rhs() {
        let err = build_pencil(&id2(), &id2(), &DVector::zeros(2)).unwrap_err();
        assert!(matches!(err, SubproblemError::ZeroGradient));
    }

    #[test]
    fn psi_scalar_cases() {
        let pd = build_pencil(&id2(), &id2(), &DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert_relative_eq!(psi_eval(&pd, 1.0, 1.0).unwrap(), -0.75, max_relative = 1e-12);
        // Psi(0+) -> 1
        assert_relative_eq!(psi_eval(&pd, 1e-9, 1.0).unwrap(), 1.0, max_relative = 1e-6);
        assert!(psi_eval(&pd, 0.0, 1.0).is_err());
        assert!(psi_eval(&pd, 1.0, 0.0).is_err());

        // in the hard-case pencil only the clean component contributes
        let pd = build_pencil(&diag2(-1.0, 1.0), &id2(), &DVector::from_vec(vec![0.0, 1.0])).unwrap();
        let near = psi_eval(&pd, 1.0 + 1e-9, 1.0).unwrap();
        assert_relative_eq!(near, 0.25 - 1.0, max_relative = 1e-6);
    }

    #[test]
    fn exact_scalar_root() {
        let sol = solve_exact(&id2(), &id2(), &DVector::from_vec(vec![1.0, 0.0]), 1.0, 1e-12)
            .unwrap();
        let golden = 0.6180339887498949; // positive root of λ² + λ = 1
        assert_relative_eq!(sol.lambda, golden, max_relative = 1e-10);
        assert_relative_eq!(sol.s[0], -golden, max_relative = 1e-10);
        assert_abs_diff_eq!(sol.s[1], 0.0, epsilon = 1e-14);
        assert!(!sol.hard_case);
        assert!(accept_inexact(&sol, 0.0));
    }

    #[test]
    fn exact_hard_case() {
        let sol = solve_exact(
            &diag2(-1.0, 1.0),
            &id2(),
            &DVector::from_vec(vec![0.0, 1.0]),
            1.0,
            1e-12,
        )
        .unwrap();
        assert!(sol.hard_case);
        assert_relative_eq!(sol.lambda, 1.0, max_relative = 1e-12);
        assert_relative_eq!(sol.s.norm(), 1.0, max_relative = 1e-10);
        // ties broken toward the positive eigenvector multiple
        assert_relative_eq!(sol.s[0], 0.8660254037844386, max_relative = 1e-10);
        assert_relative_eq!(sol.s[1], -0.5, max_relative = 1e-10);
        assert!(sol.psd_margin >= -sol.psd_tol);
    }

    #[test]
    fn near_hard_case_keeps_contract() {
        // bottom mass far below the step scale but above the cleanup level
        for mass in [1e-9, 1e-6, 1e-3] {
            let sol = solve_exact(
                &diag2(-1.0, 1.0),
                &id2(),
                &DVector::from_vec(vec![mass, 1.0]),
                1.0,
                1e-12,
            )
            .unwrap();
            let lam_gap = (sol.lambda - sol.s.norm()).abs();
            assert!(
                lam_gap <= 1e-12 * (1.0 + sol.lambda),
                "mass {mass}: gap {lam_gap:.2e}"
            );
            let resid = ((diag2(-1.0, 1.0) + id2() * sol.lambda) * &sol.s
                + DVector::from_vec(vec![mass, 1.0]))
            .norm();
            assert!(resid <= 1e-9 * (1.0 + sol.s.norm()), "mass {mass}: {resid:.2e}");
            assert!(sol.lambda >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn tiny_sigma_recovers_unregularized_solve() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.2, 0.0, 0.2, 1.0, 0.1, 0.0, 0.1, 1.5]);
        let g = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let sol = solve_exact(&a, &m, &g, 1e-8, 1e-12).unwrap();
        let unreg = a.clone().lu().solve(&(-(&m) * &g)).unwrap();
        assert_relative_eq!((sol.s - &unreg).norm() / unreg.norm(), 0.0, epsilon = 1e-6);
    }

    #[test]
    fn truncated_solution_reports_residual() {
        let a = diag2(2.0, 3.0);
        let g = DVector::from_vec(vec![1.0, 1e-3]);
        let sol = solve_truncated(&a, &id2(), &g, 1.0, 1e-12, 1).unwrap();
        // the small component was dropped into z
        assert_relative_eq!(sol.z.norm(), 1e-3, max_relative = 1e-10);
        assert!(sol.s[1].abs() <= 1e-14);
        // defining system holds with the residual convention
        let lhs = (&a + id2() * sol.lambda) * &sol.s;
        let rhs = -(&g) + &sol.z;
        assert_relative_eq!((lhs - rhs).norm(), 0.0, epsilon = 1e-10);
        // admissibility kicks in only for large enough theta
        let needed = 2.0 * sol.z.norm() / sol.s.norm_squared();
        assert!(!accept_inexact(&sol, 0.0));
        assert!(!accept_inexact(&sol, needed * 0.9));
        assert!(accept_inexact(&sol, needed * 1.1));
    }

    #[test]
    fn admissibility_boundary() {
        let sol = solve_exact(&id2(), &id2(), &DVector::from_vec(vec![1.0, 0.5]), 2.0, 1e-12)
            .unwrap();
        assert!(accept_inexact(&sol, 0.0)); // exact always admissible
        let mut inexact = sol.clone();
        let sn2 = inexact.s.norm_squared();
        let theta = 0.3;
        // ‖z‖ exactly θ‖s‖² violates the ½ factor
        inexact.z = DVector::from_vec(vec![theta * sn2, 0.0]);
        assert!(!accept_inexact(&inexact, theta));
        // strictly inside the bound
        inexact.z = DVector::from_vec(vec![0.4 * theta * sn2, 0.0]);
        assert!(accept_inexact(&inexact, theta));
    }
}
