//! Independent numerical oracles: finite-difference derivative checks,
//! Lipschitz-constant estimation for the preconditioned Hessian, smoothness
//! inequality scanning, and empirical convergence-order estimation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::problems::{Objective, Poly1D};
use crate::reference::{Reference, ReferenceFunction};

/// Estimated Lipschitz constant of the preconditioned Hessian map.
/// Estimates are maxima over samples and therefore lower bounds; callers that
/// need an upper bound apply their own safety factor.
#[derive(Debug, Clone)]
pub struct LipschitzEstimate {
    pub value: f64,
    pub method: LhMethod,
    pub sample_count: usize,
    pub domain_lo: f64,
    pub domain_hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LhMethod {
    Grid1dClosedForm,
    RandomSecant,
}

/// Relative finite-difference errors of the analytic gradient and Hessian at
/// one point. Gradients are compared against central differences of `f`;
/// Hessian columns against central differences of the analytic gradient.
#[derive(Debug, Clone, Copy)]
pub struct FdReport {
    pub grad_relerr: f64,
    pub hess_relerr: f64,
}

pub fn fd_check<O: Objective + ?Sized>(obj: &O, x: &DVector<f64>, step: f64) -> FdReport {
    assert!(step > 0.0, "finite-difference step must be positive");
    let n = obj.dim();
    let grad = obj.gradient(x);
    let mut grad_fd = DVector::zeros(n);
    let mut xp = x.clone();
    for i in 0..n {
        xp[i] = x[i] + step;
        let fp = obj.value(&xp);
        xp[i] = x[i] - step;
        let fm = obj.value(&xp);
        xp[i] = x[i];
        grad_fd[i] = (fp - fm) / (2.0 * step);
    }
    let grad_relerr = (grad_fd - &grad).norm() / grad.norm().max(1.0);

    let hess = obj.hessian(x);
    let mut hess_fd = DMatrix::zeros(n, n);
    for i in 0..n {
        xp[i] = x[i] + step;
        let gp = obj.gradient(&xp);
        xp[i] = x[i] - step;
        let gm = obj.gradient(&xp);
        xp[i] = x[i];
        hess_fd.set_column(i, &((gp - gm) / (2.0 * step)));
    }
    let hess_relerr = (hess_fd - &hess).norm() / hess.norm().max(1.0);
    FdReport {
        grad_relerr,
        hess_relerr,
    }
}

/// Relative error of a Hessian-vector product against the differenced
/// analytic gradient along `v`.
pub fn fd_check_hess_vec<O: Objective + ?Sized>(
    obj: &O,
    x: &DVector<f64>,
    v: &DVector<f64>,
    step: f64,
) -> f64 {
    assert!(step > 0.0);
    let vnorm = v.norm();
    if vnorm == 0.0 {
        return 0.0;
    }
    let dir = v / vnorm;
    let hv = obj.hess_vec(x, &dir);
    let gp = obj.gradient(&(x + &dir * step));
    let gm = obj.gradient(&(x - &dir * step));
    let fd = (gp - gm) / (2.0 * step);
    (fd - &hv).norm() / hv.norm().max(1.0)
}

/// Closed-form 1D estimate for the hyperbolic-cosine reference (unit scale):
/// the preconditioned Hessian is `H(x) = f''(x)/√(1+f'(x)²)` and
///
/// ```text
///   H'(x) = f'''/√(1+f'²) − (f'')² f' /(1+f'²)^{3/2},
/// ```
///
/// so the estimate is the grid maximum of `|H'|`. Polynomial growth makes
/// `H' → 0` at infinity, hence the estimate stabilizes as the box grows.
pub fn estimate_lh_1d(poly: &Poly1D, lo: f64, hi: f64, grid_n: usize) -> LipschitzEstimate {
    assert!(hi > lo && grid_n >= 2);
    let mut best = 0.0f64;
    for i in 0..grid_n {
        let x = lo + (hi - lo) * i as f64 / (grid_n - 1) as f64;
        let hp = lh_1d_derivative(poly, x);
        best = best.max(hp.abs());
    }
    LipschitzEstimate {
        value: best,
        method: LhMethod::Grid1dClosedForm,
        sample_count: grid_n,
        domain_lo: lo,
        domain_hi: hi,
    }
}

fn lh_1d_derivative(poly: &Poly1D, x: f64) -> f64 {
    let (_, f1, f2, f3) = poly.eval4(x);
    let w = f1.hypot(1.0); // √(1+f'²), overflow-safe
    f3 / w - f2 * f2 * f1 / (w * w * w)
}

/// Secant estimate `max ‖H(x)−H(y)‖/‖x−y‖` over seeded random pairs in a cube,
/// with `H(x) = ∇²φ*(∇f(x))·∇²f(x)` materialized densely and measured in the
/// spectral norm.
pub fn estimate_lh_secant<O: Objective + ?Sized>(
    obj: &O,
    rf: &ReferenceFunction,
    box_radius: f64,
    n_pairs: usize,
    seed: u64,
) -> LipschitzEstimate {
    assert!(box_radius > 0.0 && n_pairs > 0);
    let n = obj.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = |rng: &mut ChaCha8Rng| {
        DVector::from_fn(n, |_, _| rng.random_range(-box_radius..box_radius))
    };
    let precond_hess = |x: &DVector<f64>| {
        let y = obj.gradient(x);
        rf.dual_hess(&y) * obj.hessian(x)
    };
    let mut best = 0.0f64;
    for _ in 0..n_pairs {
        let x = sample(&mut rng);
        let y = sample(&mut rng);
        let dist = (&x - &y).norm();
        if dist < 1e-12 {
            continue;
        }
        let diff = precond_hess(&x) - precond_hess(&y);
        let spectral = diff.singular_values().max();
        best = best.max(spectral / dist);
    }
    LipschitzEstimate {
        value: best,
        method: LhMethod::RandomSecant,
        sample_count: n_pairs,
        domain_lo: -box_radius,
        domain_hi: box_radius,
    }
}

/// One violating pair of the smoothness upper model.
#[derive(Debug, Clone)]
pub struct SmoothnessViolation {
    pub pair_index: usize,
    pub gap: f64,
}

/// Result of scanning the anisotropic-smoothness inequality
/// `f(x) ≤ f(x̄) + L⁻¹φ(L(x−ȳ)) − L⁻¹φ(L(x̄−ȳ))`, `ȳ = x̄ − L⁻¹∇φ*(∇f(x̄))`,
/// over sampled pairs. Pairs that leave the reference domain after scaling are
/// counted as inconclusive rather than as violations.
#[derive(Debug, Clone)]
pub struct SmoothnessReport {
    pub violations: Vec<SmoothnessViolation>,
    pub inconclusive: usize,
    pub checked: usize,
}

impl SmoothnessReport {
    pub fn clean(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn check_anisotropic<O, R>(
    obj: &O,
    rf: &R,
    l: f64,
    pairs: &[(DVector<f64>, DVector<f64>)],
) -> SmoothnessReport
where
    O: Objective + ?Sized,
    R: Reference + ?Sized,
{
    assert!(l > 0.0, "smoothness constant must be positive");
    let mut violations = Vec::new();
    let mut inconclusive = 0;
    for (idx, (x, xbar)) in pairs.iter().enumerate() {
        let ybar = xbar - rf.dual_grad(&obj.gradient(xbar)) / l;
        let lhs = obj.value(x);
        let phi_x = rf.phi(&((x - &ybar) * l));
        let phi_xbar = rf.phi(&((xbar - &ybar) * l));
        match (phi_x, phi_xbar) {
            (Ok(a), Ok(b)) => {
                let rhs = obj.value(xbar) + (a - b) / l;
                let gap = lhs - rhs;
                if gap > 1e-10 * (1.0 + lhs.abs()) {
                    violations.push(SmoothnessViolation { pair_index: idx, gap });
                }
            }
            _ => inconclusive += 1,
        }
    }
    SmoothnessReport {
        violations,
        inconclusive,
        checked: pairs.len(),
    }
}

/// Empirical convergence order from tail errors: least-squares slope of
/// `log e_{k+1}` against `log e_k` over the pairs above the noise floor.
#[derive(Debug, Clone, Copy)]
pub struct OrderEstimate {
    pub order: f64,
    pub residual: f64,
    pub pairs_used: usize,
}

pub fn convergence_order(errors: &[f64]) -> Option<OrderEstimate> {
    let floor = 100.0 * f64::EPSILON;
    let usable: Vec<f64> = errors.iter().copied().take_while(|&e| e > floor).collect();
    if usable.len() < 3 {
        return None;
    }
    let pts: Vec<(f64, f64)> = usable
        .windows(2)
        .map(|w| (w[0].ln(), w[1].ln()))
        .collect();
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return None;
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let residual = pts
        .iter()
        .map(|p| {
            let r = p.1 - (slope * p.0 + intercept);
            r * r
        })
        .sum::<f64>()
        .sqrt();
    Some(OrderEstimate {
        order: slope,
        residual,
        pairs_used: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::QuadraticProblem;
    use crate::reference::{KernelKind, ScalarKernel, Structure};
    use approx::assert_relative_eq;

    #[test]
    fn fd_on_quadratic_is_exact() {
        let q = QuadraticProblem::random(5, 10.0, 1);
        let x = DVector::from_element(5, 0.7);
        let rep = fd_check(&q, &x, 1e-5 * (1.0 + x.norm()));
        assert!(rep.grad_relerr <= 1e-9, "{}", rep.grad_relerr);
        assert!(rep.hess_relerr <= 1e-9, "{}", rep.hess_relerr);
    }

    #[test]
    fn lh_1d_pure_quadratic_closed_form() {
        // f = x²/2: max |H'| = 2/(3√3) attained at f' = 1/√2
        let q = Poly1D::new(vec![0.0, 0.0, 0.5]);
        let est = estimate_lh_1d(&q, -3.0, 3.0, 200_001);
        assert_relative_eq!(est.value, 0.3849001794597505, max_relative = 1e-8);
    }

    #[test]
    fn lh_1d_stabilizes_with_box_growth() {
        let quartic = Poly1D::power_family(4);
        let small = estimate_lh_1d(&quartic, -1e3, 1e3, 400_001);
        let large = estimate_lh_1d(&quartic, -2e3, 2e3, 800_001);
        assert!(large.value >= small.value * (1.0 - 1e-10));
        assert!((large.value - small.value) / small.value < 0.01);
        // a cubic with a huge leading coefficient still has a modest estimate
        // while its third derivative is enormous
        let steep = Poly1D::new(vec![0.0, 0.0, 0.5, 1e6]);
        let est = estimate_lh_1d(&steep, -1e3, 1e3, 400_001);
        // at the origin the damping vanishes, so the estimate tops out at the
        // third-derivative constant itself but never exceeds it
        let max_f3 = 6.0 * 1e6;
        assert!(est.value.is_finite());
        assert!(est.value <= max_f3 * 1.0001, "estimate {} vs f''' {max_f3}", est.value);
    }

    #[test]
    fn refining_never_decreases() {
        let quartic = Poly1D::power_family(4);
        let coarse = estimate_lh_1d(&quartic, -10.0, 10.0, 101);
        let fine = estimate_lh_1d(&quartic, -10.0, 10.0, 100_001);
        assert!(fine.value >= coarse.value);
    }

    #[test]
    fn secant_estimate_zero_for_constant_preconditioned_hessian() {
        let q = QuadraticProblem::random(4, 5.0, 2);
        let rf = ReferenceFunction::isotropic(ScalarKernel::unit(KernelKind::Quadratic), 4);
        let est = estimate_lh_secant(&q, &rf, 2.0, 40, 11);
        assert!(est.value <= 1e-10, "{}", est.value);
    }

    #[test]
    fn secant_stable_across_seeds_on_matfact() {
        let p = crate::problems::SymMatFactProblem::generate(4, 2, 10.0, 5).unwrap();
        let rf = ReferenceFunction::isotropic(ScalarKernel::unit(KernelKind::Cosh), 8);
        let a = estimate_lh_secant(&p, &rf, 2.0, 600, 1).value;
        let b = estimate_lh_secant(&p, &rf, 2.0, 600, 2).value;
        assert!(a.is_finite() && a > 0.0);
        assert!((a - b).abs() / a.max(b) <= 0.2, "{a} vs {b}");
    }

    #[test]
    fn secant_agrees_with_1d_closed_form() {
        let quartic = Poly1D::power_family(4);
        let rf = ReferenceFunction::isotropic(ScalarKernel::unit(KernelKind::Cosh), 1);
        let grid = estimate_lh_1d(&quartic, -10.0, 10.0, 400_001);
        let secant = estimate_lh_secant(&quartic, &rf, 10.0, 4000, 3);
        let rel = (grid.value - secant.value).abs() / grid.value;
        assert!(rel <= 0.1, "grid {} vs secant {}", grid.value, secant.value);
    }

    #[test]
    fn descent_lemma_special_case_is_clean() {
        // quadratic objective and quadratic kernel: the upper model with
        // L = λ_max reduces to the classical descent lemma
        let q = QuadraticProblem::random(3, 4.0, 5);
        let rf = ReferenceFunction::isotropic(ScalarKernel::unit(KernelKind::Quadratic), 3);
        let lmax = q
            .matrix()
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(0.0f64, |a, &b| a.max(b));
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pairs: Vec<_> = (0..200)
            .map(|_| {
                (
                    DVector::from_fn(3, |_, _| rng.random_range(-5.0..5.0)),
                    DVector::from_fn(3, |_, _| rng.random_range(-5.0..5.0)),
                )
            })
            .collect();
        let report = check_anisotropic(&q, &rf, lmax * 1.0001, &pairs);
        assert!(report.clean(), "{} violations", report.violations.len());
        assert_eq!(report.inconclusive, 0);

        // with a drastically understated constant the scan must object
        let report = check_anisotropic(&q, &rf, lmax / 50.0, &pairs);
        assert!(!report.clean());
    }

    #[test]
    fn quartic_beats_quadratic_model() {
        // the quadratic-kernel model with L = 1 fails for the quartic at
        // large |x| while the fast-growth kernel covers it
        let quartic = Poly1D::power_family(4);
        let pairs: Vec<_> = (1..=20)
            .map(|i| {
                let t = i as f64;
                (DVector::from_element(1, t), DVector::from_element(1, -t / 2.0))
            })
            .collect();
        let quad = ReferenceFunction::isotropic(ScalarKernel::unit(KernelKind::Quadratic), 1);
        assert!(!check_anisotropic(&quartic, &quad, 1.0, &pairs).clean());

        let cosh = ReferenceFunction::isotropic(ScalarKernel::unit(KernelKind::Cosh), 1);
        let mut l = 1.0;
        let mut clean = false;
        for _ in 0..60 {
            if check_anisotropic(&quartic, &cosh, l, &pairs).clean() {
                clean = true;
                break;
            }
            l *= 2.0;
        }
        assert!(clean, "no smoothness constant found up to L = {l}");
    }

    #[test]
    fn separable_log_barrier_reports_inconclusive_outside_domain() {
        let quartic = Poly1D::power_family(4);
        let rf = ReferenceFunction::new(
            ScalarKernel::unit(KernelKind::LogBarrier),
            Structure::Separable,
            1,
        );
        let pairs = vec![(
            DVector::from_element(1, 100.0),
            DVector::from_element(1, 0.1),
        )];
        let report = check_anisotropic(&quartic, &rf, 1.0, &pairs);
        assert_eq!(report.inconclusive, 1);
        assert!(report.clean());
    }

    #[test]
    fn order_estimation_synthetic() {
        // quadratically convergent sequence e_{k+1} = e_k²
        let quad: Vec<f64> = (0..6).map(|k| 0.5f64.powi(1 << k)).collect();
        let est = convergence_order(&quad).unwrap();
        assert_relative_eq!(est.order, 2.0, max_relative = 1e-6);
        // linear sequence
        let lin: Vec<f64> = (0..20).map(|k| 0.5f64.powi(k)).collect();
        let est = convergence_order(&lin).unwrap();
        assert_relative_eq!(est.order, 1.0, max_relative = 1e-6);
        // too few usable points
        assert!(convergence_order(&[0.1, 1e-18]).is_none());
        assert!(convergence_order(&[0.1]).is_none());
    }
}
