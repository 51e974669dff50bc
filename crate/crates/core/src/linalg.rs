//! Dense and iterative linear-algebra kernels used by the solvers.
//!
//! Dense factorizations are delegated to nalgebra; the Krylov methods are
//! implemented here because the solvers need matvec counts and
//! indefiniteness/breakdown signals that library routines do not expose.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot:.3e} below {threshold:.3e})")]
    NotPositiveDefinite { pivot: f64, threshold: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

// Pivot and definiteness thresholds are relative to the matrix norm; the
// problems span many orders of magnitude in scale.
const PIVOT_REL: f64 = 1e-12;

/// Direct solve of `A x = b`. Returns `None` when a pivot falls below
/// `1e-12·‖A‖`; callers treat that as the singular signal that drives their
/// fallback branches. For `sym = true` a Cholesky fast path is tried first.
pub fn solve_dense(a: &DMatrix<f64>, b: &DVector<f64>, sym: bool) -> Option<DVector<f64>> {
    assert_eq!(a.nrows(), a.ncols(), "solve_dense needs a square matrix");
    assert_eq!(a.nrows(), b.len(), "solve_dense dimension mismatch");
    let scale = a.norm();
    if scale == 0.0 {
        return None;
    }
    if sym {
        if let Some(chol) = a.clone().cholesky() {
            let l = chol.l_dirty();
            let min_piv = (0..a.nrows())
                .map(|i| l[(i, i)] * l[(i, i)])
                .fold(f64::INFINITY, f64::min);
            if min_piv > PIVOT_REL * scale {
                return Some(chol.solve(b));
            }
        }
    }
    let lu = a.clone().lu();
    let u = lu.u();
    let min_piv = (0..a.nrows())
        .map(|i| u[(i, i)].abs())
        .fold(f64::INFINITY, f64::min);
    if min_piv < PIVOT_REL * scale {
        return None;
    }
    lu.solve(b)
}

/// Outcome of a Krylov solve. `matvecs` counts operator applications, which is
/// the cost measure the benchmarks report.
#[derive(Debug, Clone)]
pub struct KrylovResult {
    pub x: DVector<f64>,
    pub iters: usize,
    pub converged: bool,
    pub matvecs: usize,
    /// Set by CG when a direction of non-positive curvature is met.
    pub indefinite: bool,
}

/// Conjugate gradients on a symmetric operator. Converged means
/// `‖A x − b‖ ≤ tol·‖b‖`. Non-positive curvature aborts with the current
/// iterate and `indefinite = true`; the caller decides the fallback.
pub fn cg_solve(
    apply: &mut dyn FnMut(&DVector<f64>) -> DVector<f64>,
    b: &DVector<f64>,
    tol: f64,
    maxit: usize,
) -> KrylovResult {
    assert!(tol > 0.0, "cg_solve needs tol > 0");
    let n = b.len();
    let bnorm = b.norm();
    let mut x = DVector::zeros(n);
    if bnorm == 0.0 {
        return KrylovResult {
            x,
            iters: 0,
            converged: true,
            matvecs: 0,
            indefinite: false,
        };
    }
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = r.norm_squared();
    let mut matvecs = 0;
    for it in 1..=maxit {
        let ap = apply(&p);
        matvecs += 1;
        let pap = p.dot(&ap);
        if pap <= 1e-14 * p.norm_squared() {
            return KrylovResult {
                x,
                iters: it,
                converged: false,
                matvecs,
                indefinite: true,
            };
        }
        let alpha = rr / pap;
        x += &p * alpha;
        r -= &ap * alpha;
        let rr_new = r.norm_squared();
        if rr_new.sqrt() <= tol * bnorm {
            return KrylovResult {
                x,
                iters: it,
                converged: true,
                matvecs,
                indefinite: false,
            };
        }
        p = &r + &p * (rr_new / rr);
        rr = rr_new;
    }
    KrylovResult {
        x,
        iters: maxit,
        converged: false,
        matvecs,
        indefinite: false,
    }
}

/// Restarted GMRES on a general operator, modified Gram-Schmidt Arnoldi with
/// Givens rotations. Happy breakdown is treated as convergence of the
/// projected system; stagnation past `maxit` matvecs returns the best iterate.
pub fn gmres_solve(
    apply: &mut dyn FnMut(&DVector<f64>) -> DVector<f64>,
    b: &DVector<f64>,
    tol: f64,
    restart: usize,
    maxit: usize,
) -> KrylovResult {
    assert!(tol > 0.0, "gmres_solve needs tol > 0");
    assert!(restart >= 1, "gmres_solve needs restart >= 1");
    let n = b.len();
    let bnorm = b.norm();
    let mut x = DVector::zeros(n);
    if bnorm == 0.0 {
        return KrylovResult {
            x,
            iters: 0,
            converged: true,
            matvecs: 0,
            indefinite: false,
        };
    }
    let target = tol * bnorm;
    let mut matvecs = 0;
    let mut iters = 0;

    loop {
        let r0 = b - apply(&x);
        matvecs += 1;
        let beta = r0.norm();
        if beta <= target {
            return KrylovResult {
                x,
                iters,
                converged: true,
                matvecs,
                indefinite: false,
            };
        }
        let m = restart;
        let mut v: Vec<DVector<f64>> = Vec::with_capacity(m + 1);
        v.push(&r0 / beta);
        // Hessenberg columns and Givens rotation state
        let mut h: Vec<Vec<f64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::with_capacity(m);
        let mut sn: Vec<f64> = Vec::with_capacity(m);
        let mut g = vec![beta];
        let mut cols = 0;

        for j in 0..m {
            if matvecs >= maxit {
                break;
            }
            let mut w = apply(&v[j]);
            matvecs += 1;
            iters += 1;
            let mut hj = vec![0.0; j + 2];
            for (i, vi) in v.iter().enumerate().take(j + 1) {
                hj[i] = w.dot(vi);
                w -= vi * hj[i];
            }
            let wnorm = w.norm();
            hj[j + 1] = wnorm;
            // apply accumulated rotations to the new column
            for i in 0..j {
                let t = cs[i] * hj[i] + sn[i] * hj[i + 1];
                hj[i + 1] = -sn[i] * hj[i] + cs[i] * hj[i + 1];
                hj[i] = t;
            }
            // new rotation eliminating hj[j+1]
            let denom = hj[j].hypot(hj[j + 1]);
            let (c, s) = if denom == 0.0 {
                (1.0, 0.0)
            } else {
                (hj[j] / denom, hj[j + 1] / denom)
            };
            cs.push(c);
            sn.push(s);
            hj[j] = denom;
            hj[j + 1] = 0.0;
            g.push(-s * g[j]);
            g[j] *= c;
            h.push(hj);
            cols = j + 1;

            let happy = wnorm <= 1e-14 * bnorm;
            let res_est = g[j + 1].abs();
            if res_est <= target || happy {
                break;
            }
            v.push(&w / wnorm);
        }

        if cols == 0 {
            // matvec budget exhausted before building a subspace
            return KrylovResult {
                x,
                iters,
                converged: false,
                matvecs,
                indefinite: false,
            };
        }

        // back-substitute the triangularized least-squares system
        let mut ycoef = vec![0.0; cols];
        for i in (0..cols).rev() {
            let mut s = g[i];
            for (k, yk) in ycoef.iter().enumerate().skip(i + 1) {
                s -= h[k][i] * yk;
            }
            ycoef[i] = s / h[i][i];
        }
        for (k, yk) in ycoef.iter().enumerate() {
            x += &v[k] * *yk;
        }

        let res = (b - apply(&x)).norm();
        matvecs += 1;
        if res <= target {
            return KrylovResult {
                x,
                iters,
                converged: true,
                matvecs,
                indefinite: false,
            };
        }
        if matvecs >= maxit {
            return KrylovResult {
                x,
                iters,
                converged: false,
                matvecs,
                indefinite: false,
            };
        }
    }
}

/// Generalized eigendecomposition of a symmetric pencil `(A, M)` with `M`
/// positive definite: `A V = M V diag(ξ)` with `VᵀMV = I` and `ξ` ascending.
#[derive(Debug, Clone)]
pub struct GenEig {
    pub xi: DVector<f64>,
    pub v: DMatrix<f64>,
}

/// Reduce `(A, M)` by Cholesky `M = LLᵀ`, take the symmetric eigendecomposition
/// of `L⁻¹AL⁻ᵀ` and back-transform the vectors by `L⁻ᵀ`.
pub fn gen_sym_eig(a: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<GenEig, LinalgError> {
    let n = a.nrows();
    if a.ncols() != n || m.nrows() != n || m.ncols() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "pencil needs square matrices of equal size, got {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            m.nrows(),
            m.ncols()
        )));
    }
    let mnorm = m.norm();
    let chol = m.clone().cholesky().ok_or(LinalgError::NotPositiveDefinite {
        pivot: 0.0,
        threshold: PIVOT_REL * mnorm,
    })?;
    let l = chol.l();
    let min_piv = (0..n).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
    if min_piv <= PIVOT_REL * mnorm {
        return Err(LinalgError::NotPositiveDefinite {
            pivot: min_piv,
            threshold: PIVOT_REL * mnorm,
        });
    }

    let x = l
        .solve_lower_triangular(a)
        .expect("checked pivots above");
    let bt = l
        .solve_lower_triangular(&x.transpose())
        .expect("checked pivots above");
    // symmetrize against accumulated roundoff
    let b = (&bt + bt.transpose()) * 0.5;

    let eig = b.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let mut w = DMatrix::zeros(n, n);
    let mut xi = DVector::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        xi[dst] = eig.eigenvalues[src];
        w.set_column(dst, &eig.eigenvectors.column(src));
    }
    let v = l
        .transpose()
        .solve_upper_triangular(&w)
        .expect("checked pivots above");
    Ok(GenEig { xi, v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = random_matrix(n, rng);
        &a * a.transpose() + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn solve_dense_identity_and_singular() {
        let id = DMatrix::<f64>::identity(3, 3);
        let b = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let x = solve_dense(&id, &b, true).unwrap();
        assert_relative_eq!((x - &b).norm(), 0.0, epsilon = 1e-15);

        let sing = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.0]));
        assert!(solve_dense(&sing, &DVector::from_vec(vec![1.0, 1.0]), true).is_none());
        assert!(solve_dense(&sing, &DVector::from_vec(vec![1.0, 1.0]), false).is_none());
    }

    #[test]
    fn solve_dense_known_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = random_spd(5, &mut rng);
            let ones = DVector::from_element(5, 1.0);
            let b = &a * &ones;
            let x = solve_dense(&a, &b, false).unwrap();
            assert_relative_eq!((x - &ones).norm(), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn solve_dense_residual_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..100 {
            let n = 2 + (trial % 19);
            let a = if trial % 2 == 0 {
                random_spd(n, &mut rng)
            } else {
                random_matrix(n, &mut rng) + DMatrix::identity(n, n) * 2.0
            };
            let b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let sym = trial % 2 == 0;
            let x = solve_dense(&a, &b, sym).expect("well-conditioned");
            let resid = (&a * &x - &b).norm();
            assert!(
                resid <= 1e-10 * (a.norm() * x.norm() + b.norm()),
                "trial {trial}: residual {resid:.3e}"
            );
        }
    }

    #[test]
    fn cg_identity_one_iteration() {
        let b = DVector::from_vec(vec![3.0, -1.0, 2.0]);
        let mut apply = |v: &DVector<f64>| v.clone();
        let res = cg_solve(&mut apply, &b, 1e-12, 10);
        assert!(res.converged);
        assert_eq!(res.iters, 1);
        assert_relative_eq!((res.x - &b).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn cg_finite_termination() {
        let d = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = DVector::from_fn(5, |_, _| rng.random_range(-1.0..1.0));
        let mut apply = |v: &DVector<f64>| v.component_mul(&d);
        let res = cg_solve(&mut apply, &b, 1e-10, 20);
        assert!(res.converged);
        assert!(res.iters <= 5, "took {}", res.iters);
    }

    #[test]
    fn cg_residual_contract_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for trial in 0..100 {
            let n = 2 + (trial % 19);
            let a = random_spd(n, &mut rng);
            let b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let mut matvec = |v: &DVector<f64>| &a * v;
            let res = cg_solve(&mut matvec, &b, 1e-10, 50 * n);
            assert!(res.converged, "trial {trial}");
            let resid = (&a * &res.x - &b).norm();
            assert!(resid <= 1e-10 * b.norm() * 1.01, "trial {trial}: {resid:.3e}");
        }
    }

    #[test]
    fn cg_indefinite_signal() {
        let d = DVector::from_vec(vec![-1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 1.0]);
        let mut apply = |v: &DVector<f64>| v.component_mul(&d);
        let res = cg_solve(&mut apply, &b, 1e-10, 10);
        assert!(res.indefinite);
        assert!(!res.converged);
    }

    #[test]
    fn gmres_identity_and_rotation() {
        let b = DVector::from_vec(vec![2.0, 1.0]);
        let mut apply = |v: &DVector<f64>| v.clone();
        let res = gmres_solve(&mut apply, &b, 1e-12, 10, 100);
        assert!(res.converged);
        assert_eq!(res.iters, 1);
        assert_relative_eq!((res.x - &b).norm(), 0.0, epsilon = 1e-12);

        // quarter-turn rotation: x = rot(-90°) b
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let b = DVector::from_vec(vec![1.0, 0.0]);
        let mut apply = |v: &DVector<f64>| &rot * v;
        let res = gmres_solve(&mut apply, &b, 1e-12, 10, 100);
        assert!(res.converged);
        assert_relative_eq!(res.x[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(res.x[1], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn gmres_residual_contract_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..100 {
            let n = 2 + (trial % 19);
            let a = random_matrix(n, &mut rng) + DMatrix::identity(n, n) * 3.0;
            let b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let mut matvec = |v: &DVector<f64>| &a * v;
            let res = gmres_solve(&mut matvec, &b, 1e-10, 50, 500);
            assert!(res.converged, "trial {trial} did not converge");
            let resid = (&a * &res.x - &b).norm();
            assert!(resid <= 1e-10 * b.norm() * 1.01, "trial {trial}: {resid:.3e}");
        }
    }

    #[test]
    fn gmres_with_small_restart_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 12;
        let a = random_matrix(n, &mut rng) + DMatrix::identity(n, n) * 4.0;
        let b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let mut matvec = |v: &DVector<f64>| &a * v;
        let res = gmres_solve(&mut matvec, &b, 1e-9, 4, 2000);
        assert!(res.converged);
        assert!((&a * &res.x - &b).norm() <= 1e-9 * b.norm() * 1.01);
    }

    #[test]
    fn gen_eig_diagonal_case() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        let m = DMatrix::identity(2, 2);
        let ge = gen_sym_eig(&a, &m).unwrap();
        assert_relative_eq!(ge.xi[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(ge.xi[1], 2.0, max_relative = 1e-12);
        for j in 0..2 {
            let col = ge.v.column(j);
            assert_relative_eq!(col.norm(), 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn gen_eig_proportional_pencil() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_spd(4, &mut rng);
        let a = &m * 2.0;
        let ge = gen_sym_eig(&a, &m).unwrap();
        for i in 0..4 {
            assert_relative_eq!(ge.xi[i], 2.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn gen_eig_invariants_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for trial in 0..50 {
            let n = 2 + (trial % 6);
            let s = random_matrix(n, &mut rng);
            let a = (&s + s.transpose()) * 0.5;
            let m = random_spd(n, &mut rng);
            let ge = gen_sym_eig(&a, &m).unwrap();
            let tol = 1e-8 * (a.norm() + m.norm());
            // definitional residual, columnwise
            for j in 0..n {
                let resid = (&a * ge.v.column(j) - &m * ge.v.column(j) * ge.xi[j]).norm();
                assert!(resid <= tol, "trial {trial} col {j}: {resid:.3e}");
            }
            // M-orthonormality
            let vtmv = ge.v.transpose() * &m * &ge.v;
            assert!((vtmv - DMatrix::identity(n, n)).norm() <= 1e-8);
            // explicit inverse identity
            let prod = ge.v.transpose() * &m * &ge.v;
            let inv_check = (&ge.v * ge.v.transpose() * &m - DMatrix::identity(n, n)).norm();
            assert!(inv_check <= 1e-8, "trial {trial}: {inv_check:.3e} ({prod:.2})");
            // ascending
            for i in 1..n {
                assert!(ge.xi[i] >= ge.xi[i - 1]);
            }
        }
    }

    #[test]
    fn gen_eig_rejects_indefinite_metric() {
        let a = DMatrix::identity(2, 2);
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        assert!(gen_sym_eig(&a, &m).is_err());
    }

    // definiteness of A + λM flips exactly at λ = −ξ₁
    #[test]
    fn pencil_shift_definiteness_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for trial in 0..20 {
            let n = 3 + (trial % 4);
            let s = random_matrix(n, &mut rng);
            let a = (&s + s.transpose()) * 0.5;
            let m = random_spd(n, &mut rng);
            let ge = gen_sym_eig(&a, &m).unwrap();
            let xi1 = ge.xi[0];
            let scale = a.norm() + xi1.abs() * m.norm();
            for dl in [-1e-2, -1e-4, 1e-4, 1e-2, 1.0] {
                let lambda = -xi1 + dl;
                let shifted = &a + &m * lambda;
                let min_eig = shifted
                    .symmetric_eigen()
                    .eigenvalues
                    .iter()
                    .fold(f64::INFINITY, |acc, &e| acc.min(e));
                if dl > 1e-8 {
                    assert!(
                        min_eig >= -1e-8 * (scale + lambda.abs() * m.norm()),
                        "trial {trial} dl={dl}: min_eig={min_eig:.3e}"
                    );
                } else if dl < -1e-8 {
                    assert!(min_eig < 0.0, "trial {trial} dl={dl}: min_eig={min_eig:.3e}");
                }
            }
        }
    }
}
