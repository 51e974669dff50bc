//! Shared oracles for the integration suites: seeded samplers, an independent
//! bisection solver for the classical (identity-metric) regularized step, and
//! a quadratic-form reference matched to a quadratic objective.

#![allow(dead_code)]

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use pnewton_core::reference::{Reference, ReferenceError};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn_vec(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

pub fn rand_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| {
        let v: f64 = StandardNormal.sample(rng);
        v
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            let col = -q.column(j);
            q.set_column(j, &col);
        }
    }
    q
}

/// Symmetric matrix with prescribed eigenvalues in a random orthogonal frame.
pub fn sym_with_spectrum(eigs: &[f64], rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = eigs.len();
    let u = rand_orthogonal(n, rng);
    let d = DMatrix::from_diagonal(&DVector::from_row_slice(eigs));
    let a = &u * d * u.transpose();
    (&a + a.transpose()) * 0.5
}

/// Symmetric matrix with mixed-sign spectrum in `[-spread, spread]`.
pub fn rand_sym(n: usize, spread: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let eigs: Vec<f64> = (0..n).map(|_| rng.random_range(-spread..spread)).collect();
    sym_with_spectrum(&eigs, rng)
}

/// SPD matrix with eigenvalues in `[1/cond, 1]`.
pub fn rand_spd(n: usize, cond: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let eigs: Vec<f64> = (0..n)
        .map(|i| {
            if n == 1 {
                1.0
            } else {
                cond.powf(-(i as f64) / (n - 1) as f64)
            }
        })
        .collect();
    sym_with_spectrum(&eigs, rng)
}

/// Independent solver for the identity-metric regularized step: bisection on
/// `‖(A+λI)⁻¹ g‖ = λ/σ` over `λ ∈ (max(0, −λ_min(A)), ∞)`, with plain LU
/// solves per probe. Only valid away from the hard case (generic `g`).
pub fn cubic_reg_oracle(
    a: &DMatrix<f64>,
    g: &DVector<f64>,
    sigma: f64,
    tol: f64,
) -> (DVector<f64>, f64) {
    let n = a.nrows();
    let eig_min = a
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |acc, &e| acc.min(e));
    let lambda_s = (-eig_min).max(0.0);
    let id = DMatrix::<f64>::identity(n, n);
    let shifted_solve = |lambda: f64| -> DVector<f64> {
        (a + &id * lambda)
            .clone()
            .lu()
            .solve(g)
            .expect("shifted matrix is positive definite")
    };
    let h = |lambda: f64| -> f64 { sigma * shifted_solve(lambda).norm() - lambda };
    let mut lo = lambda_s + 1e-13 * (1.0 + lambda_s);
    assert!(h(lo) > 0.0, "oracle bracket failed near the boundary");
    let mut hi = (2.0 * lambda_s).max(1.0);
    while h(hi) >= 0.0 {
        hi *= 2.0;
        assert!(hi.is_finite());
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..500 {
        mid = 0.5 * (lo + hi);
        let v = h(mid);
        if v.abs() <= tol * (1.0 + mid) {
            break;
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (-shifted_solve(mid), mid)
}

/// Reference `φ(z) = ½ zᵀQz` matched to a quadratic objective with Hessian
/// `Q`; its dual gradient is `Q⁻¹y` and its preconditioner metric is `Q`.
pub struct MatchedQuadratic {
    q: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl MatchedQuadratic {
    pub fn new(q: DMatrix<f64>) -> Self {
        let chol = q.clone().cholesky().expect("matched quadratic needs SPD Q");
        Self { q, chol }
    }
}

impl Reference for MatchedQuadratic {
    fn phi(&self, z: &DVector<f64>) -> Result<f64, ReferenceError> {
        Ok(0.5 * z.dot(&(&self.q * z)))
    }
    fn dual_grad(&self, y: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(y)
    }
    fn precond_matrix(&self, _y: &DVector<f64>) -> DMatrix<f64> {
        self.q.clone()
    }
    fn dual_hess_apply(&self, _y: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(v)
    }
    fn newton_rhs(&self, y: &DVector<f64>) -> DVector<f64> {
        -y
    }
    fn stationarity(&self, y: &DVector<f64>) -> f64 {
        0.5 * y.dot(&self.chol.solve(y))
    }
    fn ltilde(&self) -> f64 {
        1.0
    }
    fn is_isotropic(&self) -> bool {
        false
    }
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().singular_values().max()
}

pub fn data_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}
