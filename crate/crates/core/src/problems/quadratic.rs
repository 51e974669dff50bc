//! Strongly convex quadratic test problems with a known minimizer.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Objective;

/// `f(x) = ½ (x − x*)ᵀ Q (x − x*) + c` with `Q` symmetric positive definite.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    q: DMatrix<f64>,
    xstar: DVector<f64>,
    offset: f64,
}

impl QuadraticProblem {
    pub fn new(q: DMatrix<f64>, xstar: DVector<f64>, offset: f64) -> Self {
        assert_eq!(q.nrows(), q.ncols());
        assert_eq!(q.nrows(), xstar.len());
        assert!((&q - q.transpose()).norm() <= 1e-12 * q.norm().max(1.0), "Q must be symmetric");
        Self { q, xstar, offset }
    }

    /// Seeded SPD instance with geometrically spaced spectrum in `[1, cond]`.
    pub fn random(n: usize, cond: f64, seed: u64) -> Self {
        assert!(cond >= 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_orthogonal(n, &mut rng);
        let d = DVector::from_fn(n, |i, _| {
            if n == 1 {
                1.0
            } else {
                cond.powf(i as f64 / (n - 1) as f64)
            }
        });
        let q = &u * DMatrix::from_diagonal(&d) * u.transpose();
        let q = (&q + q.transpose()) * 0.5;
        let xstar = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        Self::new(q, xstar, 0.0)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn minimizer(&self) -> &DVector<f64> {
        &self.xstar
    }
}

impl Objective for QuadraticProblem {
    fn dim(&self) -> usize {
        self.xstar.len()
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        let d = x - &self.xstar;
        0.5 * d.dot(&(&self.q * &d)) + self.offset
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.q * (x - &self.xstar)
    }
    fn hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.q.clone()
    }
    fn hess_vec(&self, _x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        &self.q * v
    }
    fn lower_bound_hint(&self) -> Option<f64> {
        Some(self.offset)
    }
}

/// Haar-ish random orthogonal matrix from the QR of a Gaussian sample, with
/// the R diagonal sign-fixed so the draw is deterministic per seed.
pub(crate) fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
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

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gradient_vanishes_at_minimizer() {
        let p = QuadraticProblem::random(6, 100.0, 3);
        assert_relative_eq!(p.gradient(p.minimizer()).norm(), 0.0, epsilon = 1e-14);
        assert_eq!(p.lower_bound_hint(), Some(0.0));
    }

    #[test]
    fn random_orthogonal_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_orthogonal(5, &mut rng);
        let err = (u.transpose() * &u - DMatrix::identity(5, 5)).norm();
        assert!(err <= 1e-12);
    }

    #[test]
    fn spectrum_spacing() {
        let p = QuadraticProblem::random(4, 100.0, 9);
        let eig = p.matrix().clone().symmetric_eigen();
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert_relative_eq!(ev[3] / ev[0], 100.0, max_relative = 1e-8);
    }
}
