//! Symmetric low-rank matrix factorization: `f(X) = ¼‖XXᵀ − Y‖²_F` over
//! `X ∈ R^{n×r}`, flattened column-major into a vector of length `n·r`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::quadratic::random_orthogonal;
use super::{Objective, ProblemError, DENSE_HESSIAN_LIMIT};

#[derive(Debug, Clone)]
pub struct SymMatFactProblem {
    y: DMatrix<f64>,
    n: usize,
    r: usize,
}

impl SymMatFactProblem {
    pub fn new(y: DMatrix<f64>, r: usize) -> Result<Self, ProblemError> {
        let n = y.nrows();
        if y.ncols() != n {
            return Err(ProblemError::BadShape(format!(
                "data matrix must be square, got {}x{}",
                y.nrows(),
                y.ncols()
            )));
        }
        if r == 0 || r > n {
            return Err(ProblemError::BadShape(format!("need 1 <= r <= n, got r={r}, n={n}")));
        }
        if (&y - y.transpose()).norm() > 1e-12 * y.norm().max(1.0) {
            return Err(ProblemError::BadShape("data matrix must be symmetric".into()));
        }
        Ok(Self { y, n, r })
    }

    /// Seeded instance `Y = U D Uᵀ` with a random orthogonal `U` and a rank-`r`
    /// positive spectrum spaced geometrically from 1 down to `1/cond`.
    pub fn generate(n: usize, r: usize, cond: f64, seed: u64) -> Result<Self, ProblemError> {
        if cond < 1.0 || cond.is_nan() {
            return Err(ProblemError::BadCondition(cond));
        }
        if r == 0 || r > n {
            return Err(ProblemError::BadShape(format!("need 1 <= r <= n, got r={r}, n={n}")));
        }
        if r == 1 && cond > 1.0 {
            return Err(ProblemError::BadShape(
                "a rank-1 spectrum cannot have condition number > 1".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_orthogonal(n, &mut rng);
        let mut y = DMatrix::zeros(n, n);
        for k in 0..r {
            let lambda = if r == 1 {
                1.0
            } else {
                cond.powf(-(k as f64) / (r - 1) as f64)
            };
            let uk = u.column(k);
            y += uk * uk.transpose() * lambda;
        }
        let y = (&y + y.transpose()) * 0.5;
        Self::new(y, r)
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n, self.r)
    }

    pub fn unflatten(&self, x: &DVector<f64>) -> DMatrix<f64> {
        assert_eq!(x.len(), self.n * self.r, "shape mismatch");
        DMatrix::from_column_slice(self.n, self.r, x.as_slice())
    }

    pub fn flatten(&self, x: &DMatrix<f64>) -> DVector<f64> {
        assert_eq!(x.shape(), (self.n, self.r), "shape mismatch");
        DVector::from_column_slice(x.as_slice())
    }
}

impl Objective for SymMatFactProblem {
    fn dim(&self) -> usize {
        self.n * self.r
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let xm = self.unflatten(x);
        let resid = &xm * xm.transpose() - &self.y;
        0.25 * resid.norm_squared()
    }

    /// `∇f(X) = (XXᵀ − Y) X`
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let xm = self.unflatten(x);
        let resid = &xm * xm.transpose() - &self.y;
        self.flatten(&(resid * xm))
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let dim = self.dim();
        assert!(
            dim <= DENSE_HESSIAN_LIMIT,
            "dense Hessian only materialized up to dimension {DENSE_HESSIAN_LIMIT}"
        );
        let mut h = DMatrix::zeros(dim, dim);
        let mut e = DVector::zeros(dim);
        for j in 0..dim {
            e[j] = 1.0;
            h.set_column(j, &self.hess_vec(x, &e));
            e[j] = 0.0;
        }
        // symmetrize the assembled columns
        (&h + h.transpose()) * 0.5
    }

    /// `D²f(X)[V] = (XVᵀ + VXᵀ)X + (XXᵀ − Y)V`
    fn hess_vec(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let xm = self.unflatten(x);
        let vm = self.unflatten(v);
        let resid = &xm * xm.transpose() - &self.y;
        let out = (&xm * vm.transpose() + &vm * xm.transpose()) * &xm + resid * vm;
        self.flatten(&out)
    }

    fn lower_bound_hint(&self) -> Option<f64> {
        // generated data has rank <= r and a psd spectrum, so the fit is exact
        Some(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn spectrum_and_determinism() {
        let p = SymMatFactProblem::generate(10, 5, 1e8, 42).unwrap();
        let eig = p.data().clone().symmetric_eigen();
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        // five positive eigenvalues spanning the prescribed ratio, rest zero
        assert_relative_eq!(ev[0] / ev[4], 1e8, max_relative = 1e-6);
        for &e in &ev[5..] {
            assert!(e.abs() <= 1e-10);
        }
        let q = SymMatFactProblem::generate(10, 5, 1e8, 42).unwrap();
        assert_eq!(p.data().as_slice(), q.data().as_slice());

        let flat = SymMatFactProblem::generate(4, 2, 1.0, 1).unwrap();
        let eig = flat.data().clone().symmetric_eigen();
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        assert_relative_eq!(ev[0], 1.0, max_relative = 1e-10);
        assert_relative_eq!(ev[1], 1.0, max_relative = 1e-10);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(SymMatFactProblem::generate(4, 2, 0.5, 0).is_err());
        assert!(SymMatFactProblem::generate(4, 5, 1.0, 0).is_err());
        assert!(SymMatFactProblem::generate(4, 1, 10.0, 0).is_err());
    }

    #[test]
    fn stationary_points() {
        let p = SymMatFactProblem::generate(6, 3, 100.0, 7).unwrap();
        // exact factorization: Y = XX^T via the eigendecomposition
        let eig = p.data().clone().symmetric_eigen();
        let mut pairs: Vec<(f64, usize)> =
            eig.eigenvalues.iter().copied().zip(0..6).collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut xm = DMatrix::zeros(6, 3);
        for (k, &(e, i)) in pairs.iter().take(3).enumerate() {
            xm.set_column(k, &(eig.eigenvectors.column(i) * e.sqrt()));
        }
        let x = p.flatten(&xm);
        assert!(p.value(&x) <= 1e-20);
        assert!(p.gradient(&x).norm() <= 1e-10);

        // origin is stationary with value ¼‖Y‖²
        let zero = DVector::zeros(18);
        assert_relative_eq!(p.value(&zero), 0.25 * p.data().norm_squared(), max_relative = 1e-14);
        assert_eq!(p.gradient(&zero).norm(), 0.0);
    }

    #[test]
    fn scalar_reduction() {
        // n=2, r=1, Y = e1 e1^T, X = t e1: f = ((t²−1)² )/4
        let y = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let p = SymMatFactProblem::new(y, 1).unwrap();
        for t in [0.0, 0.5, 1.0, 2.0, -1.3] {
            let x = DVector::from_vec(vec![t, 0.0]);
            let expected = 0.25 * (t * t - 1.0) * (t * t - 1.0);
            assert_relative_eq!(p.value(&x), expected, max_relative = 1e-13, epsilon = 1e-15);
        }
    }

    #[test]
    fn hessian_matches_hess_vec() {
        let p = SymMatFactProblem::generate(4, 2, 10.0, 3).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        use rand_distr::{Distribution, StandardNormal};
        let x = DVector::from_fn(8, |_, _| StandardNormal.sample(&mut rng));
        let v = DVector::from_fn(8, |_, _| StandardNormal.sample(&mut rng));
        let h = p.hessian(&x);
        assert!((&h - h.transpose()).norm() <= 1e-12 * h.norm());
        assert_relative_eq!((p.hess_vec(&x, &v) - &h * &v).norm(), 0.0, epsilon = 1e-10);
    }
}
