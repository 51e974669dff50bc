//! Objective-function contract and built-in test problems.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

mod logistic;
mod matfact;
mod poly1d;
mod quadratic;

pub use logistic::{parse_libsvm, serialize_libsvm, LibsvmError, LogisticProblem};
pub use matfact::SymMatFactProblem;
pub use poly1d::Poly1D;
pub use quadratic::QuadraticProblem;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("condition number must be >= 1, got {0}")]
    BadCondition(f64),
    #[error("invalid shape: {0}")]
    BadShape(String),
}

/// Largest dimension for which a dense Hessian is materialized; beyond this
/// only Hessian-vector products are meaningful and iterative solvers apply.
pub const DENSE_HESSIAN_LIMIT: usize = 512;

/// Twice-differentiable objective. Evaluations must be re-entrant; instances
/// are immutable after construction.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    /// Dense Hessian; only available up to [`DENSE_HESSIAN_LIMIT`].
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;
    fn hess_vec(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        self.hessian(x) * v
    }
    /// Known infimum of the objective, when available.
    fn lower_bound_hint(&self) -> Option<f64> {
        None
    }
    fn has_dense_hessian(&self) -> bool {
        self.dim() <= DENSE_HESSIAN_LIMIT
    }
}

impl<T: Objective + ?Sized> Objective for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (**self).gradient(x)
    }
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (**self).hessian(x)
    }
    fn hess_vec(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        (**self).hess_vec(x, v)
    }
    fn lower_bound_hint(&self) -> Option<f64> {
        (**self).lower_bound_hint()
    }
    fn has_dense_hessian(&self) -> bool {
        (**self).has_dense_hessian()
    }
}
