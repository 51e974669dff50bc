//! Reference functions and their scalar kernels.
//!
//! A reference function `φ` is a strongly convex, even function with `φ(0) = 0`
//! whose convex conjugate `φ*` supplies the nonlinear preconditioner: raw
//! gradients are mapped through `∇φ*` before a Newton-type step is formed.
//! Two compositions of a scalar kernel `h` are supported: isotropic
//! `φ(x) = h(‖x‖)` and separable `φ(x) = Σ h(xᵢ)`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReferenceError {
    #[error("kernel argument must be finite and nonnegative, got {0}")]
    BadKernelArg(f64),
    #[error("kernel scale must be a positive finite number, got {0}")]
    BadScale(f64),
    #[error("point outside the reference domain: {0}")]
    OutsideDomain(String),
    #[error("{0} is only defined for isotropic references")]
    NotIsotropic(&'static str),
}

/// The four supported scalar kernels.
///
/// All are even, vanish at zero and have strictly increasing conjugate
/// gradients. `Cosh`, `ExpAbs` and `LogBarrier` grow faster than a quadratic,
/// which is what makes the induced preconditioner nontrivial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// `h(t) = t²/2` — the preconditioner degenerates to the identity.
    Quadratic,
    /// `h(t) = cosh(t) − 1`
    Cosh,
    /// `h(t) = exp(|t|) − |t| − 1`
    ExpAbs,
    /// `h(t) = −|t| − ln(1 − |t|)`, finite on (−1, 1)
    LogBarrier,
}

/// Scalar kernel together with a positive multiplier: the represented function
/// is `c·h(·)`, whose conjugate is `c·h*(·/c)`.
#[derive(Debug, Clone, Copy)]
pub struct ScalarKernel {
    kind: KernelKind,
    scale: f64,
}

// Series fallbacks below a small-argument threshold avoid 0/0 cancellation in
// the ratios h*'(u)/u and u/h*'(u) near the origin.
const SMALL: f64 = 1e-8;

fn check_arg(y: f64) -> Result<f64, ReferenceError> {
    if !y.is_finite() || y < 0.0 {
        Err(ReferenceError::BadKernelArg(y))
    } else {
        Ok(y)
    }
}

impl ScalarKernel {
    pub fn new(kind: KernelKind, scale: f64) -> Result<Self, ReferenceError> {
        if !scale.is_finite() || scale <= 0.0 {
            return Err(ReferenceError::BadScale(scale));
        }
        Ok(Self { kind, scale })
    }

    /// Kernel with unit scale.
    pub fn unit(kind: KernelKind) -> Self {
        Self { kind, scale: 1.0 }
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `c·h(t)` for `t ≥ 0`. Errors when `t` leaves the kernel domain.
    pub fn value(&self, t: f64) -> Result<f64, ReferenceError> {
        let t = check_arg(t)?;
        let v = match self.kind {
            KernelKind::Quadratic => 0.5 * t * t,
            // cosh(t) − 1 = 2 sinh²(t/2), exact for small t
            KernelKind::Cosh => {
                let s = (0.5 * t).sinh();
                2.0 * s * s
            }
            KernelKind::ExpAbs => {
                if t < 1e-4 {
                    // e^t − t − 1 = t²/2 (1 + t/3 + t²/12 + …)
                    t * t / 2.0 * (1.0 + t / 3.0 + t * t / 12.0)
                } else {
                    t.exp_m1() - t
                }
            }
            KernelKind::LogBarrier => {
                if t >= 1.0 {
                    return Err(ReferenceError::OutsideDomain(format!(
                        "log-barrier kernel needs |t| < 1, got {t}"
                    )));
                }
                if t < 1e-4 {
                    // −t − ln(1−t) = t²/2 + t³/3 + t⁴/4 + …
                    t * t / 2.0 + t * t * t / 3.0 + t * t * t * t / 4.0
                } else {
                    -t - (-t).ln_1p()
                }
            }
        };
        Ok(self.scale * v)
    }

    /// `(c·h)'(t) = c·h'(t)` for `t ≥ 0`.
    pub fn deriv(&self, t: f64) -> Result<f64, ReferenceError> {
        let t = check_arg(t)?;
        let d = match self.kind {
            KernelKind::Quadratic => t,
            KernelKind::Cosh => t.sinh(),
            KernelKind::ExpAbs => t.exp_m1(),
            KernelKind::LogBarrier => {
                if t >= 1.0 {
                    return Err(ReferenceError::OutsideDomain(format!(
                        "log-barrier kernel needs |t| < 1, got {t}"
                    )));
                }
                t / (1.0 - t)
            }
        };
        Ok(self.scale * d)
    }

    /// Gradient of the conjugate, `(c·h)*'(y) = h*'(y/c)`, for `y ≥ 0`.
    ///
    /// Closed forms: Quadratic `y/c`, Cosh `arcsinh(y/c)`, ExpAbs `ln(1+y/c)`,
    /// LogBarrier `(y/c)/(1+y/c)`. Strictly increasing, zero at zero.
    pub fn conj_grad(&self, y: f64) -> Result<f64, ReferenceError> {
        let u = check_arg(y)? / self.scale;
        Ok(match self.kind {
            KernelKind::Quadratic => u,
            KernelKind::Cosh => u.asinh(),
            KernelKind::ExpAbs => u.ln_1p(),
            // 1 − 1/(1+u) keeps monotonicity for huge u
            KernelKind::LogBarrier => u / (1.0 + u),
        })
    }

    /// Second derivative of the conjugate, `(c·h)*''(y) = h*''(y/c)/c`, `y ≥ 0`.
    pub fn conj_hess(&self, y: f64) -> Result<f64, ReferenceError> {
        let u = check_arg(y)? / self.scale;
        let h = match self.kind {
            KernelKind::Quadratic => 1.0,
            // 1/√(1+u²) via hypot to survive u² overflow
            KernelKind::Cosh => 1.0 / u.hypot(1.0),
            KernelKind::ExpAbs => 1.0 / (1.0 + u),
            KernelKind::LogBarrier => {
                // (1/d)² instead of 1/d² so huge u underflows instead of
                // overflowing the intermediate
                let inv = 1.0 / (1.0 + u);
                inv * inv
            }
        };
        Ok(h / self.scale)
    }

    /// Ratio `h*'(y)/(h*''(y)·y)` for the scaled kernel, continuously extended
    /// to 1 at the origin. This is the factor by which an isotropic
    /// preconditioned Newton step exceeds the vanilla Newton step; it is ≥ 1
    /// for the three fast-growth kernels and ≡ 1 for the quadratic one.
    pub fn step_factor(&self, y: f64) -> Result<f64, ReferenceError> {
        let u = check_arg(y)? / self.scale;
        Ok(match self.kind {
            KernelKind::Quadratic => 1.0,
            // the clamp removes 1-ulp dips of the exact ≥ 1 ratios
            KernelKind::Cosh => {
                if u < SMALL {
                    1.0 + u * u / 3.0
                } else {
                    (u.asinh() * u.hypot(1.0) / u).max(1.0)
                }
            }
            KernelKind::ExpAbs => {
                if u < SMALL {
                    1.0 + 0.5 * u
                } else {
                    (u.ln_1p() * (1.0 + u) / u).max(1.0)
                }
            }
            KernelKind::LogBarrier => 1.0 + u,
        })
    }

    /// Ratio `y/h*'(y)` for the scaled kernel, continuously extended to `c` at
    /// the origin. Uniformly bounded below by the scale for all four kinds.
    pub fn grad_ratio(&self, y: f64) -> Result<f64, ReferenceError> {
        let u = check_arg(y)? / self.scale;
        let nu1 = match self.kind {
            KernelKind::Quadratic => 1.0,
            KernelKind::Cosh => {
                if u < SMALL {
                    1.0 + u * u / 6.0
                } else {
                    u / u.asinh()
                }
            }
            KernelKind::ExpAbs => {
                if u < SMALL {
                    1.0 + 0.5 * u
                } else {
                    u / u.ln_1p()
                }
            }
            KernelKind::LogBarrier => 1.0 + u,
        };
        Ok(self.scale * nu1)
    }

    /// `c·h(h*'(y/c))`: the scalar kernel composed with its own conjugate
    /// gradient, evaluated in closed form to avoid cancellation.
    ///
    /// Closed forms (unit scale): Quadratic `y²/2`, Cosh `√(1+y²) − 1`,
    /// ExpAbs `y − ln(1+y)`, LogBarrier `ln(1+y) − y/(1+y)`.
    pub fn measure(&self, y: f64) -> Result<f64, ReferenceError> {
        let u = check_arg(y)? / self.scale;
        let m = match self.kind {
            KernelKind::Quadratic => 0.5 * u * u,
            KernelKind::Cosh => {
                if u > 1e8 {
                    u.hypot(1.0) - 1.0
                } else {
                    u * u / (u.hypot(1.0) + 1.0)
                }
            }
            KernelKind::ExpAbs => {
                if u < 1e-4 {
                    // u − ln(1+u) = u²/2 − u³/3 + u⁴/4 − …
                    u * u / 2.0 - u * u * u / 3.0 + u * u * u * u / 4.0
                } else {
                    u - u.ln_1p()
                }
            }
            KernelKind::LogBarrier => {
                if u < 1e-4 {
                    // ln(1+u) − u/(1+u) = u²/2 − 2u³/3 + 3u⁴/4 − …
                    u * u / 2.0 - 2.0 * u * u * u / 3.0 + 3.0 * u * u * u * u / 4.0
                } else {
                    u.ln_1p() - u / (1.0 + u)
                }
            }
        };
        Ok(self.scale * m)
    }
}

/// Composition pattern of the scalar kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    Isotropic,
    Separable,
}

/// Euclidean norm that survives squared-sum underflow/overflow; the tiny-input
/// behavior matters because the preconditioned gradient must vanish only at
/// exactly zero.
pub fn stable_norm(v: &DVector<f64>) -> f64 {
    let m = v.amax();
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    if (1e-140..=1e140).contains(&m) {
        v.norm()
    } else {
        (v / m).norm() * m
    }
}

/// Minimal surface the solvers need from a reference function.
///
/// Implemented by [`ReferenceFunction`]; tests and callers may supply their
/// own (e.g. a quadratic form matched to a specific objective).
pub trait Reference {
    /// `φ(z)`; errors when `z` leaves the domain.
    fn phi(&self, z: &DVector<f64>) -> Result<f64, ReferenceError>;
    /// Preconditioned gradient map `∇φ*(y)`. Vanishes exactly at `y = 0`.
    fn dual_grad(&self, y: &DVector<f64>) -> DVector<f64>;
    /// `M(y) = [∇²φ*(y)]⁻¹`, symmetric positive definite.
    fn precond_matrix(&self, y: &DVector<f64>) -> DMatrix<f64>;
    /// Apply `∇²φ*(y)` to a vector.
    fn dual_hess_apply(&self, y: &DVector<f64>, v: &DVector<f64>) -> DVector<f64>;
    /// Right-hand side `−M(y)·∇φ*(y)` of the Hessian-sided Newton system.
    fn newton_rhs(&self, y: &DVector<f64>) -> DVector<f64> {
        -(self.precond_matrix(y) * self.dual_grad(y))
    }
    /// `φ(∇φ*(y))`, the stationarity measure induced by the reference.
    fn stationarity(&self, y: &DVector<f64>) -> f64;
    /// Uniform lower bound of `‖y‖/‖∇φ*(y)‖`.
    fn ltilde(&self) -> f64;
    /// Whether the reference is an isotropic kernel composition.
    fn is_isotropic(&self) -> bool;
}

/// Isotropic or separable composition of a [`ScalarKernel`].
#[derive(Debug, Clone)]
pub struct ReferenceFunction {
    kernel: ScalarKernel,
    structure: Structure,
    dim: usize,
    ltilde: f64,
}

impl ReferenceFunction {
    pub fn new(kernel: ScalarKernel, structure: Structure, dim: usize) -> Self {
        assert!(dim > 0, "reference dimension must be positive");
        Self {
            kernel,
            structure,
            dim,
            ltilde: kernel.scale(),
        }
    }

    pub fn isotropic(kernel: ScalarKernel, dim: usize) -> Self {
        Self::new(kernel, Structure::Isotropic, dim)
    }

    pub fn separable(kernel: ScalarKernel, dim: usize) -> Self {
        Self::new(kernel, Structure::Separable, dim)
    }

    pub fn kernel(&self) -> &ScalarKernel {
        &self.kernel
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check_dim(&self, v: &DVector<f64>) {
        assert_eq!(v.len(), self.dim, "reference dimension mismatch");
    }

    /// Gradient of `φ` itself (used by conjugacy round-trip checks).
    pub fn grad_phi(&self, z: &DVector<f64>) -> Result<DVector<f64>, ReferenceError> {
        self.check_dim(z);
        match self.structure {
            Structure::Isotropic => {
                let t = stable_norm(z);
                if t == 0.0 {
                    return Ok(DVector::zeros(self.dim));
                }
                let d = self.kernel.deriv(t)?;
                Ok(z * (d / t))
            }
            Structure::Separable => {
                let mut out = DVector::zeros(self.dim);
                for i in 0..self.dim {
                    let zi = z[i];
                    out[i] = zi.signum_or_zero() * self.kernel.deriv(zi.abs())?;
                }
                Ok(out)
            }
        }
    }

    /// Step factor `α` of the isotropic fast path. Errors for separable
    /// references, where no single scalar factor exists.
    pub fn alpha(&self, gradnorm: f64) -> Result<f64, ReferenceError> {
        if self.structure != Structure::Isotropic {
            return Err(ReferenceError::NotIsotropic("alpha"));
        }
        self.kernel.step_factor(gradnorm)
    }

    /// Ratio `ν = ‖y‖/h*'(‖y‖)` of the isotropic case; always ≥ the scale.
    pub fn nu(&self, gradnorm: f64) -> Result<f64, ReferenceError> {
        if self.structure != Structure::Isotropic {
            return Err(ReferenceError::NotIsotropic("nu"));
        }
        self.kernel.grad_ratio(gradnorm)
    }

    /// Apply `M(y)` without materializing it.
    pub fn precond_apply(&self, y: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        self.check_dim(y);
        self.check_dim(v);
        match self.structure {
            Structure::Isotropic => {
                let r = stable_norm(y);
                if r == 0.0 {
                    let radial = 1.0 / self.kernel.conj_hess(0.0).expect("origin in domain");
                    return v * radial;
                }
                let radial = 1.0 / self.kernel.conj_hess(r).expect("finite norm");
                let tangential = self.kernel.grad_ratio(r).expect("finite norm");
                let yhat = y / r;
                let coef = yhat.dot(v);
                &yhat * (radial * coef) + (v - &yhat * coef) * tangential
            }
            Structure::Separable => {
                let mut out = v.clone();
                for i in 0..self.dim {
                    out[i] /= self.kernel.conj_hess(y[i].abs()).expect("finite entry");
                }
                out
            }
        }
    }

    /// Dense `∇²φ*(y)`.
    pub fn dual_hess(&self, y: &DVector<f64>) -> DMatrix<f64> {
        self.check_dim(y);
        match self.structure {
            Structure::Isotropic => {
                let r = stable_norm(y);
                if r == 0.0 {
                    let h = self.kernel.conj_hess(0.0).expect("origin in domain");
                    return DMatrix::identity(self.dim, self.dim) * h;
                }
                let radial = self.kernel.conj_hess(r).expect("finite norm");
                let tangential = 1.0 / self.kernel.grad_ratio(r).expect("finite norm");
                let yhat = y / r;
                let proj = &yhat * yhat.transpose();
                &proj * radial + (DMatrix::identity(self.dim, self.dim) - proj) * tangential
            }
            Structure::Separable => DMatrix::from_diagonal(&DVector::from_fn(self.dim, |i, _| {
                self.kernel.conj_hess(y[i].abs()).expect("finite entry")
            })),
        }
    }
}

trait SignumOrZero {
    fn signum_or_zero(self) -> f64;
}

impl SignumOrZero for f64 {
    /// Like `signum` but maps ±0 to 0, matching `barsgn(0) = 0`.
    fn signum_or_zero(self) -> f64 {
        if self == 0.0 {
            0.0
        } else {
            self.signum()
        }
    }
}

impl Reference for ReferenceFunction {
    fn phi(&self, z: &DVector<f64>) -> Result<f64, ReferenceError> {
        self.check_dim(z);
        match self.structure {
            Structure::Isotropic => self.kernel.value(stable_norm(z)),
            Structure::Separable => {
                let mut acc = 0.0;
                for i in 0..self.dim {
                    acc += self.kernel.value(z[i].abs())?;
                }
                Ok(acc)
            }
        }
    }

    fn dual_grad(&self, y: &DVector<f64>) -> DVector<f64> {
        self.check_dim(y);
        match self.structure {
            Structure::Isotropic => {
                let r = stable_norm(y);
                if r == 0.0 {
                    return DVector::zeros(self.dim);
                }
                let s = self.kernel.conj_grad(r).expect("finite norm");
                y * (s / r)
            }
            Structure::Separable => DVector::from_fn(self.dim, |i, _| {
                y[i].signum_or_zero() * self.kernel.conj_grad(y[i].abs()).expect("finite entry")
            }),
        }
    }

    fn precond_matrix(&self, y: &DVector<f64>) -> DMatrix<f64> {
        self.check_dim(y);
        match self.structure {
            Structure::Isotropic => {
                let r = stable_norm(y);
                if r == 0.0 {
                    let radial = 1.0 / self.kernel.conj_hess(0.0).expect("origin in domain");
                    return DMatrix::identity(self.dim, self.dim) * radial;
                }
                let radial = 1.0 / self.kernel.conj_hess(r).expect("finite norm");
                let tangential = self.kernel.grad_ratio(r).expect("finite norm");
                let yhat = y / r;
                let proj = &yhat * yhat.transpose();
                &proj * radial + (DMatrix::identity(self.dim, self.dim) - proj) * tangential
            }
            Structure::Separable => DMatrix::from_diagonal(&DVector::from_fn(self.dim, |i, _| {
                1.0 / self.kernel.conj_hess(y[i].abs()).expect("finite entry")
            })),
        }
    }

    fn dual_hess_apply(&self, y: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        self.check_dim(y);
        self.check_dim(v);
        match self.structure {
            Structure::Isotropic => {
                let r = stable_norm(y);
                if r == 0.0 {
                    let h = self.kernel.conj_hess(0.0).expect("origin in domain");
                    return v * h;
                }
                let radial = self.kernel.conj_hess(r).expect("finite norm");
                let tangential = 1.0 / self.kernel.grad_ratio(r).expect("finite norm");
                let yhat = y / r;
                let coef = yhat.dot(v);
                &yhat * (radial * coef) + (v - &yhat * coef) * tangential
            }
            Structure::Separable => DVector::from_fn(self.dim, |i, _| {
                v[i] * self.kernel.conj_hess(y[i].abs()).expect("finite entry")
            }),
        }
    }

    fn newton_rhs(&self, y: &DVector<f64>) -> DVector<f64> {
        self.check_dim(y);
        match self.structure {
            Structure::Isotropic => {
                let r = stable_norm(y);
                if r == 0.0 {
                    return DVector::zeros(self.dim);
                }
                let a = self.kernel.step_factor(r).expect("finite norm");
                y * (-a)
            }
            Structure::Separable => DVector::from_fn(self.dim, |i, _| {
                let u = y[i].abs();
                let ratio = self.kernel.conj_grad(u).expect("finite entry")
                    / self.kernel.conj_hess(u).expect("finite entry");
                -y[i].signum_or_zero() * ratio
            }),
        }
    }

    fn stationarity(&self, y: &DVector<f64>) -> f64 {
        self.check_dim(y);
        match self.structure {
            Structure::Isotropic => self.kernel.measure(stable_norm(y)).expect("finite norm"),
            Structure::Separable => (0..self.dim)
                .map(|i| self.kernel.measure(y[i].abs()).expect("finite entry"))
                .sum(),
        }
    }

    fn ltilde(&self) -> f64 {
        self.ltilde
    }

    fn is_isotropic(&self) -> bool {
        self.structure == Structure::Isotropic
    }
}
