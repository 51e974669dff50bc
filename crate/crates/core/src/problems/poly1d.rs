//! One-dimensional polynomial objectives.

use nalgebra::{DMatrix, DVector};

use super::Objective;

/// Polynomial `f(x) = Σ aᵢ xⁱ` with coefficients in ascending degree.
#[derive(Debug, Clone)]
pub struct Poly1D {
    coeffs: Vec<f64>,
}

impl Poly1D {
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "polynomial needs at least one coefficient");
        Self { coeffs }
    }

    /// `f(x) = x^p/p + x²/2` for even `p ≥ 2`; the benchmark family.
    pub fn power_family(p: usize) -> Self {
        assert!(p >= 2 && p.is_multiple_of(2), "family exponent must be even and >= 2");
        let mut coeffs = vec![0.0; p + 1];
        coeffs[2] += 0.5;
        coeffs[p] += 1.0 / p as f64;
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Horner evaluation of `(f, f', f'', f''')` in one sweep.
    pub fn eval4(&self, x: f64) -> (f64, f64, f64, f64) {
        let (mut p0, mut p1, mut p2, mut p3) = (0.0, 0.0, 0.0, 0.0);
        for &a in self.coeffs.iter().rev() {
            p3 = p3 * x + p2;
            p2 = p2 * x + p1;
            p1 = p1 * x + p0;
            p0 = p0 * x + a;
        }
        (p0, p1, 2.0 * p2, 6.0 * p3)
    }
}

impl Objective for Poly1D {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.eval4(x[0]).0
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, self.eval4(x[0]).1)
    }
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, self.eval4(x[0]).2)
    }
    fn lower_bound_hint(&self) -> Option<f64> {
        // the power family is nonnegative with minimum 0 at the origin
        let is_family = self
            .coeffs
            .iter()
            .enumerate()
            .all(|(i, &a)| a == 0.0 || i == 2 || (i >= 2 && i % 2 == 0 && a > 0.0));
        if is_family {
            Some(0.0)
        } else {
            None
        }
    }
}
