use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::LinModelError;

/// Real-coefficient polynomial, coefficients stored in ascending degree order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Builds a polynomial from ascending-degree coefficients, trimming
    /// trailing zeros so the leading coefficient is nonzero (or the
    /// polynomial is the zero polynomial).
    pub fn new(coeffs: Vec<f64>) -> Result<Self, LinModelError> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(LinModelError::InvalidCoefficient);
        }
        let mut coeffs = coeffs;
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Ok(Self { coeffs })
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![0.0] }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Ascending-degree coefficients.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of s^k (0 beyond the stored degree).
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
    }

    /// All roots via companion-matrix eigenvalues.
    pub fn roots(&self) -> Result<Vec<Complex64>, LinModelError> {
        if self.is_zero() {
            return Err(LinModelError::ZeroPolynomial);
        }
        // Deflate exact zero roots first. Besides being free accuracy, this
        // sidesteps the QR iteration, which can fail to converge on the
        // nilpotent companion matrix of s^n.
        let mut zero_roots = 0;
        let mut coeffs: &[f64] = &self.coeffs;
        while coeffs.len() > 1 && coeffs[0] == 0.0 {
            zero_roots += 1;
            coeffs = &coeffs[1..];
        }
        let n = coeffs.len() - 1;
        let mut roots: Vec<Complex64> =
            std::iter::repeat(Complex64::new(0.0, 0.0)).take(zero_roots).collect();
        if n > 0 {
            let lead = coeffs[n];
            let mut companion = DMatrix::<f64>::zeros(n, n);
            for i in 1..n {
                companion[(i, i - 1)] = 1.0;
            }
            for i in 0..n {
                companion[(i, n - 1)] = -coeffs[i] / lead;
            }
            let eig = companion.complex_eigenvalues();
            roots.extend(eig.iter().copied());
        }
        // deterministic ordering
        roots.sort_by(|a, b| {
            a.re.partial_cmp(&b.re)
                .unwrap()
                .then(a.im.partial_cmp(&b.im).unwrap())
        });
        Ok(roots)
    }
}
