use super::{LinModelError, Polynomial};

/// Outcome of the Routh-Hurwitz first-column test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityVerdict {
    Stable,
    Unstable,
    /// A zero first-column entry was bridged by epsilon substitution; the
    /// sign pattern alone cannot distinguish marginal from strictly stable.
    Marginal,
}

/// Routh-Hurwitz test result with the first column retained for diagnostics.
#[derive(Debug, Clone)]
pub struct RouthResult {
    pub verdict: StabilityVerdict,
    pub first_column: Vec<f64>,
    /// True when an epsilon substitution was needed somewhere in the table.
    pub epsilon_substituted: bool,
}

impl RouthResult {
    pub fn is_stable(&self) -> bool {
        self.verdict == StabilityVerdict::Stable
    }
}

/// Routh-Hurwitz stability criterion on a real polynomial.
///
/// Stable iff every first-column entry shares the sign of the leading
/// coefficient. Zero entries are replaced by a small epsilon of the leading
/// coefficient's sign and the result is flagged marginal.
pub fn hurwitz_test(poly: &Polynomial) -> Result<RouthResult, LinModelError> {
    if poly.is_zero() {
        return Err(LinModelError::ZeroPolynomial);
    }
    let n = poly.degree();
    if n == 0 {
        return Err(LinModelError::ZeroDegree);
    }
    let lead = poly.coeff(n);
    // row scale for the epsilon substitution
    let scale: f64 = poly.coeffs().iter().map(|c| c.abs()).fold(0.0, f64::max);
    let eps = scale * 1e-12;

    // Rows 0 and 1 of the Routh table from alternating coefficients,
    // highest degree first.
    let width = n / 2 + 1;
    let mut row0 = vec![0.0; width];
    let mut row1 = vec![0.0; width];
    for j in 0..width {
        row0[j] = if 2 * j <= n { poly.coeff(n - 2 * j) } else { 0.0 };
        row1[j] = if 2 * j + 1 <= n {
            poly.coeff(n - 2 * j - 1)
        } else {
            0.0
        };
    }

    let mut first_column = vec![row0[0]];
    let mut epsilon_substituted = false;
    let mut prev = row0;
    let mut curr = row1;

    for _ in 1..=n {
        let mut pivot = curr[0];
        if pivot == 0.0 {
            pivot = lead.signum() * eps;
            epsilon_substituted = true;
        }
        first_column.push(pivot);
        let mut next = vec![0.0; curr.len()];
        for j in 0..curr.len() - 1 {
            next[j] = (pivot * prev[j + 1] - prev[0] * curr[j + 1]) / pivot;
        }
        prev = curr;
        prev[0] = pivot;
        curr = next;
    }
    first_column.truncate(n + 1);

    let lead_sign = lead.signum();
    let all_same = first_column.iter().all(|&v| v.signum() == lead_sign && v != 0.0);
    let verdict = if !all_same {
        StabilityVerdict::Unstable
    } else if epsilon_substituted {
        StabilityVerdict::Marginal
    } else {
        StabilityVerdict::Stable
    };
    Ok(RouthResult {
        verdict,
        first_column,
        epsilon_substituted,
    })
}
