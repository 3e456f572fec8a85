//! Linearised cart-pendulum model of one disk module: open- and closed-loop
//! transfer functions, pole computation, Routh-Hurwitz analysis and
//! stable-gain-region sampling.

mod poly;
mod routh;

pub use poly::Polynomial;
pub use routh::{hurwitz_test, RouthResult, StabilityVerdict};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Poles with |Re| at or below this band are reported marginal instead of
/// stable/unstable, avoiding flakiness at the origin pole of the open loop.
pub const MARGINAL_BAND: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LinModelError {
    #[error("non-finite polynomial coefficient")]
    InvalidCoefficient,
    #[error("zero polynomial is degenerate")]
    ZeroPolynomial,
    #[error("polynomial degree must be at least 1")]
    ZeroDegree,
    #[error("degenerate model: q factor {0} is not positive")]
    DegenerateModel(f64),
    #[error("invalid module parameters: {0}")]
    InvalidParams(String),
}

/// Physical constants of one disk module.
///
/// `inertia` is the pendulum moment of inertia about its pivot axis in
/// kg·m² (the source prints kg·m⁻³; the standard unit is used here).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModuleParams {
    /// Shell (cart) mass, kg.
    pub shell_mass: f64,
    /// Pendulum mass, kg.
    pub pendulum_mass: f64,
    /// Pendulum arm length, m.
    pub arm: f64,
    /// Pendulum moment of inertia, kg·m².
    pub inertia: f64,
    /// Translational viscous friction, N·s/m.
    pub damping: f64,
    /// Disk radius, m.
    pub radius: f64,
    /// Gravitational acceleration, m/s².
    pub gravity: f64,
}

impl Default for ModuleParams {
    /// The constructed module: l = 60 mm, M = 0.172 kg, m = 0.094 kg,
    /// I = 3.384e-3 kg·m². Damping and radius are not published; defaults
    /// are b = 0.01 N·s/m and r = 60 mm (pendulum tip at the rim).
    fn default() -> Self {
        Self {
            shell_mass: 0.172,
            pendulum_mass: 0.094,
            arm: 0.060,
            inertia: 3.384e-3,
            damping: 0.01,
            radius: 0.06,
            gravity: 9.81,
        }
    }
}

impl ModuleParams {
    pub fn validate(&self) -> Result<(), LinModelError> {
        let ok = self.shell_mass > 0.0
            && self.pendulum_mass > 0.0
            && self.arm > 0.0
            && self.inertia > 0.0
            && self.radius > 0.0
            && self.damping >= 0.0
            && self.gravity >= 0.0;
        if !ok {
            return Err(LinModelError::InvalidParams(format!("{self:?}")));
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.shell_mass + self.pendulum_mass
    }
}

/// PD controller gains, C(s) = kp + kd s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdGains {
    pub kp: f64,
    pub kd: f64,
}

impl Default for PdGains {
    /// The deployed gains kp = 2.5, kd = 0.5.
    fn default() -> Self {
        Self { kp: 2.5, kd: 0.5 }
    }
}

/// Ratio of real-coefficient polynomials in the Laplace variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferFunction {
    pub numerator: Polynomial,
    pub denominator: Polynomial,
}

impl TransferFunction {
    pub fn new(numerator: Polynomial, denominator: Polynomial) -> Result<Self, LinModelError> {
        if denominator.is_zero() {
            return Err(LinModelError::ZeroPolynomial);
        }
        Ok(Self {
            numerator,
            denominator,
        })
    }

    /// Frequency-response value at s = jω.
    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.numerator.eval(s) / self.denominator.eval(s)
    }

    /// Steady-state amplitude gain at angular frequency ω rad/s.
    pub fn magnitude_at(&self, omega: f64) -> f64 {
        self.eval(Complex64::new(0.0, omega)).norm()
    }

    /// Denominator roots.
    pub fn poles(&self) -> Result<Vec<Complex64>, LinModelError> {
        if self.denominator.degree() < 1 {
            return Err(LinModelError::ZeroDegree);
        }
        self.denominator.roots()
    }
}

/// q = (M + m)(I + m l²) − (m l)².
pub fn q_factor(p: &ModuleParams) -> f64 {
    let ml = p.pendulum_mass * p.arm;
    p.total_mass() * (p.inertia + ml * p.arm) - ml * ml
}

/// Open-loop pendulum transfer function T_p(s) = θ/F.
///
/// Numerator (m l / q) s; denominator
/// s³ + [b (I + m l²)/q] s² − [(M + m) m g l / q] s − [b m g l / q].
pub fn open_loop_tf(p: &ModuleParams) -> Result<TransferFunction, LinModelError> {
    p.validate()?;
    let q = q_factor(p);
    if q <= 0.0 {
        return Err(LinModelError::DegenerateModel(q));
    }
    let (m, l, b, g) = (p.pendulum_mass, p.arm, p.damping, p.gravity);
    let i_eff = p.inertia + m * l * l;
    let num = Polynomial::new(vec![0.0, m * l / q])?;
    let den = Polynomial::new(vec![
        -b * m * g * l / q,
        -p.total_mass() * m * g * l / q,
        b * i_eff / q,
        1.0,
    ])?;
    TransferFunction::new(num, den)
}

/// Closed-loop transfer function T_f(s) with PD feedback C(s) = kp + kd s.
///
/// Denominator s³ + [b (I + m l²) + kd l m]/q s² + [kp l m − (M + m) m g l]/q s
/// − b g l m / q; numerator (l m / q) s.
pub fn closed_loop_tf(p: &ModuleParams, gains: &PdGains) -> Result<TransferFunction, LinModelError> {
    p.validate()?;
    let q = q_factor(p);
    if q <= 0.0 {
        return Err(LinModelError::DegenerateModel(q));
    }
    let (m, l, b, g) = (p.pendulum_mass, p.arm, p.damping, p.gravity);
    let i_eff = p.inertia + m * l * l;
    let num = Polynomial::new(vec![0.0, m * l / q])?;
    let den = Polynomial::new(vec![
        -b * g * l * m / q,
        (gains.kp * l * m - p.total_mass() * m * g * l) / q,
        (b * i_eff + gains.kd * l * m) / q,
        1.0,
    ])?;
    TransferFunction::new(num, den)
}

/// Evaluation of the two published gain inequalities:
/// b (I + m l²) + kd l m > 0 and kp l m − (M + m) m g l > 0.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GainConditions {
    pub condition1: bool,
    /// Left-hand side of condition 1.
    pub margin1: f64,
    pub condition2: bool,
    /// Left-hand side of condition 2.
    pub margin2: f64,
    /// Minimal kp satisfying condition 2: (M + m) g.
    pub min_kp: f64,
    /// Set when the derivation's assumption m < M does not hold; the
    /// conditions are still evaluated.
    pub assumption_violated: bool,
}

/// Evaluates the published gain inequalities with signed margins.
pub fn published_gain_conditions(p: &ModuleParams, gains: &PdGains) -> Result<GainConditions, LinModelError> {
    p.validate()?;
    let q = q_factor(p);
    if q <= 0.0 {
        return Err(LinModelError::DegenerateModel(q));
    }
    let (m, l, b, g) = (p.pendulum_mass, p.arm, p.damping, p.gravity);
    let margin1 = b * (p.inertia + m * l * l) + gains.kd * l * m;
    let margin2 = gains.kp * l * m - p.total_mass() * m * g * l;
    Ok(GainConditions {
        condition1: margin1 > 0.0,
        margin1,
        condition2: margin2 > 0.0,
        margin2,
        min_kp: p.total_mass() * g,
        assumption_violated: p.pendulum_mass >= p.shell_mass,
    })
}

/// Boolean stability grid over a (kp, kd) rectangle, per full Routh-Hurwitz
/// test on the closed-loop denominator.
#[derive(Debug, Clone)]
pub struct GainGrid {
    pub kp_values: Vec<f64>,
    pub kd_values: Vec<f64>,
    /// `stable[i][j]` is the verdict at (kp_values[i], kd_values[j]).
    pub stable: Vec<Vec<bool>>,
}

impl GainGrid {
    /// CSV with header `kp,kd,stable`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kp,kd,stable\n");
        for (i, kp) in self.kp_values.iter().enumerate() {
            for (j, kd) in self.kd_values.iter().enumerate() {
                out.push_str(&format!("{kp},{kd},{}\n", self.stable[i][j] as u8));
            }
        }
        out
    }
}

/// Samples the full Hurwitz verdict on an n×n gain grid. Cells are
/// independent; evaluation order does not affect the result.
pub fn stable_gain_region(
    p: &ModuleParams,
    kp_range: (f64, f64),
    kd_range: (f64, f64),
    n: usize,
) -> Result<GainGrid, LinModelError> {
    if n < 2 || !kp_range.0.is_finite() || !kp_range.1.is_finite() || !kd_range.0.is_finite() || !kd_range.1.is_finite() {
        return Err(LinModelError::InvalidParams(
            "gain sweep needs finite ranges and n >= 2".into(),
        ));
    }
    let lin = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (n - 1) as f64;
    let kp_values: Vec<f64> = (0..n).map(|i| lin(kp_range.0, kp_range.1, i)).collect();
    let kd_values: Vec<f64> = (0..n).map(|i| lin(kd_range.0, kd_range.1, i)).collect();
    let mut stable = vec![vec![false; n]; n];
    for (i, &kp) in kp_values.iter().enumerate() {
        for (j, &kd) in kd_values.iter().enumerate() {
            let tf = closed_loop_tf(p, &PdGains { kp, kd })?;
            stable[i][j] = hurwitz_test(&tf.denominator)?.is_stable();
        }
    }
    Ok(GainGrid {
        kp_values,
        kd_values,
        stable,
    })
}
