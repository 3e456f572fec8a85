//! PD velocity-mode pendulum controller with setpoint profiles, output
//! saturation, and rate limiting.
//!
//! The control law is `u = kp*(theta - theta_d) + kd*(theta_dot - theta_dot_d)`,
//! taken verbatim with the actual-minus-desired error. Under the usual
//! convention that is positive feedback; the loop sign is closed by the plant
//! side, where the motor command applied to the servo is
//! [`MOTOR_COMMAND_SIGN`]` * u`. Keeping the sign in one named constant makes
//! the convention auditable instead of being absorbed silently by wiring.

use crate::linmodel::PdGains;

/// Sign applied to the controller output `u` before it is handed to the motor
/// model as a velocity command.
///
/// With the error defined as actual-minus-desired, a positive `u` must spin
/// the servo so that its reaction rotates the shell opposite to the pendulum
/// deflection; on this plant that requires the negative sign.
pub const MOTOR_COMMAND_SIGN: f64 = -1.0;

/// Desired pendulum angle and rate handed to the PD law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setpoint {
    /// Desired pendulum angle, rad.
    pub theta_d: f64,
    /// Desired pendulum angular rate, rad/s.
    pub theta_dot_d: f64,
}

impl Setpoint {
    pub fn new(theta_d: f64, theta_dot_d: f64) -> Self {
        Self { theta_d, theta_dot_d }
    }

    /// A constant setpoint with zero desired rate.
    pub fn hold(theta_d: f64) -> Self {
        Self { theta_d, theta_dot_d: 0.0 }
    }
}

/// Servo velocity-mode limits: speed clamp plus rate-of-change clamp.
#[derive(Debug, Clone, Copy)]
pub struct ActuatorLimits {
    /// Magnitude bound on the commanded speed, rad/s.
    pub max_speed: f64,
    /// Magnitude bound on the command slew rate, rad/s^2.
    pub max_accel: f64,
}

impl Default for ActuatorLimits {
    /// Gentle defaults that avoid the abrupt speed changes which can shake a
    /// magnetically coupled pair apart mid-manoeuvre.
    fn default() -> Self {
        Self {
            max_speed: 2.0 * std::f64::consts::PI,
            max_accel: 4.0 * std::f64::consts::PI,
        }
    }
}

impl ActuatorLimits {
    pub fn validate(&self) -> Result<(), ControlError> {
        if !(self.max_speed > 0.0 && self.max_speed.is_finite()) {
            return Err(ControlError::InvalidParameter {
                name: "max_speed",
                value: self.max_speed,
            });
        }
        if !(self.max_accel > 0.0 && self.max_accel.is_finite()) {
            return Err(ControlError::InvalidParameter {
                name: "max_accel",
                value: self.max_accel,
            });
        }
        Ok(())
    }
}

/// How a [`SetpointProfile`] fills the space between knots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    /// Piecewise constant: the last knot at time <= t applies.
    Hold,
    /// Piecewise linear in `theta_d`; `theta_dot_d` is the slope of the
    /// interpolant (the stored knot rates are ignored between knots).
    Linear,
}

/// A timed sequence of setpoints, the scripted "plan" a scenario follows.
#[derive(Debug, Clone)]
pub struct SetpointProfile {
    knots: Vec<(f64, Setpoint)>,
    pub mode: Interpolation,
}

#[derive(Debug, thiserror::Error)]
pub enum ControlError {
    #[error("{name} must be positive and finite, got {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("profile needs at least one knot")]
    EmptyProfile,
    #[error("knot times must be strictly increasing: t[{index}] = {time} does not advance")]
    NonIncreasingKnots { index: usize, time: f64 },
}

impl SetpointProfile {
    /// Builds a profile, checking the knot times are strictly increasing.
    pub fn new(knots: Vec<(f64, Setpoint)>, mode: Interpolation) -> Result<Self, ControlError> {
        if knots.is_empty() {
            return Err(ControlError::EmptyProfile);
        }
        for (i, pair) in knots.windows(2).enumerate() {
            if !(pair[1].0 > pair[0].0) {
                return Err(ControlError::NonIncreasingKnots {
                    index: i + 1,
                    time: pair[1].0,
                });
            }
        }
        Ok(Self { knots, mode })
    }

    /// A single-knot constant profile.
    pub fn constant(sp: Setpoint) -> Self {
        Self {
            knots: vec![(0.0, sp)],
            mode: Interpolation::Hold,
        }
    }

    pub fn knots(&self) -> &[(f64, Setpoint)] {
        &self.knots
    }

    /// Evaluates the profile at time `t`.
    ///
    /// Before the first knot the first knot applies. In hold mode the last
    /// knot at time <= t applies; in linear mode `theta_d` is interpolated and
    /// `theta_dot_d` is the interpolant's slope (zero beyond the last knot).
    pub fn sample(&self, t: f64) -> Setpoint {
        let first = &self.knots[0];
        if t <= first.0 {
            return match self.mode {
                Interpolation::Hold => first.1,
                // Before the plan starts nothing is moving yet.
                Interpolation::Linear => Setpoint::hold(first.1.theta_d),
            };
        }
        // Index of the last knot with time <= t.
        let idx = match self
            .knots
            .binary_search_by(|(kt, _)| kt.partial_cmp(&t).expect("finite knot times"))
        {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        match self.mode {
            Interpolation::Hold => self.knots[idx].1,
            Interpolation::Linear => {
                if idx + 1 >= self.knots.len() {
                    return Setpoint::hold(self.knots[idx].1.theta_d);
                }
                let (t0, a) = self.knots[idx];
                let (t1, b) = self.knots[idx + 1];
                let slope = (b.theta_d - a.theta_d) / (t1 - t0);
                Setpoint::new(a.theta_d + slope * (t - t0), slope)
            }
        }
    }
}

/// The PD law exactly as written: `u = kp*(theta - theta_d) + kd*(theta_dot - theta_dot_d)`.
pub fn pd_output(gains: &PdGains, theta: f64, theta_dot: f64, sp: &Setpoint) -> f64 {
    gains.kp * (theta - sp.theta_d) + gains.kd * (theta_dot - sp.theta_dot_d)
}

/// Clamps `u` to the speed limit, then clamps its change from `prev_u` to the
/// rate limit. Idempotent when `u` already satisfies both limits.
pub fn saturate(u: f64, prev_u: f64, dt: f64, lim: &ActuatorLimits) -> f64 {
    debug_assert!(dt > 0.0);
    let speed_limited = u.clamp(-lim.max_speed, lim.max_speed);
    let max_step = lim.max_accel * dt;
    speed_limited.clamp(prev_u - max_step, prev_u + max_step)
}

/// Stateful per-module controller: samples the profile, applies the PD law,
/// then saturates against its own previous output.
///
/// One instance per module; the only state carried across steps is `prev_u`.
#[derive(Debug, Clone)]
pub struct PdController {
    pub gains: PdGains,
    pub profile: SetpointProfile,
    pub limits: ActuatorLimits,
    prev_u: f64,
}

impl PdController {
    pub fn new(gains: PdGains, profile: SetpointProfile, limits: ActuatorLimits) -> Self {
        Self {
            gains,
            profile,
            limits,
            prev_u: 0.0,
        }
    }

    /// Computes the saturated velocity command at time `t` and records it as
    /// the new rate-limit reference.
    pub fn update(&mut self, t: f64, theta: f64, theta_dot: f64, dt: f64) -> f64 {
        let sp = self.profile.sample(t);
        let raw = pd_output(&self.gains, theta, theta_dot, &sp);
        let out = saturate(raw, self.prev_u, dt, &self.limits);
        self.prev_u = out;
        out
    }

    pub fn reset(&mut self) {
        self.prev_u = 0.0;
    }
}
