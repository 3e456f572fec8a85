//! Nonlinear planar rigid-body simulation of one or two disk modules.
//!
//! Each module is a circular shell (mass `M`, spin inertia `J_s`) with an
//! internal pendulum (point mass `m` at arm `l`, pivot inertia `I + m l^2`)
//! driven by a velocity-mode servo acting equal-and-opposite between pendulum
//! and shell. Two engines share the same module model:
//!
//! * [`line::LineEngine`] — shell centers confined to a straight line:
//!   upright rolling with Karnopp stick-slip ground contact, or the side-lying
//!   regime with no in-plane gravity. Handles one or two modules with magnetic
//!   coupling, face contact, and face friction.
//! * [`orbit::OrbitEngine`] — one module anchored at the origin, the other
//!   free in the plane and coupled to it at the rim: the fixed-link pivot and
//!   the stacked balance plant.
//!
//! Integration is fixed-step RK4; regime transitions, coupling-flag updates,
//! and bond breakage are detected at step boundaries. Everything is pure
//! `f64` arithmetic with no hidden state, so identical inputs give bitwise
//! identical logs.

pub mod line;
pub mod log;
pub mod orbit;

pub use self::log::{Sample, TrajectoryLog};
pub use line::{
    mechanical_energy, single_module_derivative, two_module_derivative, LineEngine,
    ModuleDerivative,
};
pub use orbit::OrbitEngine;

use crate::control::{PdController, MOTOR_COMMAND_SIGN};
use crate::linmodel::ModuleParams;
use crate::magnetics::{attraction_at, MagneticsError, MagnetArray};

/// Out-of-plane gravity used for support (table/ground) normal forces, m/s^2.
/// Distinct from [`ModuleParams::gravity`], which is the in-plane component
/// acting on the pendulum and is zeroed in the side-lying regime.
pub const SUPPORT_G: f64 = 9.81;

/// Angular-velocity scale below which rotation-opposing torques are
/// regularized linearly instead of switching sign discontinuously, rad/s.
pub const OMEGA_EPS: f64 = 1e-3;

/// Surface gap below which two modules count as coupled, m.
pub const COUPLING_GAP_TOL: f64 = 1e-3;

/// Penetration beyond this depth means the penalty contact has failed, m.
pub const PENETRATION_TOL: f64 = 5e-3;

#[derive(Debug, thiserror::Error)]
pub enum DynamicsError {
    #[error("normal force went negative at t = {t}: lift-off is outside the modelled scope")]
    LiftOff { t: f64 },
    #[error("penetration beyond tolerance at t = {t}: contact solver failed (gap = {gap} m)")]
    Penetration { t: f64, gap: f64 },
    #[error("state diverged (NaN/Inf) at t = {t}")]
    Divergence { t: f64 },
    #[error("invalid dynamics parameter: {0}")]
    InvalidParameter(String),
    #[error("magnetics error: {0}")]
    Magnetics(#[from] MagneticsError),
    #[error("bad trajectory log: {0}")]
    BadLog(String),
}

/// Ground-contact regime of one module.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContactRegime {
    /// Rolling without slip; `x_dot = r * phi_dot` holds.
    Stick,
    /// Sliding contact (also used for the side-lying regime, where the shell
    /// spins freely on its face).
    Slip,
    /// Module is fixed to the world.
    Anchored,
}

impl ContactRegime {
    pub fn as_str(self) -> &'static str {
        match self {
            ContactRegime::Stick => "stick",
            ContactRegime::Slip => "slip",
            ContactRegime::Anchored => "anchored",
        }
    }

    pub fn from_str(s: &str) -> Option<Self> {
        match s {
            "stick" => Some(ContactRegime::Stick),
            "slip" => Some(ContactRegime::Slip),
            "anchored" => Some(ContactRegime::Anchored),
            _ => None,
        }
    }
}

/// Kinematic state of one module on the line.
///
/// `phi` is the rolling angle, positive when the shell rolls toward +x, so
/// the stick constraint reads `x_dot = radius * phi_dot`. In the side-lying
/// regime the same slot stores the world-frame (counterclockwise) spin angle.
/// `theta` is the pendulum angle from the downward vertical, positive
/// counterclockwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModuleState {
    pub x: f64,
    pub x_dot: f64,
    pub phi: f64,
    pub phi_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
    pub regime: ContactRegime,
}

impl ModuleState {
    pub fn at_rest() -> Self {
        Self {
            x: 0.0,
            x_dot: 0.0,
            phi: 0.0,
            phi_dot: 0.0,
            theta: 0.0,
            theta_dot: 0.0,
            regime: ContactRegime::Stick,
        }
    }

    pub fn is_finite(&self) -> bool {
        [
            self.x,
            self.x_dot,
            self.phi,
            self.phi_dot,
            self.theta,
            self.theta_dot,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Full planar multi-body state at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub modules: Vec<ModuleState>,
    /// Inter-module surface distance, m (0 for single-module worlds).
    pub gap: f64,
    pub coupled: bool,
    pub t: f64,
}

/// Karnopp stick-slip contact parameters.
#[derive(Debug, Clone, Copy)]
pub struct FrictionParams {
    /// Static friction coefficient at the ground contact.
    pub mu_s: f64,
    /// Kinetic friction coefficient at the ground contact.
    pub mu_k: f64,
    /// Friction coefficient at the disk-disk face contact.
    pub mu_disk: f64,
    /// Contact-point speed below which stick capture is attempted, m/s; also
    /// the regularization scale for sliding-force sign changes.
    pub v_eps: f64,
}

impl Default for FrictionParams {
    fn default() -> Self {
        Self {
            mu_s: 0.6,
            mu_k: 0.5,
            mu_disk: 0.3,
            v_eps: 1e-4,
        }
    }
}

/// In-plane gravity handling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GravityMode {
    /// Disk rolls on the ground; gravity acts on the pendulum in the plane.
    Upright,
    /// Disk lies on its face; no in-plane gravity, the shell spins instead of
    /// rolling.
    Side,
}

/// Velocity-mode servo between pendulum and shell: the torque tracks a speed
/// command with proportional stiffness, clamped to the stall torque.
#[derive(Debug, Clone, Copy)]
pub struct ServoParams {
    /// Torque per unit speed error, N·m·s/rad.
    pub k_servo: f64,
    /// Stall torque clamp, N·m.
    pub tau_max: f64,
}

impl Default for ServoParams {
    fn default() -> Self {
        Self {
            k_servo: 1.0,
            tau_max: 1.5,
        }
    }
}

impl ServoParams {
    /// Torque on the pendulum for a speed command `c` at relative
    /// pendulum-vs-shell speed `omega_rel`.
    pub fn torque(&self, c: f64, omega_rel: f64) -> f64 {
        (self.k_servo * (c - omega_rel)).clamp(-self.tau_max, self.tau_max)
    }
}

/// One-sided torsional spring-damper limiting the pendulum's travel relative
/// to the shell (the servo bracket's mechanical stop).
#[derive(Debug, Clone, Copy)]
pub struct HardStop {
    /// Stop position, rad of relative travel (engaged symmetrically at ±).
    pub angle: f64,
    /// N·m/rad past the stop.
    pub stiffness: f64,
    /// N·m·s/rad past the stop.
    pub damping: f64,
}

impl Default for HardStop {
    fn default() -> Self {
        Self {
            angle: 150f64.to_radians(),
            stiffness: 50.0,
            damping: 0.5,
        }
    }
}

impl HardStop {
    /// Restoring torque at relative angle `rel`, rate `rel_dot`; zero inside
    /// the stops. The damper only ever pushes away from the stop.
    pub fn torque(&self, rel: f64, rel_dot: f64) -> f64 {
        if rel > self.angle {
            (-self.stiffness * (rel - self.angle) - self.damping * rel_dot).min(0.0)
        } else if rel < -self.angle {
            (-self.stiffness * (rel + self.angle) - self.damping * rel_dot).max(0.0)
        } else {
            0.0
        }
    }
}

/// Complete physical description of one module.
#[derive(Debug, Clone)]
pub struct ModulePhysics {
    pub params: ModuleParams,
    /// Shell spin inertia about its center, kg·m². Zero is allowed and pins
    /// the module in the stick regime (the shell becomes a pure translator).
    pub shell_inertia: f64,
    pub servo: ServoParams,
    /// Rolling-resistance coefficient: opposing torque
    /// `c_rr * weight * radius`, regularized near zero rolling speed.
    pub rolling_resistance: f64,
    pub stop: Option<HardStop>,
}

impl Default for ModulePhysics {
    fn default() -> Self {
        let params = ModuleParams::default();
        // Uniform disk unless overridden.
        let shell_inertia = 0.5 * params.shell_mass * params.radius * params.radius;
        Self {
            params,
            shell_inertia,
            servo: ServoParams::default(),
            rolling_resistance: 0.005,
            stop: None,
        }
    }
}

impl ModulePhysics {
    /// Pendulum inertia about its pivot, kg·m².
    pub fn pivot_inertia(&self) -> f64 {
        self.params.inertia + self.params.pendulum_mass * self.params.arm * self.params.arm
    }

    /// Total module mass, kg.
    pub fn total_mass(&self) -> f64 {
        self.params.shell_mass + self.params.pendulum_mass
    }
}

/// Linear penalty contact between disk faces or rims.
#[derive(Debug, Clone, Copy)]
pub struct ContactPenalty {
    /// N/m of penetration.
    pub stiffness: f64,
    /// N·s/m of closing speed (chosen near critical damping for the module
    /// mass, so impacts capture instead of bouncing).
    pub damping: f64,
}

impl Default for ContactPenalty {
    fn default() -> Self {
        Self {
            stiffness: 1e5,
            damping: 240.0,
        }
    }
}

impl ContactPenalty {
    /// Normal force for penetration depth `pen` (> 0 when overlapping) and
    /// closing speed `closing` (> 0 when approaching); never adhesive.
    pub fn normal(&self, pen: f64, closing: f64) -> f64 {
        if pen <= 0.0 {
            0.0
        } else {
            (self.stiffness * pen + self.damping * closing).max(0.0)
        }
    }
}

/// Tangential shear bond between the two coupled magnet faces: a stiff
/// spring-damper while the faces grip, releasing permanently once the shear
/// demand exceeds what the magnetic squeeze can carry.
#[derive(Debug, Clone, Copy)]
pub struct BondParams {
    /// N/m of tangential misalignment.
    pub stiffness: f64,
    /// N·s/m.
    pub damping: f64,
    /// Shear capacity per newton of magnetic attraction (a friction
    /// coefficient between the touching magnet faces).
    pub grip: f64,
    /// Misalignment beyond which the arrays no longer overlap, m.
    pub max_stretch: f64,
}

impl Default for BondParams {
    fn default() -> Self {
        Self {
            stiffness: 3000.0,
            damping: 100.0,
            grip: 0.6,
            max_stretch: 6e-3,
        }
    }
}

/// Friction of a face-lying module against the table (side/orbit regimes).
#[derive(Debug, Clone, Copy)]
pub struct SideSupport {
    /// Sliding coefficient for center translation.
    pub mu_table: f64,
    /// Effective lever arm of the spin drag torque, m (the module rests on a
    /// small hub patch, so spinning in place costs far less than sliding).
    pub spin_drag_radius: f64,
}

impl Default for SideSupport {
    fn default() -> Self {
        Self {
            mu_table: 0.002,
            spin_drag_radius: 1e-3,
        }
    }
}

/// Magnet arrays sit `recess` behind each shell face, so the array gap is the
/// shell gap plus twice the recess. This default is calibrated so the
/// face-contact attraction of the "H" preset against its negated partner is a
/// few newtons — strong enough to hold a coupled pair, weak enough that the
/// pair can still be pulled apart by dynamic loads.
pub const DEFAULT_ARRAY_RECESS_M: f64 = 0.013;

/// Precomputed attraction-vs-gap curve, linearly interpolated. The pairwise
/// cell force is smooth and slowly varying at these distances, so a fine
/// table is indistinguishable from the exact sum inside the integrator while
/// being orders of magnitude cheaper.
#[derive(Debug, Clone)]
pub struct AttractionTable {
    step: f64,
    values: Vec<f64>,
}

impl AttractionTable {
    /// Samples `attraction_at(a, b, gap + 2 * recess)` on a uniform grid of
    /// shell gaps from 0 to `max_gap`.
    pub fn build(
        a: &MagnetArray,
        b: &MagnetArray,
        recess: f64,
        max_gap: f64,
        step: f64,
    ) -> Result<Self, DynamicsError> {
        if !(step > 0.0 && max_gap > step && recess > 0.0) {
            return Err(DynamicsError::InvalidParameter(
                "attraction table needs positive step, recess, and range".into(),
            ));
        }
        let n = (max_gap / step).ceil() as usize + 1;
        let mut values = Vec::with_capacity(n);
        for i in 0..n {
            let gap = (i as f64 * step + 2.0 * recess).max(1e-6);
            values.push(attraction_at(a, b, gap)?);
        }
        Ok(Self { step, values })
    }

    /// Attraction magnitude at shell gap `gap` (clamped below 0, zero beyond
    /// the table).
    pub fn at(&self, gap: f64) -> f64 {
        let g = gap.max(0.0);
        let pos = g / self.step;
        let i = pos.floor() as usize;
        if i + 1 >= self.values.len() {
            return 0.0;
        }
        let frac = pos - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }
}

/// Magnetic coupling between two facing modules.
#[derive(Debug, Clone)]
pub struct CouplingModel {
    pub table: AttractionTable,
    /// Overall force multiplier (1.0 nominal; used by weakened-magnet
    /// probes).
    pub scale: f64,
}

impl CouplingModel {
    /// Builds the nominal pairing: the given array coupled to its negated
    /// mirror image (opposite surface polarity, which is the attracting
    /// orientation).
    pub fn for_array(array: &MagnetArray, recess: f64) -> Result<Self, DynamicsError> {
        let table = AttractionTable::build(array, &array.negated(), recess, 0.4, 2e-4)?;
        Ok(Self { table, scale: 1.0 })
    }

    pub fn attraction(&self, gap: f64) -> f64 {
        self.scale * self.table.at(gap)
    }
}

/// What drives a module's motor.
#[derive(Debug, Clone)]
pub enum Drive {
    /// Servo unpowered.
    None,
    /// Constant torque straight onto the pendulum, bypassing the servo
    /// (test/diagnostic input).
    Torque(f64),
    /// Constant speed command through the servo.
    Speed(f64),
    /// Closed-loop PD speed command through the servo.
    Pd(PdController),
}

/// Motor input handed to the engine for one step, after the controller side
/// (sign convention, saturation) has been applied.
#[derive(Debug, Clone, Copy)]
pub enum MotorCmd {
    Torque(f64),
    /// Servo speed command, rad/s of relative pendulum-vs-shell speed.
    Servo(f64),
}

/// Simulation run settings.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub duration: f64,
    pub gravity_mode: GravityMode,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.dt > 0.0 && self.dt <= 1e-3) {
            return Err(DynamicsError::InvalidParameter(format!(
                "dt must be in (0, 1e-3], got {}",
                self.dt
            )));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(DynamicsError::InvalidParameter(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        Ok(())
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            duration: 10.0,
            gravity_mode: GravityMode::Upright,
        }
    }
}

/// A run's result: the log, plus the error when it aborted early. The log's
/// `divergence` field mirrors the error text so CSV consumers see the flag.
#[derive(Debug)]
pub struct RunOutcome {
    pub log: TrajectoryLog,
    pub error: Option<DynamicsError>,
}

impl RunOutcome {
    pub fn diverged(&self) -> bool {
        self.error.is_some()
    }
}

/// The integrable core each engine implements. State is a flat `f64` vector;
/// the engine owns all event bookkeeping (regimes, coupling flags).
pub trait Engine {
    fn dim(&self) -> usize;
    fn n_modules(&self) -> usize;

    /// Writes dy/dt for the current state; `cmd` holds one motor input per
    /// module, constant across the step's RK4 stages.
    fn deriv(
        &self,
        t: f64,
        y: &[f64],
        cmd: &[MotorCmd],
        dydt: &mut [f64],
    ) -> Result<(), DynamicsError>;

    /// Event handling after an accepted step: regime transitions, coupling
    /// and bond updates. May adjust velocities (stick capture).
    fn post_step(&mut self, t: f64, y: &mut [f64], cmd: &[MotorCmd]) -> Result<(), DynamicsError>;

    /// Pendulum angle and rate seen by module `idx`'s controller.
    fn feedback(&self, y: &[f64], idx: usize) -> (f64, f64);

    /// Appends one sample per module to the log.
    fn emit(&self, t: f64, y: &[f64], u: &[f64], log: &mut TrajectoryLog);
}

/// One classical RK4 step with caller-provided scratch buffers.
#[allow(clippy::too_many_arguments)]
pub(crate) fn rk4_step(
    engine: &dyn Engine,
    t: f64,
    y: &mut [f64],
    cmd: &[MotorCmd],
    dt: f64,
    k: &mut [Vec<f64>; 4],
    tmp: &mut [f64],
) -> Result<(), DynamicsError> {
    let n = y.len();
    engine.deriv(t, y, cmd, &mut k[0])?;
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * dt * k[0][i];
    }
    engine.deriv(t + 0.5 * dt, tmp, cmd, &mut k[1])?;
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * dt * k[1][i];
    }
    engine.deriv(t + 0.5 * dt, tmp, cmd, &mut k[2])?;
    for i in 0..n {
        tmp[i] = y[i] + dt * k[2][i];
    }
    engine.deriv(t + dt, tmp, cmd, &mut k[3])?;
    for i in 0..n {
        y[i] += dt / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
    }
    Ok(())
}

/// Runs an engine for `duration/dt` fixed steps, sampling each drive once per
/// step. On a dynamics error the partial log is returned with the divergence
/// flagged rather than discarded.
pub fn run(
    engine: &mut dyn Engine,
    y0: Vec<f64>,
    drives: &mut [Drive],
    cfg: &SimConfig,
) -> Result<RunOutcome, DynamicsError> {
    cfg.validate()?;
    let n_mod = engine.n_modules();
    if drives.len() != n_mod {
        return Err(DynamicsError::InvalidParameter(format!(
            "expected {} drives, got {}",
            n_mod,
            drives.len()
        )));
    }
    if y0.len() != engine.dim() {
        return Err(DynamicsError::InvalidParameter(format!(
            "expected state of length {}, got {}",
            engine.dim(),
            y0.len()
        )));
    }
    let steps = (cfg.duration / cfg.dt).round() as usize;
    let mut y = y0;
    let n = y.len();
    let mut k = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut tmp = vec![0.0; n];
    let mut log = TrajectoryLog::new(n_mod);
    let mut u = vec![0.0; n_mod];
    let mut cmd = vec![MotorCmd::Torque(0.0); n_mod];
    engine.emit(0.0, &y, &u, &mut log);

    let mut failure: Option<DynamicsError> = None;
    for step_idx in 0..steps {
        let t = step_idx as f64 * cfg.dt;
        for (i, drive) in drives.iter_mut().enumerate() {
            let (theta, theta_dot) = engine.feedback(&y, i);
            match drive {
                Drive::None => {
                    u[i] = 0.0;
                    cmd[i] = MotorCmd::Torque(0.0);
                }
                Drive::Torque(tau) => {
                    u[i] = 0.0;
                    cmd[i] = MotorCmd::Torque(*tau);
                }
                Drive::Speed(c) => {
                    u[i] = *c;
                    cmd[i] = MotorCmd::Servo(MOTOR_COMMAND_SIGN * *c);
                }
                Drive::Pd(ctl) => {
                    u[i] = ctl.update(t, theta, theta_dot, cfg.dt);
                    cmd[i] = MotorCmd::Servo(MOTOR_COMMAND_SIGN * u[i]);
                }
            }
        }
        let t_next = (step_idx + 1) as f64 * cfg.dt;
        let result = rk4_step(engine, t, &mut y, &cmd, cfg.dt, &mut k, &mut tmp)
            .and_then(|()| {
                if y.iter().any(|v| !v.is_finite()) {
                    Err(DynamicsError::Divergence { t: t_next })
                } else {
                    Ok(())
                }
            })
            .and_then(|()| engine.post_step(t_next, &mut y, &cmd));
        if let Err(e) = result {
            failure = Some(e);
            break;
        }
        engine.emit(t_next, &y, &u, &mut log);
    }
    if let Some(e) = &failure {
        log.divergence = Some(e.to_string());
    }
    Ok(RunOutcome {
        log,
        error: failure,
    })
}
