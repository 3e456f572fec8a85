//! Planar two-module world with one module anchored at the origin: a free
//! module couples to the anchored one rim-to-rim and pivots around it.
//!
//! Covers two configurations. Tabletop (`gravity = false`, support drag on):
//! both modules lie flat, the anchored shell is secured, the free module's
//! pendulum tip is gripped to the anchored tip by the magnets and the free
//! module crawls around the anchored one on rim friction — a revolute joint
//! made of magnets. Vertical plane (`gravity = true`, no support): the free
//! module sits on top of the anchored one and gravity acts on it, the
//! balance configuration.
//!
//! State layout (10 slots): free module `[x, x_dot, y, y_dot, psi, psi_dot,
//! theta, theta_dot]` then anchored pendulum `[gamma, gamma_dot]`. `psi` is
//! the free shell's spin, counterclockwise; `theta` keeps the line-world
//! convention (tip at `center + l (sin theta, -cos theta)`); `gamma` is the
//! anchored pendulum's tip direction measured counterclockwise from +x.
//!
//! Logging flattens the planar motion onto the column schema shared with the
//! line engine. With `log_arc` set (tabletop), the free module's `x` column
//! is the unwrapped arc length `2 r * beta` of its center around the anchor
//! and `x_dot` is its tangential speed, so downstream metrics read pivot
//! progress straight off the log. Without it (balance), `x` is the true
//! horizontal center offset, from which the tilt angle follows as
//! `asin(x / 2r)`. The anchored module logs as module 0 with the `Anchored`
//! regime and `theta = gamma + pi/2` (its tip direction in the free-module
//! convention).

use super::*;
use nalgebra::{Matrix3, Vector3};

#[derive(Debug, Clone)]
pub struct OrbitEngine {
    pub free: ModulePhysics,
    pub anchored: ModulePhysics,
    pub coupling: Option<CouplingModel>,
    pub friction: FrictionParams,
    pub contact: ContactPenalty,
    pub bond: Option<BondParams>,
    /// Tabletop drag on the free module; `None` for the vertical plane.
    pub support: Option<SideSupport>,
    /// Gravity on the free module (vertical-plane configuration).
    pub gravity: bool,
    /// Freeze the anchored pendulum (balance: it is clamped upward).
    pub anchored_locked: bool,
    /// Viscous damping at the anchored pendulum pivot, N·m·s.
    pub pivot_damping: f64,
    /// Log arc length around the anchor instead of the raw x coordinate.
    pub log_arc: bool,
    bond_intact: bool,
    beta_prev: f64,
    beta_acc: f64,
}

/// Generalized forces on the free module plus the anchored pendulum.
#[derive(Debug, Clone, Copy, Default)]
struct Forces {
    q_x: f64,
    q_y: f64,
    q_psi: f64,
    q_theta: f64,
    q_gamma: f64,
}

impl OrbitEngine {
    pub fn new(free: ModulePhysics, anchored: ModulePhysics) -> Self {
        Self {
            free,
            anchored,
            coupling: None,
            friction: FrictionParams::default(),
            contact: ContactPenalty::default(),
            bond: Some(BondParams::default()),
            support: Some(SideSupport::default()),
            gravity: false,
            anchored_locked: false,
            pivot_damping: 1e-3,
            log_arc: true,
            bond_intact: true,
            beta_prev: 0.0,
            beta_acc: 0.0,
        }
    }

    pub fn bond_intact(&self) -> bool {
        self.bond_intact
    }

    pub fn release_bond(&mut self) {
        self.bond_intact = false;
    }

    /// Starts the unwrapped-angle accumulator at the initial bearing.
    pub fn seed_bearing(&mut self, y0: &[f64]) {
        self.beta_prev = y0[2].atan2(y0[0]);
        self.beta_acc = self.beta_prev;
    }

    /// Center distance at which the rim penalty balances the contact-gap
    /// magnet pull: a consistent mated starting separation.
    pub fn mated_distance(&self) -> f64 {
        let r2 = self.free.params.radius + self.anchored.params.radius;
        let fm = self
            .coupling
            .as_ref()
            .map(|c| c.attraction(0.0))
            .unwrap_or(0.0);
        r2 - fm / self.contact.stiffness
    }

    fn rim_gap(&self, y: &[f64]) -> f64 {
        (y[0].hypot(y[2])) - (self.free.params.radius + self.anchored.params.radius)
    }

    /// Tangential misalignment of the bonded tips and its rate, along the
    /// contact tangent `e_t`.
    fn bond_shear(&self, y: &[f64]) -> (f64, f64) {
        let (l_f, l_a) = (self.free.params.arm, self.anchored.params.arm);
        let d = y[0].hypot(y[2]);
        let (ex, ey) = (y[0] / d, y[2] / d);
        let (et_x, et_y) = (-ey, ex);
        let (st, ct) = y[6].sin_cos();
        let (sg, cg) = y[8].sin_cos();
        let tip_f = (y[0] + l_f * st, y[2] - l_f * ct);
        let tip_a = (l_a * cg, l_a * sg);
        let v_f = (y[1] + l_f * ct * y[7], y[3] + l_f * st * y[7]);
        let v_a = (-l_a * sg * y[9], l_a * cg * y[9]);
        let s = (tip_f.0 - tip_a.0) * et_x + (tip_f.1 - tip_a.1) * et_y;
        let s_dot = (v_f.0 - v_a.0) * et_x + (v_f.1 - v_a.1) * et_y;
        (s, s_dot)
    }

    /// All coupling forces at the current state. Also reports the magnet
    /// attraction and rim normal for the bond-capacity check.
    fn forces(&self, t: f64, y: &[f64]) -> Result<(Forces, f64, f64), DynamicsError> {
        let mut f = Forces::default();
        let p = &self.free.params;
        let (l_f, l_a) = (p.arm, self.anchored.params.arm);
        let mt = self.free.total_mass();
        let d = y[0].hypot(y[2]);
        let (ex, ey) = (y[0] / d, y[2] / d);
        let (et_x, et_y) = (-ey, ex);
        let d_dot = (y[0] * y[1] + y[2] * y[3]) / d;
        let gap = d - (p.radius + self.anchored.params.radius);
        if gap < -PENETRATION_TOL {
            return Err(DynamicsError::Penetration { t, gap });
        }
        let (st, ct) = y[6].sin_cos();
        let (sg, cg) = y[8].sin_cos();

        // Magnet pull between the tip arrays, along the center line.
        let fm = self
            .coupling
            .as_ref()
            .map(|c| c.attraction(gap.max(0.0)))
            .unwrap_or(0.0);
        f.q_x -= fm * ex;
        f.q_y -= fm * ey;
        f.q_theta += l_f * (ct * (-fm * ex) + st * (-fm * ey));
        f.q_gamma += l_a * (-sg * (fm * ex) + cg * (fm * ey));

        // Rim contact: normal penalty along the center line plus tangential
        // friction reacting the relative surface speed.
        let mut n_c = 0.0;
        if gap < 0.0 {
            n_c = self.contact.normal(-gap, -d_dot);
            f.q_x += n_c * ex;
            f.q_y += n_c * ey;
            let slip = (y[1] * et_x + y[3] * et_y) - p.radius * y[5];
            let f_t =
                -self.friction.mu_disk * n_c * (slip / self.friction.v_eps).clamp(-1.0, 1.0);
            f.q_x += f_t * et_x;
            f.q_y += f_t * et_y;
            // Friction acts one radius inward of the center:
            // (-r e_rho) x (f_t e_t) = -r f_t zhat.
            f.q_psi += -p.radius * f_t;
        }

        // Tip shear bond while it grips.
        if self.bond_intact {
            if let Some(bond) = self.bond {
                let (s, s_dot) = self.bond_shear(y);
                let f_b = -bond.stiffness * s - bond.damping * s_dot;
                f.q_x += f_b * et_x;
                f.q_y += f_b * et_y;
                f.q_theta += l_f * (ct * f_b * et_x + st * f_b * et_y);
                f.q_gamma -= l_a * (-sg * f_b * et_x + cg * f_b * et_y);
            }
        }

        if self.gravity {
            f.q_y -= mt * self.free.params.gravity;
            f.q_theta -= p.pendulum_mass * p.gravity * l_f * st;
        }
        if let Some(sup) = &self.support {
            let w = mt * SUPPORT_G;
            let speed = y[1].hypot(y[3]);
            if speed > 0.0 {
                let mag = sup.mu_table * w * (speed / self.friction.v_eps).min(1.0);
                f.q_x -= mag * y[1] / speed;
                f.q_y -= mag * y[3] / speed;
            }
            f.q_psi -=
                sup.mu_table * w * sup.spin_drag_radius * (y[5] / OMEGA_EPS).clamp(-1.0, 1.0);
        }
        f.q_gamma -= self.pivot_damping * y[9];
        Ok((f, fm, n_c))
    }
}

impl Engine for OrbitEngine {
    fn dim(&self) -> usize {
        10
    }

    fn n_modules(&self) -> usize {
        2
    }

    fn deriv(
        &self,
        t: f64,
        y: &[f64],
        cmd: &[MotorCmd],
        dydt: &mut [f64],
    ) -> Result<(), DynamicsError> {
        let (mut f, _, _) = self.forces(t, y)?;
        let p = &self.free.params;
        let ml = p.pendulum_mass * p.arm;
        let mt = self.free.total_mass();
        let i_eff = self.free.pivot_inertia();
        let (st, ct) = y[6].sin_cos();

        // Motor on the free module (cmd index 1): torque on the pendulum,
        // reaction on the shell.
        let tau_f = match cmd[1] {
            MotorCmd::Torque(tq) => tq,
            MotorCmd::Servo(c) => self.free.servo.torque(c, y[7] - y[5]),
        };
        f.q_theta += tau_f;
        f.q_psi -= tau_f;
        // Motor on the anchored module (cmd index 0): its shell is bolted
        // down, so only the pendulum side acts.
        let tau_a = match cmd[0] {
            MotorCmd::Torque(tq) => tq,
            MotorCmd::Servo(c) => self.anchored.servo.torque(c, y[9]),
        };
        f.q_gamma += tau_a;

        let a = Matrix3::new(
            mt, 0.0, ml * ct, //
            0.0, mt, ml * st, //
            ml * ct, ml * st, i_eff,
        );
        let b = Vector3::new(
            ml * st * y[7] * y[7] + f.q_x,
            -ml * ct * y[7] * y[7] + f.q_y,
            f.q_theta,
        );
        let acc = a.lu().solve(&b).ok_or(DynamicsError::Divergence { t })?;

        dydt[0] = y[1];
        dydt[1] = acc[0];
        dydt[2] = y[3];
        dydt[3] = acc[1];
        dydt[4] = y[5];
        dydt[5] = f.q_psi / self.free.shell_inertia;
        dydt[6] = y[7];
        dydt[7] = acc[2];
        if self.anchored_locked {
            dydt[8] = 0.0;
            dydt[9] = 0.0;
        } else {
            dydt[8] = y[9];
            dydt[9] = f.q_gamma / self.anchored.pivot_inertia();
        }
        Ok(())
    }

    fn post_step(&mut self, t: f64, y: &mut [f64], _cmd: &[MotorCmd]) -> Result<(), DynamicsError> {
        let (_, fm, n_c) = self.forces(t, y)?;
        if self.bond_intact {
            if let Some(bond) = self.bond {
                let (s, s_dot) = self.bond_shear(y);
                let f_b = -bond.stiffness * s - bond.damping * s_dot;
                let capacity = bond.grip * (fm + n_c);
                if f_b.abs() > capacity || s.abs() > bond.max_stretch {
                    self.bond_intact = false;
                }
            }
        }
        // Unwrap the bearing of the free center so arc logging is continuous
        // across the atan2 branch cut.
        let beta = y[2].atan2(y[0]);
        let mut delta = beta - self.beta_prev;
        while delta > std::f64::consts::PI {
            delta -= 2.0 * std::f64::consts::PI;
        }
        while delta < -std::f64::consts::PI {
            delta += 2.0 * std::f64::consts::PI;
        }
        self.beta_acc += delta;
        self.beta_prev = beta;
        Ok(())
    }

    fn feedback(&self, y: &[f64], idx: usize) -> (f64, f64) {
        if idx == 0 {
            (y[8], y[9])
        } else {
            (y[6], y[7])
        }
    }

    fn emit(&self, t: f64, y: &[f64], u: &[f64], log: &mut TrajectoryLog) {
        let gap = self.rim_gap(y);
        let coupled = self.bond_intact && gap <= COUPLING_GAP_TOL;
        log.samples.push(Sample {
            t,
            module: 0,
            x: 0.0,
            x_dot: 0.0,
            phi: 0.0,
            phi_dot: 0.0,
            theta: y[8] + std::f64::consts::FRAC_PI_2,
            theta_dot: y[9],
            u: u[0],
            regime: ContactRegime::Anchored,
            gap,
            coupled,
        });
        let (x, x_dot) = if self.log_arc {
            let d = y[0].hypot(y[2]);
            let (et_x, et_y) = (-y[2] / d, y[0] / d);
            let r2 = self.free.params.radius + self.anchored.params.radius;
            (r2 * self.beta_acc, y[1] * et_x + y[3] * et_y)
        } else {
            (y[0], y[1])
        };
        log.samples.push(Sample {
            t,
            module: 1,
            x,
            x_dot,
            phi: y[4],
            phi_dot: y[5],
            theta: y[6],
            theta_dot: y[7],
            u: u[1],
            regime: ContactRegime::Slip,
            gap,
            coupled,
        });
    }
}
