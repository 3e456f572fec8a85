//! Modules on a straight line: upright rolling with Karnopp stick-slip
//! ground contact, and the side-lying (face-down, no in-plane gravity)
//! regime.
//!
//! Upright, `phi` is the rolling angle (positive rolling toward +x, so stick
//! means `x_dot = r * phi_dot`) and the pendulum angle `theta` is measured
//! from the downward vertical, counterclockwise positive. The two-module
//! upright world is the docking abstraction: modules approach along x, their
//! coupling faces meet at surface gap `(x2 - x1) - 2r`, magnets pull the
//! pendulum tips together, and a penalty contact with face friction takes
//! over at touch. The relative face angle is `phi1 - phi2`, so two modules
//! rolling as a coupled pair rub nothing.
//!
//! Side-lying, the `phi` slot stores the shell's spin angle (counterclockwise
//! in the top view) — the disk sits on its face and spins instead of rolling.
//! A two-module side world is the stacked pair: the free faces rub with
//! friction torque `mu_disk * N_face * r`, the pendulum tips are locked to
//! each other by the magnet shear bond, and center translation carries table
//! drag. The bond releases permanently when its shear demand exceeds what
//! the face squeeze can grip, which is how a weakened magnet shows up as a
//! decoupling event.

use super::*;

/// State derivative of one module, in the logged field order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModuleDerivative {
    pub x_dot: f64,
    pub x_ddot: f64,
    pub phi_dot: f64,
    pub phi_ddot: f64,
    pub theta_dot: f64,
    pub theta_ddot: f64,
}

/// Per-module external generalized forces assembled from coupling terms.
#[derive(Debug, Clone, Copy, Default)]
struct Extras {
    /// Force on the center along x, N.
    q_x: f64,
    /// Torque on the pendulum, N·m counterclockwise.
    q_theta: f64,
    /// Extra shell torque in the shell's positive spin direction (rolling
    /// sense upright, counterclockwise side-lying), N·m.
    t_shell: f64,
}

/// Accelerations plus the contact bookkeeping the event logic needs.
#[derive(Debug, Clone, Copy)]
struct Accels {
    x_ddot: f64,
    phi_ddot: f64,
    theta_ddot: f64,
    /// Ground normal force (upright), N.
    normal: f64,
    /// Ground tangential force: recovered constraint force in stick, applied
    /// friction in slip, N.
    tangential: f64,
}

fn sign_reg(v: f64, eps: f64) -> f64 {
    (v / eps).clamp(-1.0, 1.0)
}

/// Upright single-module accelerations. `tau` is the net torque acting
/// counterclockwise on the pendulum with its reaction on the shell.
fn upright_accels(
    phys: &ModulePhysics,
    fric: &FrictionParams,
    regime: ContactRegime,
    s: &[f64],
    tau: f64,
    ex: &Extras,
    t: f64,
) -> Result<Accels, DynamicsError> {
    let p = &phys.params;
    let (m, l, r, g, b) = (p.pendulum_mass, p.arm, p.radius, p.gravity, p.damping);
    let mt = phys.total_mass();
    let i_eff = phys.pivot_inertia();
    let js = phys.shell_inertia;
    let ml = m * l;
    let (x_dot, phi_dot, theta, theta_dot) = (s[1], s[3], s[4], s[5]);
    let (st, ct) = theta.sin_cos();

    // The hard stop couples pendulum and shell exactly like the motor does.
    let stop = phys
        .stop
        .map(|hs| hs.torque(theta + s[2], theta_dot + phi_dot))
        .unwrap_or(0.0);
    let tau_tot = tau + stop;

    // Rolling resistance against the static weight; using the instantaneous
    // normal force here would make the force balance implicit for a
    // second-order correction that never matters at these speeds.
    let t_roll = -phys.rolling_resistance * mt * g * r * sign_reg(phi_dot, OMEGA_EPS);
    let t_shell = tau_tot + t_roll + ex.t_shell;

    let rhs_theta = -m * g * l * st + tau_tot + ex.q_theta;
    match regime {
        ContactRegime::Anchored => Ok(Accels {
            x_ddot: 0.0,
            phi_ddot: 0.0,
            theta_ddot: 0.0,
            normal: mt * g,
            tangential: 0.0,
        }),
        ContactRegime::Stick => {
            let a11 = mt + js / (r * r);
            let a12 = ml * ct;
            let a22 = i_eff;
            let b1 = ml * st * theta_dot * theta_dot - b * x_dot + ex.q_x + t_shell / r;
            let det = a11 * a22 - a12 * a12;
            let x_ddot = (a22 * b1 - a12 * rhs_theta) / det;
            let theta_ddot = (a11 * rhs_theta - a12 * b1) / det;
            let normal = mt * g + ml * (st * theta_ddot + ct * theta_dot * theta_dot);
            if normal < 0.0 {
                return Err(DynamicsError::LiftOff { t });
            }
            Ok(Accels {
                x_ddot,
                phi_ddot: x_ddot / r,
                theta_ddot,
                normal,
                tangential: (t_shell - js * x_ddot / r) / r,
            })
        }
        ContactRegime::Slip => {
            if js <= 0.0 {
                return Err(DynamicsError::InvalidParameter(
                    "slip regime needs positive shell inertia".into(),
                ));
            }
            // Friction force -mu_k * N * sign(v_c) with N itself depending on
            // theta_ddot; substitute N from the vertical balance and solve
            // the remaining 2x2.
            let sv = sign_reg(x_dot - r * phi_dot, fric.v_eps);
            let n_static = mt * g + ml * ct * theta_dot * theta_dot;
            let a11 = mt;
            let a12 = ml * ct + fric.mu_k * sv * ml * st;
            let a21 = ml * ct;
            let a22 = i_eff;
            let b1 =
                ml * st * theta_dot * theta_dot - b * x_dot + ex.q_x - fric.mu_k * sv * n_static;
            let det = a11 * a22 - a12 * a21;
            let x_ddot = (a22 * b1 - a12 * rhs_theta) / det;
            let theta_ddot = (a11 * rhs_theta - a21 * b1) / det;
            let normal = n_static + ml * st * theta_ddot;
            if normal < 0.0 {
                return Err(DynamicsError::LiftOff { t });
            }
            let friction = -fric.mu_k * normal * sv;
            Ok(Accels {
                x_ddot,
                phi_ddot: (t_shell - r * friction) / js,
                theta_ddot,
                normal,
                tangential: friction,
            })
        }
    }
}

/// Side-lying single-module accelerations; the shell spins freely on its
/// face, translation drags against the table.
fn side_accels(
    phys: &ModulePhysics,
    fric: &FrictionParams,
    support: &SideSupport,
    regime: ContactRegime,
    s: &[f64],
    tau: f64,
    ex: &Extras,
) -> Result<Accels, DynamicsError> {
    let p = &phys.params;
    let (m, l, b) = (p.pendulum_mass, p.arm, p.damping);
    let mt = phys.total_mass();
    let i_eff = phys.pivot_inertia();
    let js = phys.shell_inertia;
    let ml = m * l;
    let (x_dot, psi_dot, theta, theta_dot) = (s[1], s[3], s[4], s[5]);
    let (st, ct) = theta.sin_cos();

    if regime == ContactRegime::Anchored {
        return Ok(Accels {
            x_ddot: 0.0,
            phi_ddot: 0.0,
            theta_ddot: 0.0,
            normal: mt * SUPPORT_G,
            tangential: 0.0,
        });
    }
    if js <= 0.0 {
        return Err(DynamicsError::InvalidParameter(
            "side-lying regime needs positive shell inertia".into(),
        ));
    }
    let stop = phys
        .stop
        .map(|hs| hs.torque(theta - s[2], theta_dot - psi_dot))
        .unwrap_or(0.0);
    let tau_tot = tau + stop;

    let drag_x = fric.mu_k * mt * SUPPORT_G * sign_reg(x_dot, fric.v_eps);
    let a11 = mt;
    let a12 = ml * ct;
    let a22 = i_eff;
    let b1 = ml * st * theta_dot * theta_dot - b * x_dot + ex.q_x - drag_x;
    let b2 = tau_tot + ex.q_theta;
    let det = a11 * a22 - a12 * a12;
    let x_ddot = (a22 * b1 - a12 * b2) / det;
    let theta_ddot = (a11 * b2 - a12 * b1) / det;

    let t_spin =
        -support.mu_table * mt * SUPPORT_G * support.spin_drag_radius * sign_reg(psi_dot, OMEGA_EPS);
    let psi_ddot = (-tau_tot + ex.t_shell + t_spin) / js;
    Ok(Accels {
        x_ddot,
        phi_ddot: psi_ddot,
        theta_ddot,
        normal: mt * SUPPORT_G,
        tangential: 0.0,
    })
}

/// One or two modules on a line.
#[derive(Debug, Clone)]
pub struct LineEngine {
    pub modules: Vec<ModulePhysics>,
    pub friction: FrictionParams,
    pub mode: GravityMode,
    /// Magnet model between the two coupling faces (two-module worlds).
    pub coupling: Option<CouplingModel>,
    pub contact: ContactPenalty,
    /// Tip shear bond (side-lying stacked pair).
    pub bond: Option<BondParams>,
    pub support: SideSupport,
    /// Sinusoidal external force `amp * sin(omega * t)` on module 0's shell
    /// center (linearization studies).
    pub shell_drive: Option<(f64, f64)>,
    regimes: Vec<ContactRegime>,
    bond_intact: bool,
    coupled: bool,
}

impl LineEngine {
    pub fn single(phys: ModulePhysics, friction: FrictionParams, mode: GravityMode) -> Self {
        let regime = match mode {
            GravityMode::Upright => ContactRegime::Stick,
            GravityMode::Side => ContactRegime::Slip,
        };
        Self {
            modules: vec![phys],
            friction,
            mode,
            coupling: None,
            contact: ContactPenalty::default(),
            bond: None,
            support: SideSupport::default(),
            shell_drive: None,
            regimes: vec![regime],
            bond_intact: false,
            coupled: false,
        }
    }

    /// Two modules; upright worlds start uncoupled and apart, side-lying
    /// worlds start as the stacked, bonded pair.
    pub fn pair(
        a: ModulePhysics,
        b: ModulePhysics,
        friction: FrictionParams,
        mode: GravityMode,
        coupling: Option<CouplingModel>,
    ) -> Self {
        let side = mode == GravityMode::Side;
        let regime = if side {
            ContactRegime::Slip
        } else {
            ContactRegime::Stick
        };
        Self {
            modules: vec![a, b],
            friction,
            mode,
            coupling,
            contact: ContactPenalty::default(),
            bond: side.then(BondParams::default),
            support: SideSupport::default(),
            shell_drive: None,
            regimes: vec![regime; 2],
            bond_intact: side,
            coupled: side,
        }
    }

    pub fn set_regime(&mut self, idx: usize, regime: ContactRegime) {
        self.regimes[idx] = regime;
    }

    pub fn regime(&self, idx: usize) -> ContactRegime {
        self.regimes[idx]
    }

    /// Packs module states into the flat integrator vector.
    pub fn pack(states: &[ModuleState]) -> Vec<f64> {
        let mut y = Vec::with_capacity(6 * states.len());
        for s in states {
            y.extend_from_slice(&[s.x, s.x_dot, s.phi, s.phi_dot, s.theta, s.theta_dot]);
        }
        y
    }

    fn gap_of(&self, y: &[f64]) -> f64 {
        match self.mode {
            // Stacked pair: the faces stay mated.
            GravityMode::Side => 0.0,
            GravityMode::Upright => {
                let r1 = self.modules[0].params.radius;
                let r2 = self.modules[1].params.radius;
                (y[6] - y[0]) - (r1 + r2)
            }
        }
    }

    /// Coupling forces for a two-module world. Returns per-module extras and
    /// the current magnet attraction (for bond-capacity checks).
    fn pair_extras(&self, t: f64, y: &[f64]) -> Result<([Extras; 2], f64), DynamicsError> {
        let mut ex = [Extras::default(), Extras::default()];
        if let Some((amp, omega)) = self.shell_drive {
            ex[0].q_x += amp * (omega * t).sin();
        }
        if self.modules.len() < 2 {
            return Ok((ex, 0.0));
        }
        let (l1, l2) = (self.modules[0].params.arm, self.modules[1].params.arm);
        let fm = match (&self.coupling, self.mode) {
            (Some(c), GravityMode::Upright) => {
                let gap = self.gap_of(y);
                if gap < -PENETRATION_TOL {
                    return Err(DynamicsError::Penetration { t, gap });
                }
                let fm = c.attraction(gap);
                // Attraction along the center line, applied at the pendulum
                // tips; equal and opposite by construction.
                ex[0].q_x += fm;
                ex[1].q_x -= fm;
                ex[0].q_theta += fm * l1 * y[4].cos();
                ex[1].q_theta -= fm * l2 * y[10].cos();
                // Face contact and face friction once the surfaces touch.
                if gap < 0.0 {
                    let closing = y[7] - y[1]; // d(gap)/dt
                    let n_face = self.contact.normal(-gap, -closing);
                    ex[0].q_x -= n_face;
                    ex[1].q_x += n_face;
                    let slip = (y[3] - y[9])
                        * 0.5
                        * (self.modules[0].params.radius + self.modules[1].params.radius);
                    let t_fric =
                        self.friction.mu_disk * n_face * self.modules[0].params.radius
                            * sign_reg(slip, self.friction.v_eps);
                    ex[0].t_shell -= t_fric;
                    ex[1].t_shell += t_fric;
                }
                fm
            }
            (Some(c), GravityMode::Side) => c.attraction(0.0),
            (None, _) => 0.0,
        };
        if self.mode == GravityMode::Side && self.modules.len() == 2 {
            // Stacked pair: face friction between the mated faces, and the
            // tip shear bond while it grips.
            let mt = self.modules[0].total_mass();
            let n_face = mt * SUPPORT_G + fm;
            let slip = (y[3] - y[9]) * self.modules[0].params.radius;
            let t_fric = self.friction.mu_disk
                * n_face
                * self.modules[0].params.radius
                * sign_reg(slip, self.friction.v_eps);
            ex[0].t_shell -= t_fric;
            ex[1].t_shell += t_fric;
            if self.bond_intact {
                if let Some(bond) = self.bond {
                    let (f_b, _) = self.bond_force(y, &bond);
                    ex[0].q_theta += f_b * l1;
                    ex[1].q_theta -= f_b * l2;
                }
            }
        }
        Ok((ex, fm))
    }

    /// Shear force carried by the tip bond of the stacked pair. The glued
    /// tips sit at radius `l` on the shared spin axis, so the misalignment
    /// is the relative tip arc `l * (theta1 - theta2)` and the force acts as
    /// an equal-and-opposite torque couple on the two pendulums. Returns
    /// (force, arc misalignment).
    fn bond_force(&self, y: &[f64], bond: &BondParams) -> (f64, f64) {
        let l = 0.5 * (self.modules[0].params.arm + self.modules[1].params.arm);
        let s = l * (y[4] - y[10]);
        let s_dot = l * (y[5] - y[11]);
        (-bond.stiffness * s - bond.damping * s_dot, s)
    }

    fn module_accels(
        &self,
        idx: usize,
        t: f64,
        y: &[f64],
        cmd: MotorCmd,
        ex: &Extras,
    ) -> Result<Accels, DynamicsError> {
        let s = &y[6 * idx..6 * idx + 6];
        let phys = &self.modules[idx];
        let omega_rel = match self.mode {
            GravityMode::Upright => s[5] + s[3],
            GravityMode::Side => s[5] - s[3],
        };
        let tau = match cmd {
            MotorCmd::Torque(tq) => tq,
            MotorCmd::Servo(c) => phys.servo.torque(c, omega_rel),
        };
        match self.mode {
            GravityMode::Upright => {
                upright_accels(phys, &self.friction, self.regimes[idx], s, tau, ex, t)
            }
            GravityMode::Side => {
                side_accels(phys, &self.friction, &self.support, self.regimes[idx], s, tau, ex)
            }
        }
    }

    /// Captures the rolling constraint by eliminating the contact-point
    /// velocity with one impulsive contact force; dissipative by
    /// construction, like any inelastic constraint capture.
    fn project_to_stick(&self, idx: usize, y: &mut [f64]) {
        let phys = &self.modules[idx];
        let s = &mut y[6 * idx..6 * idx + 6];
        let p = &phys.params;
        let (ml, r) = (p.pendulum_mass * p.arm, p.radius);
        let mt = phys.total_mass();
        let i_eff = phys.pivot_inertia();
        let js = phys.shell_inertia;
        let ct = s[4].cos();
        let d = mt * i_eff - ml * ct * ml * ct;
        let denom = i_eff / d + r * r / js;
        let impulse = (r * s[3] - s[1]) / denom;
        s[1] += impulse * i_eff / d;
        s[5] -= impulse * ml * ct / d;
        s[3] -= impulse * r / js;
        // Kill the residual rounding error exactly.
        s[3] = s[1] / r;
    }
}

impl Engine for LineEngine {
    fn dim(&self) -> usize {
        6 * self.modules.len()
    }

    fn n_modules(&self) -> usize {
        self.modules.len()
    }

    fn deriv(
        &self,
        t: f64,
        y: &[f64],
        cmd: &[MotorCmd],
        dydt: &mut [f64],
    ) -> Result<(), DynamicsError> {
        let (extras, _) = self.pair_extras(t, y)?;
        for idx in 0..self.modules.len() {
            let acc = self.module_accels(idx, t, y, cmd[idx], &extras[idx])?;
            let s = &y[6 * idx..6 * idx + 6];
            let d = &mut dydt[6 * idx..6 * idx + 6];
            d[0] = s[1];
            d[1] = acc.x_ddot;
            d[2] = s[3];
            d[3] = acc.phi_ddot;
            d[4] = s[5];
            d[5] = acc.theta_ddot;
        }
        Ok(())
    }

    fn post_step(&mut self, t: f64, y: &mut [f64], cmd: &[MotorCmd]) -> Result<(), DynamicsError> {
        let (extras, fm) = self.pair_extras(t, y)?;
        if self.mode == GravityMode::Upright {
            for idx in 0..self.modules.len() {
                if self.regimes[idx] == ContactRegime::Anchored {
                    continue;
                }
                let phys = &self.modules[idx];
                if phys.shell_inertia <= 0.0 {
                    // A shell with no spin inertia cannot store slip; it is
                    // pinned to the stick branch.
                    continue;
                }
                match self.regimes[idx] {
                    ContactRegime::Stick => {
                        let acc = self.module_accels(idx, t, y, cmd[idx], &extras[idx])?;
                        if acc.tangential.abs() > self.friction.mu_s * acc.normal {
                            self.regimes[idx] = ContactRegime::Slip;
                        }
                    }
                    ContactRegime::Slip => {
                        let s = &y[6 * idx..6 * idx + 6];
                        let v_c = s[1] - phys.params.radius * s[3];
                        if v_c.abs() < self.friction.v_eps {
                            let saved: [f64; 6] =
                                y[6 * idx..6 * idx + 6].try_into().unwrap();
                            self.project_to_stick(idx, y);
                            self.regimes[idx] = ContactRegime::Stick;
                            let acc = self.module_accels(idx, t, y, cmd[idx], &extras[idx])?;
                            if acc.tangential.abs() > self.friction.mu_s * acc.normal {
                                // Stick cannot hold; keep sliding.
                                y[6 * idx..6 * idx + 6].copy_from_slice(&saved);
                                self.regimes[idx] = ContactRegime::Slip;
                            }
                        }
                    }
                    ContactRegime::Anchored => {}
                }
            }
        }
        if self.modules.len() == 2 {
            if self.mode == GravityMode::Side {
                if self.bond_intact {
                    if let Some(bond) = self.bond {
                        let (f_b, stretch) = self.bond_force(y, &bond);
                        let mt = self.modules[0].total_mass();
                        let capacity = bond.grip * (fm + mt * SUPPORT_G);
                        if f_b.abs() > capacity || stretch.abs() > bond.max_stretch {
                            self.bond_intact = false;
                        }
                    }
                }
                self.coupled = self.bond_intact;
            } else {
                self.coupled = self.gap_of(y) <= COUPLING_GAP_TOL && self.coupling.is_some();
            }
        }
        Ok(())
    }

    fn feedback(&self, y: &[f64], idx: usize) -> (f64, f64) {
        (y[6 * idx + 4], y[6 * idx + 5])
    }

    fn emit(&self, t: f64, y: &[f64], u: &[f64], log: &mut TrajectoryLog) {
        let gap = if self.modules.len() == 2 {
            self.gap_of(y)
        } else {
            0.0
        };
        for idx in 0..self.modules.len() {
            let s = &y[6 * idx..6 * idx + 6];
            log.samples.push(Sample {
                t,
                module: idx,
                x: s[0],
                x_dot: s[1],
                phi: s[2],
                phi_dot: s[3],
                theta: s[4],
                theta_dot: s[5],
                u: u[idx],
                regime: self.regimes[idx],
                gap,
                coupled: self.coupled,
            });
        }
    }
}

/// Standalone single-module derivative: direct motor torque, no servo.
pub fn single_module_derivative(
    phys: &ModulePhysics,
    friction: &FrictionParams,
    s: &ModuleState,
    motor_torque: f64,
    mode: GravityMode,
) -> Result<ModuleDerivative, DynamicsError> {
    if !s.is_finite() {
        return Err(DynamicsError::InvalidParameter("non-finite state".into()));
    }
    let mut engine = LineEngine::single(phys.clone(), *friction, mode);
    engine.set_regime(0, s.regime);
    let y = LineEngine::pack(std::slice::from_ref(s));
    let mut dydt = [0.0; 6];
    engine.deriv(0.0, &y, &[MotorCmd::Torque(motor_torque)], &mut dydt)?;
    Ok(ModuleDerivative {
        x_dot: dydt[0],
        x_ddot: dydt[1],
        phi_dot: dydt[2],
        phi_ddot: dydt[3],
        theta_dot: dydt[4],
        theta_ddot: dydt[5],
    })
}

/// Standalone two-module derivative: each module evolves per the single
/// module law plus magnet attraction at the pendulum tips and, in face
/// contact, the normal penalty and face friction torque.
pub fn two_module_derivative(
    phys: [&ModulePhysics; 2],
    friction: &FrictionParams,
    world: &WorldState,
    torques: [f64; 2],
    coupling: Option<&CouplingModel>,
    mode: GravityMode,
) -> Result<[ModuleDerivative; 2], DynamicsError> {
    if world.modules.len() != 2 {
        return Err(DynamicsError::InvalidParameter(
            "two-module derivative needs exactly two modules".into(),
        ));
    }
    let mut engine = LineEngine::pair(
        phys[0].clone(),
        phys[1].clone(),
        *friction,
        mode,
        coupling.cloned(),
    );
    engine.set_regime(0, world.modules[0].regime);
    engine.set_regime(1, world.modules[1].regime);
    let y = LineEngine::pack(&world.modules);
    if mode == GravityMode::Upright && engine.gap_of(&y) < -1e-6 - PENETRATION_TOL {
        return Err(DynamicsError::Penetration {
            t: world.t,
            gap: engine.gap_of(&y),
        });
    }
    let cmd = [MotorCmd::Torque(torques[0]), MotorCmd::Torque(torques[1])];
    let mut dydt = [0.0; 12];
    engine.deriv(world.t, &y, &cmd, &mut dydt)?;
    let take = |k: usize| ModuleDerivative {
        x_dot: dydt[6 * k],
        x_ddot: dydt[6 * k + 1],
        phi_dot: dydt[6 * k + 2],
        phi_ddot: dydt[6 * k + 3],
        theta_dot: dydt[6 * k + 4],
        theta_ddot: dydt[6 * k + 5],
    };
    Ok([take(0), take(1)])
}

/// Total mechanical energy of one module (kinetic plus pendulum potential;
/// the side-lying regime has no in-plane potential).
pub fn mechanical_energy(phys: &ModulePhysics, s: &ModuleState, mode: GravityMode) -> f64 {
    let p = &phys.params;
    let (m, l) = (p.pendulum_mass, p.arm);
    let mt = phys.total_mass();
    let i_eff = phys.pivot_inertia();
    let kinetic = 0.5 * mt * s.x_dot * s.x_dot
        + 0.5 * phys.shell_inertia * s.phi_dot * s.phi_dot
        + m * l * s.theta.cos() * s.x_dot * s.theta_dot
        + 0.5 * i_eff * s.theta_dot * s.theta_dot;
    let potential = match mode {
        GravityMode::Upright => -m * p.gravity * l * s.theta.cos(),
        GravityMode::Side => 0.0,
    };
    kinetic + potential
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{run, Drive, SimConfig};
    use approx::assert_abs_diff_eq;

    #[test]
    fn rest_is_equilibrium() {
        let d = single_module_derivative(
            &ModulePhysics::default(),
            &FrictionParams::default(),
            &ModuleState::at_rest(),
            0.0,
            GravityMode::Upright,
        )
        .unwrap();
        assert_eq!(
            d,
            ModuleDerivative {
                x_dot: 0.0,
                x_ddot: 0.0,
                phi_dot: 0.0,
                phi_ddot: 0.0,
                theta_dot: 0.0,
                theta_ddot: 0.0
            }
        );
    }

    #[test]
    fn zero_world_stays_put_through_steps() {
        let mut engine = LineEngine::single(
            ModulePhysics::default(),
            FrictionParams::default(),
            GravityMode::Upright,
        );
        let y0 = vec![0.0; 6];
        let cfg = SimConfig {
            dt: 1e-4,
            duration: 0.01,
            gravity_mode: GravityMode::Upright,
        };
        let out = run(&mut engine, y0, &mut [Drive::None], &cfg).unwrap();
        assert!(!out.diverged());
        let last = out.log.last_of(0).unwrap();
        assert!(last.x.abs() < 1e-15 && last.theta.abs() < 1e-15);
    }

    /// Conservative small swing: the measured period must match the
    /// small-angle analytic frequency of the same Lagrangian,
    /// w^2 = m g l / (I_eff - (m l)^2 / (M + m + J_s / r^2)).
    #[test]
    fn small_swing_frequency_matches_linearized_value() {
        let mut phys = ModulePhysics::default();
        phys.params.damping = 0.0;
        phys.rolling_resistance = 0.0;
        let p = phys.params;
        let ml = p.pendulum_mass * p.arm;
        let mt_roll = phys.total_mass() + phys.shell_inertia / (p.radius * p.radius);
        let w2 = p.pendulum_mass * p.gravity * p.arm
            / (phys.pivot_inertia() - ml * ml / mt_roll);
        let expected_period = 2.0 * std::f64::consts::PI / w2.sqrt();

        let mut engine =
            LineEngine::single(phys, FrictionParams::default(), GravityMode::Upright);
        let y0 = vec![0.0, 0.0, 0.0, 0.0, 0.02, 0.0];
        let cfg = SimConfig {
            dt: 1e-4,
            duration: 10.0,
            gravity_mode: GravityMode::Upright,
        };
        let out = run(&mut engine, y0, &mut [Drive::None], &cfg).unwrap();
        // Count upward zero crossings of theta.
        let samples: Vec<&Sample> = out.log.module(0).collect();
        let mut crossings = Vec::new();
        for w in samples.windows(2) {
            if w[0].theta < 0.0 && w[1].theta >= 0.0 {
                crossings.push(w[1].t);
            }
        }
        assert!(crossings.len() >= 4, "too few oscillations");
        let measured =
            (crossings.last().unwrap() - crossings[0]) / (crossings.len() - 1) as f64;
        assert_abs_diff_eq!(measured, expected_period, epsilon = 0.005 * expected_period);
    }

    #[test]
    fn conservative_swing_holds_energy_and_rolling_constraint() {
        let mut phys = ModulePhysics::default();
        phys.params.damping = 0.0;
        phys.rolling_resistance = 0.0;
        let r = phys.params.radius;
        let mode = GravityMode::Upright;
        let e0 = mechanical_energy(
            &phys,
            &ModuleState {
                theta: 0.5,
                ..ModuleState::at_rest()
            },
            mode,
        );
        let mut engine = LineEngine::single(phys.clone(), FrictionParams::default(), mode);
        let y0 = vec![0.0, 0.0, 0.0, 0.0, 0.5, 0.0];
        let cfg = SimConfig {
            dt: 1e-4,
            duration: 2.0,
            gravity_mode: mode,
        };
        let out = run(&mut engine, y0, &mut [Drive::None], &cfg).unwrap();
        let scale = e0.abs();
        for s in out.log.module(0) {
            assert!(
                (s.x_dot - r * s.phi_dot).abs() <= 1e-9,
                "rolling residual broken at t={}",
                s.t
            );
            let e = mechanical_energy(&phys, &state_of(s), mode);
            assert!(
                (e - e0).abs() <= 1e-6 * scale,
                "energy drifted to {e} from {e0} at t={}",
                s.t
            );
        }
    }

    fn state_of(s: &Sample) -> ModuleState {
        ModuleState {
            x: s.x,
            x_dot: s.x_dot,
            phi: s.phi,
            phi_dot: s.phi_dot,
            theta: s.theta,
            theta_dot: s.theta_dot,
            regime: s.regime,
        }
    }

    /// Hard shell kick: enters slip, dissipates, recaptures stick, and with
    /// friction active the energy never increases after the torque ends.
    #[test]
    fn slip_recaptures_stick_and_dissipates() {
        let phys = ModulePhysics::default();
        let mode = GravityMode::Upright;
        let mut engine = LineEngine::single(phys.clone(), FrictionParams::default(), mode);
        engine.set_regime(0, ContactRegime::Slip);
        // Shell spinning fast against a stationary center: must slide.
        let y0 = vec![0.0, 0.0, 0.0, 40.0, 0.0, 0.0];
        let cfg = SimConfig {
            dt: 1e-4,
            duration: 3.0,
            gravity_mode: mode,
        };
        let out = run(&mut engine, y0, &mut [Drive::None], &cfg).unwrap();
        assert!(!out.diverged());
        let samples: Vec<&Sample> = out.log.module(0).collect();
        assert_eq!(samples[0].regime, ContactRegime::Slip);
        let last = samples.last().unwrap();
        assert_eq!(last.regime, ContactRegime::Stick);
        assert!((last.x_dot - phys.params.radius * last.phi_dot).abs() <= 1e-9);
        let mut prev = f64::INFINITY;
        for s in &samples {
            let e = mechanical_energy(&phys, &state_of(s), mode);
            assert!(e <= prev + 1e-10, "energy rose at t={}", s.t);
            prev = e;
        }
    }

    /// With mu_k = 0 in slip, the angular-momentum rate about the current
    /// contact point must equal the gravity torque alone, for any motor
    /// torque (internal torques cancel; normal force passes through the
    /// point).
    #[test]
    fn frictionless_slip_momentum_rate_is_gravity_torque()
    {
        let phys = ModulePhysics::default();
        let mut fric = FrictionParams::default();
        fric.mu_k = 0.0;
        let p = phys.params;
        let s = ModuleState {
            x: 0.3,
            x_dot: 0.0,
            phi: 1.0,
            phi_dot: 2.0,
            theta: 0.7,
            theta_dot: -1.0,
            regime: ContactRegime::Slip,
        };
        let tau = 0.8;
        let mut phys_nb = phys.clone();
        phys_nb.params.damping = 0.0;
        phys_nb.rolling_resistance = 0.0;
        let d =
            single_module_derivative(&phys_nb, &fric, &s, tau, GravityMode::Upright).unwrap();
        let (m, l, r) = (p.pendulum_mass, p.arm, p.radius);
        let (st, ct) = s.theta.sin_cos();
        // Shell about the contact point (x, 0): spin (world ccw = -phi) plus
        // M * (r_s - A) x a_s with r_s - A = (0, r), a_s = (x_dd, 0).
        let l_dot_shell = -phys.shell_inertia * d.phi_ddot - p.shell_mass * r * d.x_ddot;
        // Pendulum: I * theta_dd plus m * (r_p - A) x a_p.
        let rp = (l * st, r - l * ct);
        let ap = (
            d.x_ddot + l * ct * d.theta_ddot - l * st * s.theta_dot * s.theta_dot,
            l * st * d.theta_ddot + l * ct * s.theta_dot * s.theta_dot,
        );
        let l_dot_pend = p.inertia * d.theta_ddot + m * (rp.0 * ap.1 - rp.1 * ap.0);
        let gravity_torque = -m * p.gravity * l * st;
        assert_abs_diff_eq!(l_dot_shell + l_dot_pend, gravity_torque, epsilon = 1e-9);
    }

    #[test]
    fn mirror_symmetric_pair_stays_mirror_symmetric() {
        let phys = ModulePhysics::default();
        let coupling = CouplingModel::for_array(
            &crate::magnetics::preset_array("H").unwrap(),
            DEFAULT_ARRAY_RECESS_M,
        )
        .unwrap();
        let mut engine = LineEngine::pair(
            phys.clone(),
            phys,
            FrictionParams::default(),
            GravityMode::Upright,
            Some(coupling),
        );
        let mid = 0.15;
        let y0 = vec![
            0.0, 0.0, 0.0, 0.0, 0.3, 0.0, //
            2.0 * mid, 0.0, 0.0, 0.0, -0.3, 0.0,
        ];
        let cfg = SimConfig {
            dt: 1e-4,
            duration: 0.5,
            gravity_mode: GravityMode::Upright,
        };
        let out = run(
            &mut engine,
            y0,
            &mut [Drive::Torque(0.05), Drive::Torque(-0.05)],
            &cfg,
        )
        .unwrap();
        assert!(!out.diverged());
        let a: Vec<&Sample> = out.log.module(0).collect();
        let b: Vec<&Sample> = out.log.module(1).collect();
        for (sa, sb) in a.iter().zip(&b) {
            if sa.gap <= 0.0 {
                break; // symmetry guaranteed only until contact
            }
            assert!((sa.x + sb.x - 2.0 * mid).abs() < 1e-9);
            assert!((sa.theta + sb.theta).abs() < 1e-9);
            assert!((sa.phi + sb.phi).abs() < 1e-9);
        }
    }

    #[test]
    fn unmagnetized_pair_equals_two_single_runs_bitwise() {
        let phys = ModulePhysics::default();
        let cfg = SimConfig {
            dt: 1e-4,
            duration: 0.3,
            gravity_mode: GravityMode::Upright,
        };
        let mut pair = LineEngine::pair(
            phys.clone(),
            phys.clone(),
            FrictionParams::default(),
            GravityMode::Upright,
            None,
        );
        let y0 = vec![
            0.0, 0.0, 0.0, 0.0, 0.4, 0.0, //
            1.0, 0.0, 0.0, 0.0, -0.2, 0.3,
        ];
        let out = run(
            &mut pair,
            y0,
            &mut [Drive::Speed(1.0), Drive::Torque(0.02)],
            &cfg,
        )
        .unwrap();

        let mut single_a =
            LineEngine::single(phys.clone(), FrictionParams::default(), GravityMode::Upright);
        let out_a = run(
            &mut single_a,
            vec![0.0, 0.0, 0.0, 0.0, 0.4, 0.0],
            &mut [Drive::Speed(1.0)],
            &cfg,
        )
        .unwrap();
        let mut single_b =
            LineEngine::single(phys, FrictionParams::default(), GravityMode::Upright);
        let out_b = run(
            &mut single_b,
            vec![1.0, 0.0, 0.0, 0.0, -0.2, 0.3],
            &mut [Drive::Torque(0.02)],
            &cfg,
        )
        .unwrap();

        let pa: Vec<&Sample> = out.log.module(0).collect();
        let pb: Vec<&Sample> = out.log.module(1).collect();
        let sa: Vec<&Sample> = out_a.log.module(0).collect();
        let sb: Vec<&Sample> = out_b.log.module(0).collect();
        for (p, s) in pa.iter().zip(&sa).chain(pb.iter().zip(&sb)) {
            assert_eq!((p.x, p.phi, p.theta), (s.x, s.phi, s.theta));
            assert_eq!((p.x_dot, p.phi_dot, p.theta_dot), (s.x_dot, s.phi_dot, s.theta_dot));
        }
    }

    /// Stacked side-lying pair: equal top-view face torques spin the faces
    /// together (relative angle pinned at 0), opposite torques grind them
    /// against each other.
    #[test]
    fn stacked_pair_face_angle_sign_bookkeeping() {
        let phys = ModulePhysics::default();
        let cfg = SimConfig {
            dt: 1e-4,
            duration: 1.0,
            gravity_mode: GravityMode::Side,
        };
        let y0 = vec![0.0; 12];

        let mut co = LineEngine::pair(
            phys.clone(),
            phys.clone(),
            FrictionParams::default(),
            GravityMode::Side,
            None,
        );
        let out = run(
            &mut co,
            y0.clone(),
            &mut [Drive::Torque(0.05), Drive::Torque(0.05)],
            &cfg,
        )
        .unwrap();
        let last0 = out.log.last_of(0).unwrap();
        let last1 = out.log.last_of(1).unwrap();
        assert!(
            (last0.phi - last1.phi).abs() < 1e-6,
            "co-rotation must not grind: {} vs {}",
            last0.phi,
            last1.phi
        );

        let mut counter = LineEngine::pair(
            phys.clone(),
            phys,
            FrictionParams::default(),
            GravityMode::Side,
            None,
        );
        let out = run(
            &mut counter,
            y0,
            &mut [Drive::Torque(0.05), Drive::Torque(-0.05)],
            &cfg,
        )
        .unwrap();
        let last0 = out.log.last_of(0).unwrap();
        let last1 = out.log.last_of(1).unwrap();
        assert!(
            (last0.phi - last1.phi).abs() > 0.1,
            "counter-rotation must grow the relative face angle"
        );
    }

    /// Richardson convergence on a smooth swing: halving dt must shrink the
    /// endpoint error by about 2^4.
    #[test]
    fn rk4_convergence_order_on_smooth_swing() {
        let mut phys = ModulePhysics::default();
        phys.params.damping = 0.0;
        phys.rolling_resistance = 0.0;
        let endpoint = |dt: f64| -> f64 {
            let mut engine = LineEngine::single(
                phys.clone(),
                FrictionParams::default(),
                GravityMode::Upright,
            );
            let cfg = SimConfig {
                dt,
                duration: 1.0,
                gravity_mode: GravityMode::Upright,
            };
            let out = run(&mut engine, vec![0.0, 0.0, 0.0, 0.0, 0.8, 0.0], &mut [Drive::None], &cfg)
                .unwrap();
            out.log.last_of(0).unwrap().theta
        };
        let e1 = endpoint(4e-4);
        let e2 = endpoint(2e-4);
        let e3 = endpoint(1e-4);
        let order = ((e1 - e2).abs() / (e2 - e3).abs()).log2();
        assert!(order >= 3.7, "observed order {order}");
    }

    #[test]
    fn run_sample_count_includes_t0() {
        let mut engine = LineEngine::single(
            ModulePhysics::default(),
            FrictionParams::default(),
            GravityMode::Upright,
        );
        let cfg = SimConfig {
            dt: 1e-4,
            duration: 1.0,
            gravity_mode: GravityMode::Upright,
        };
        let out = run(&mut engine, vec![0.0; 6], &mut [Drive::None], &cfg).unwrap();
        assert_eq!(out.log.n_samples(), 10_001);
    }

    #[test]
    fn anchored_module_never_moves() {
        let mut engine = LineEngine::single(
            ModulePhysics::default(),
            FrictionParams::default(),
            GravityMode::Upright,
        );
        engine.set_regime(0, ContactRegime::Anchored);
        let cfg = SimConfig {
            dt: 1e-4,
            duration: 0.5,
            gravity_mode: GravityMode::Upright,
        };
        let out = run(
            &mut engine,
            vec![0.2, 0.0, 0.1, 0.0, 0.0, 0.0],
            &mut [Drive::Torque(0.5)],
            &cfg,
        )
        .unwrap();
        for s in out.log.module(0) {
            assert_eq!(s.x, 0.2);
            assert_eq!(s.phi, 0.1);
        }
    }

    #[test]
    fn repeat_runs_are_bitwise_identical() {
        let once = || {
            let phys = ModulePhysics::default();
            let mut engine =
                LineEngine::single(phys, FrictionParams::default(), GravityMode::Upright);
            let cfg = SimConfig {
                dt: 1e-4,
                duration: 1.0,
                gravity_mode: GravityMode::Upright,
            };
            run(
                &mut engine,
                vec![0.0, 0.0, 0.0, 0.0, 0.3, 0.0],
                &mut [Drive::Speed(0.7)],
                &cfg,
            )
            .unwrap()
            .log
            .to_csv()
        };
        assert_eq!(once(), once());
    }
}
