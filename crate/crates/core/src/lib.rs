//! Simulation and analysis toolkit for pendulum-actuated rolling disk robot
//! modules with magnetic coupling.
//!
//! The crate is organised around the physical subsystems of the robot:
//!
//! - [`magnetics`]: analytic cuboid-magnet arrays, flux profiles, gap force
//!   and array-to-array coupling force.
//! - [`linmodel`]: the linearised cart-pendulum transfer functions, pole
//!   computation, Routh-Hurwitz analysis and stable-gain-region sweeps.
//! - [`control`]: the PD velocity-mode controller with setpoint profiles,
//!   saturation and rate limiting.
//! - [`dynamics`]: nonlinear planar multi-body simulation of one or two
//!   modules with stick-slip rolling contact, magnetic coupling and
//!   fixed-step RK4 integration.
//! - [`scenarios`]: the five scripted motion behaviours with pass/fail
//!   metric reports.
//! - [`config`]: layered TOML configuration and run manifests.

pub mod config;
pub mod control;
pub mod dynamics;
pub mod linmodel;
pub mod magnetics;
pub mod scenarios;
