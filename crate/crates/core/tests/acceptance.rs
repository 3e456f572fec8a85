//! End-to-end acceptance suite. Each test covers one release criterion,
//! prints a single PASS/FAIL line (visible with `--nocapture`), and asserts
//! it. Tolerances are the shipped ones, not test-local conveniences; every
//! reference value is recomputed here from scratch rather than imported
//! from the code under test.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::Vector3;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rolldisk_core::control::{ActuatorLimits, PdController, Setpoint, SetpointProfile};
use rolldisk_core::dynamics::{
    run, ContactRegime, CouplingModel, Drive, FrictionParams, GravityMode, LineEngine,
    ModulePhysics, ModuleState, SimConfig, DEFAULT_ARRAY_RECESS_M,
};
use rolldisk_core::linmodel::{
    closed_loop_tf, hurwitz_test, open_loop_tf, published_gain_conditions, q_factor, ModuleParams,
    PdGains, Polynomial, StabilityVerdict,
};
use rolldisk_core::magnetics::{
    coupling_force, coupling_reaction, field_at, flux_profile, gap_force, gap_force_discrepancy,
    load_capacity, preset_array, GapForceParams, MagnetArray, MagnetCell, MU0,
};
use rolldisk_core::scenarios::{
    run_all, scenario_joint_weak_magnet, scenario_pendulum, scenario_spin, SpinMode,
};

fn report(ok: bool, line: &str) {
    println!("{} {line}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{line}");
}

/// Gap-force formula evaluates to the hand value (~21.64 N) and the
/// discrepancy record carries the quoted 7.24 N alongside it.
#[test]
fn gap_force_formula_matches_hand_value() {
    let computed = gap_force(&GapForceParams::reference()).unwrap();
    // Hand evaluation from the raw constants, written out rather than
    // shared with the implementation.
    let hand = 4.0e-7 * PI * 501.34e3 * 501.34e3 * 1.37e-4 / 2.0;
    let rel = (computed - hand).abs() / hand;
    let near_2164 = (computed - 21.64).abs() / 21.64;
    let d = gap_force_discrepancy();
    let ok = rel < 1e-3
        && near_2164 < 1e-3
        && (d.reported_force_n - 7.24).abs() < 1e-12
        && d.ratio > 2.9
        && d.ratio < 3.1;
    report(
        ok,
        &format!(
            "gap-force formula: {computed:.4} N vs hand value {hand:.4} N (rel {rel:.2e}), \
             quoted {:.2} N kept in the discrepancy record (ratio {:.3})",
            d.reported_force_n, d.ratio
        ),
    );
}

/// Load capacity of the quoted 7.24 N at g = 9.81 lands within 1.1% of the
/// quoted 0.731 kg, and the g back-implied by the quoted pair is recorded.
#[test]
fn load_capacity_matches_quoted_mass() {
    let mass = load_capacity(7.24, 9.81).unwrap();
    let rel = (mass - 0.731).abs() / 0.731;
    let d = gap_force_discrepancy();
    let implied_g = 7.24 / 0.731;
    let ok = rel < 0.011 && (d.implied_g - implied_g).abs() < 1e-12;
    report(
        ok,
        &format!(
            "load capacity: 7.24 N / 9.81 = {mass:.4} kg vs quoted 0.731 kg (rel {rel:.2e}), \
             implied g {implied_g:.4} recorded"
        ),
    );
}

/// q factor and every transfer-function coefficient match a from-scratch
/// arithmetic evaluation of the published parameter set to 1e-6 relative.
#[test]
fn q_factor_and_tf_coefficients_match_arithmetic_oracle() {
    let p = ModuleParams::default();
    let (cap_m, m, l, i, b, g) = (0.172, 0.094, 0.060, 3.384e-3, 0.01, 9.81);
    let q_hand = (cap_m + m) * (i + m * l * l) - (m * l) * (m * l);
    let q = q_factor(&p);
    let mut worst: f64 = (q - q_hand).abs() / q_hand;
    // Shipped-value sanity: the scale the rest of the model hangs off.
    assert!((q - 9.58e-4).abs() / 9.58e-4 < 1e-3);

    let i_eff = i + m * l * l;
    let open = open_loop_tf(&p).unwrap();
    let open_den = [
        -b * m * g * l / q_hand,
        -(cap_m + m) * m * g * l / q_hand,
        b * i_eff / q_hand,
        1.0,
    ];
    for (k, hand) in open_den.iter().enumerate() {
        worst = worst.max((open.denominator.coeff(k) - hand).abs() / hand.abs());
    }
    worst = worst.max((open.numerator.coeff(1) - m * l / q_hand).abs() / (m * l / q_hand));

    let (kp, kd) = (2.5, 0.5);
    let closed = closed_loop_tf(&p, &PdGains { kp, kd }).unwrap();
    let closed_den = [
        -b * g * l * m / q_hand,
        (kp * l * m - (cap_m + m) * m * g * l) / q_hand,
        (b * i_eff + kd * l * m) / q_hand,
        1.0,
    ];
    for (k, hand) in closed_den.iter().enumerate() {
        worst = worst.max((closed.denominator.coeff(k) - hand).abs() / hand.abs());
    }
    let ok = worst < 1e-6;
    report(
        ok,
        &format!("q factor {q:.6e} and TF coefficients vs arithmetic oracle: worst rel {worst:.2e}"),
    );
}

/// Minimal stabilizing kp equals (M+m)g, the deployed kp = 2.5 violates it,
/// and the full Routh test flags the negative constant term -b g l m / q
/// for any positive damping and gravity.
#[test]
fn gain_conditions_and_negative_constant_term() {
    let p = ModuleParams::default();
    let cond = published_gain_conditions(&p, &PdGains { kp: 2.5, kd: 0.5 }).unwrap();
    let min_kp_hand = (0.172 + 0.094) * 9.81;
    let mut ok = (cond.min_kp - min_kp_hand).abs() / min_kp_hand < 1e-12;
    ok &= cond.condition1 && !cond.condition2;

    // The constant term stays negative however the gains are chosen, so the
    // full criterion must reject every gain pair while b, g > 0.
    for (b, g, kp, kd) in [(0.01, 9.81, 5.0, 1.0), (0.5, 3.7, 100.0, 20.0)] {
        let mut params = p;
        params.damping = b;
        params.gravity = g;
        let tf = closed_loop_tf(&params, &PdGains { kp, kd }).unwrap();
        let q = q_factor(&params);
        let c0_hand = -b * g * params.arm * params.pendulum_mass / q;
        ok &= (tf.denominator.coeff(0) - c0_hand).abs() / c0_hand.abs() < 1e-12;
        ok &= tf.denominator.coeff(0) < 0.0;
        ok &= !hurwitz_test(&tf.denominator).unwrap().is_stable();
    }
    report(
        ok,
        &format!(
            "gain conditions: min kp {:.4} = (M+m)g, deployed kp 2.5 violates it \
             (margin {:.2e}); constant term -bglm/q negative and Routh-rejected for b,g > 0",
            cond.min_kp, cond.margin2
        ),
    );
}

/// On 1000 random cubics and quartics the Routh verdict agrees with the
/// sign of the maximum pole real part, outside a 1e-9 marginal band.
#[test]
fn routh_verdict_matches_pole_signs_on_random_polynomials() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut included = 0usize;
    let mut disagreements = 0usize;
    while included < 1000 {
        let degree = if rng.gen_bool(0.5) { 3 } else { 4 };
        let mut coeffs: Vec<f64> = (0..degree).map(|_| rng.gen_range(-2.0..2.0)).collect();
        coeffs.push(rng.gen_range(0.2..2.0)); // leading, kept away from zero
        let poly = Polynomial::new(coeffs).unwrap();
        let max_re = poly
            .roots()
            .unwrap()
            .iter()
            .map(|r| r.re)
            .fold(f64::NEG_INFINITY, f64::max);
        if max_re.abs() <= 1e-9 {
            continue; // marginal band: neither verdict is defensible
        }
        let verdict = hurwitz_test(&poly).unwrap().verdict;
        if verdict == StabilityVerdict::Marginal {
            continue; // epsilon-bridged table, excluded like the band
        }
        included += 1;
        let stable_by_poles = max_re < 0.0;
        if (verdict == StabilityVerdict::Stable) != stable_by_poles {
            disagreements += 1;
        }
    }
    report(
        disagreements == 0,
        &format!("Routh vs companion-matrix poles: {included} random polynomials, {disagreements} disagreements"),
    );
}

/// Magnetics oracles: far field vs point dipole, exact sign flip under
/// polarity negation, action/reaction cancellation, and the reversed-H
/// layout beating plain H on near-face flux.
#[test]
fn magnetics_field_and_force_oracles() {
    let cell = MagnetCell {
        center: [0.0; 3],
        half_extents: [0.005, 0.005, 0.0025],
        polarity: 1,
        remanence: 1.32,
    };
    let single = MagnetArray::new("single", vec![cell]).unwrap();
    let moment = cell.dipole_moment();
    let mut worst_far: f64 = 0.0;
    // Beyond 5 cell lengths in assorted directions, relative to |B|.
    for dir in [
        Vector3::new(0.0, 0.0, 1.0),
        Vector3::new(1.0, 0.0, 1.0).normalize(),
        Vector3::new(0.3, -0.8, 0.52).normalize(),
        Vector3::new(1.0, 1.0, 0.2).normalize(),
    ] {
        for radius in [0.06, 0.08, 0.12] {
            let point = dir * radius;
            let b = field_at(&single, point).unwrap();
            let r = point.norm();
            let rhat = point / r;
            let mvec = Vector3::new(0.0, 0.0, moment);
            let dipole = (rhat * 3.0 * mvec.dot(&rhat) - mvec) * MU0 / (4.0 * PI * r * r * r);
            worst_far = worst_far.max((b - dipole).norm() / dipole.norm());
        }
    }

    let h = preset_array("H").unwrap();
    let hr = preset_array("H-reversed").unwrap();
    let neg = h.negated();
    let probe = Vector3::new(0.004, -0.007, 0.02);
    let b_pos = field_at(&h, probe).unwrap();
    let b_neg = field_at(&neg, probe).unwrap();
    let sign_exact = b_pos == -b_neg;

    let f_ab = coupling_force(&h, &hr, 0.006).unwrap();
    let f_ba = coupling_reaction(&h, &hr, 0.006).unwrap();
    let newton = (f_ab + f_ba).norm() / f_ab.norm();
    let f_neg = coupling_force(&h.negated(), &hr, 0.006).unwrap();
    let force_sign_exact = f_neg == -f_ab;

    let flux_h = flux_profile(&h, 0.005, 0.010, 40).unwrap().max_flux_in(0.005, 0.010);
    let flux_hr = flux_profile(&hr, 0.005, 0.010, 40)
        .unwrap()
        .max_flux_in(0.005, 0.010);

    let ok = worst_far < 0.02 && sign_exact && force_sign_exact && newton < 1e-12 && flux_hr > flux_h;
    report(
        ok,
        &format!(
            "magnetics: far field vs dipole worst rel {worst_far:.2e}, polarity flip exact \
             {sign_exact}/{force_sign_exact}, action-reaction residual {newton:.2e}, \
             reversed-H peak flux {flux_hr:.4} T > H {flux_h:.4} T"
        ),
    );
}

/// Simulator physics: a frictionless torque-free 10 s run conserves energy
/// to 1e-6 and holds the rolling constraint to 1e-9 at every sample; RK4
/// shows at least order 3.7; repeat runs are bitwise identical.
#[test]
fn simulator_conservation_convergence_and_determinism() {
    let mut phys = ModulePhysics::default();
    phys.params.damping = 0.0;
    phys.rolling_resistance = 0.0;
    let r = phys.params.radius;
    let mode = GravityMode::Upright;
    let cfg = SimConfig {
        dt: 1e-4,
        duration: 10.0,
        gravity_mode: mode,
    };
    let swing = |duration: f64, dt: f64| {
        let mut engine = LineEngine::single(phys.clone(), FrictionParams::default(), mode);
        run(
            &mut engine,
            vec![0.0, 0.0, 0.0, 0.0, 0.5, 0.0],
            &mut [Drive::None],
            &SimConfig {
                dt,
                duration,
                gravity_mode: mode,
            },
        )
        .unwrap()
    };
    let out = swing(cfg.duration, cfg.dt);
    let energy = |s: &rolldisk_core::dynamics::Sample| {
        rolldisk_core::dynamics::mechanical_energy(
            &phys,
            &ModuleState {
                x: s.x,
                x_dot: s.x_dot,
                phi: s.phi,
                phi_dot: s.phi_dot,
                theta: s.theta,
                theta_dot: s.theta_dot,
                regime: ContactRegime::Stick,
            },
            mode,
        )
    };
    let e0 = energy(out.log.module(0).next().unwrap());
    let mut worst_energy: f64 = 0.0;
    let mut worst_residual: f64 = 0.0;
    for s in out.log.module(0) {
        worst_energy = worst_energy.max((energy(s) - e0).abs() / e0.abs());
        worst_residual = worst_residual.max((s.x_dot - r * s.phi_dot).abs());
    }

    let endpoint = |dt: f64| swing(1.0, dt).log.last_of(0).unwrap().theta;
    let (e1, e2, e3) = (endpoint(4e-4), endpoint(2e-4), endpoint(1e-4));
    let order = ((e1 - e2).abs() / (e2 - e3).abs()).log2();

    let repeat = swing(cfg.duration, cfg.dt);
    let bitwise = out.log.samples == repeat.log.samples;

    let ok = worst_energy <= 1e-6 && worst_residual <= 1e-9 && order >= 3.7 && bitwise;
    report(
        ok,
        &format!(
            "simulator physics: energy drift {worst_energy:.2e} (<= 1e-6), rolling residual \
             {worst_residual:.2e} (<= 1e-9), RK4 order {order:.2} (>= 3.7), bitwise repeat {bitwise}"
        ),
    );
}

/// Small-angle driven response of the nonlinear simulator matches the
/// linear transfer-function amplitude within 2%. The run is seeded on the
/// hanging-pendulum steady orbit so no slow free swing pollutes the
/// steady-state window (the shell damper barely touches that mode).
#[test]
fn driven_small_angle_response_matches_linear_amplitude() {
    let (f0, w) = (18.0, 60.0);
    let p = ModuleParams::default();
    let (m, l, b, g) = (p.pendulum_mass, p.arm, p.damping, p.gravity);
    let i_eff = p.inertia + m * l * l;
    let ml = m * l;
    let mt = p.total_mass();
    let q = mt * i_eff - ml * ml;
    // Steady phasors of the hanging linearization under F = f0 sin(wt):
    // theta/F = -ml s / (q s^3 + b i_eff s^2 + mt m g l s + b m g l),
    // x = -(i_eff s^2 + m g l) theta / (ml s^2).
    let s = Complex64::new(0.0, w);
    let den = q * s * s * s + b * i_eff * s * s + mt * m * g * l * s + b * m * g * l;
    let th = -ml * s / den * f0;
    let xh = -(i_eff * s * s + m * g * l) * th / (ml * s * s);

    let mut phys = ModulePhysics::default();
    phys.shell_inertia = 0.0; // drops the shell spin term the linear model lacks
    phys.rolling_resistance = 0.0;
    let r = phys.params.radius;
    let y0 = vec![
        xh.im,
        (s * xh).im,
        xh.im / r,
        (s * xh).im / r,
        th.im,
        (s * th).im,
    ];
    let mut engine = LineEngine::single(phys, FrictionParams::default(), GravityMode::Upright);
    engine.shell_drive = Some((f0, w));
    let cfg = SimConfig {
        dt: 1e-4,
        duration: 10.0,
        gravity_mode: GravityMode::Upright,
    };
    let out = run(&mut engine, y0, &mut [Drive::None], &cfg).unwrap();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in out.log.module(0).filter(|s| s.t >= 8.0) {
        lo = lo.min(s.theta);
        hi = hi.max(s.theta);
    }
    let amp = 0.5 * (hi - lo);
    let lin = open_loop_tf(&p).unwrap().magnitude_at(w) * f0;
    let rel = (amp - lin).abs() / lin;
    let ok = rel < 0.02 && amp.to_degrees() <= 3.0;
    report(
        ok,
        &format!(
            "driven response: nonlinear amplitude {:.3} deg vs linear {:.3} deg (rel {rel:.2e} < 2%)",
            amp.to_degrees(),
            lin.to_degrees()
        ),
    );
}

/// Full behavioural suite: pendulum tracking with shell counter-rotation,
/// coupling from 0.30 m, joint pivot at radius 2r, counter- and co-spin,
/// weak-magnet release, and the documented balance failure.
#[test]
fn behavioural_scenario_suite() {
    let t0 = Instant::now();
    let mut reports = run_all().unwrap();
    reports.push(scenario_spin(SpinMode::Co).run().unwrap());
    reports.push(scenario_joint_weak_magnet().run().unwrap());
    let mut ok = true;
    for rep in &reports {
        let line: Vec<String> = rep
            .metrics
            .iter()
            .map(|m| format!("{} = {:.4}", m.name, m.measured))
            .collect();
        let good = rep.as_expected();
        ok &= good;
        println!(
            "  {} {}{}: {}",
            if good { "ok  " } else { "BAD " },
            rep.scenario,
            if rep.expected_failure { " (expected failure)" } else { "" },
            line.join(", ")
        );
    }

    // Shell counter-rotation during the pendulum transient: phi is measured
    // in the rolling direction (clockwise when theta swings counter-
    // clockwise), so a matching numeric sign means opposing rotations.
    let pend = scenario_pendulum().run().unwrap();
    let phi0 = pend.log.module(0).next().unwrap().phi;
    let excursion = pend
        .log
        .module(0)
        .filter(|s| s.t <= 0.5)
        .map(|s| s.phi - phi0)
        .fold(0.0, |acc: f64, d| if d.abs() > acc.abs() { d } else { acc });
    let counter_rotates = excursion > 0.0; // target is +45 deg
    ok &= counter_rotates;

    let elapsed = t0.elapsed().as_secs_f64();
    ok &= elapsed < 180.0;
    report(
        ok,
        &format!(
            "behavioural suite: {} scenarios as expected, shell counter-rotation \
             excursion {excursion:.2e} rad, wall time {elapsed:.1} s (< 180 s)",
            reports.len()
        ),
    );
}

/// A 10 s two-module run at dt = 1e-4 (100 000 RK4 steps) finishes in under
/// 5 s of wall time.
#[test]
fn two_module_run_meets_wall_time_budget() {
    let phys = ModulePhysics::default();
    let r = phys.params.radius;
    let array = preset_array("H").unwrap();
    let coupling = CouplingModel::for_array(&array, DEFAULT_ARRAY_RECESS_M).unwrap();
    let mut engine = LineEngine::pair(
        phys.clone(),
        phys,
        FrictionParams::default(),
        GravityMode::Upright,
        Some(coupling),
    );
    let lean = 15.0 * PI / 180.0;
    let pd = |target: f64| {
        Drive::Pd(PdController::new(
            PdGains::default(),
            SetpointProfile::constant(Setpoint::hold(target)),
            ActuatorLimits::default(),
        ))
    };
    let y0 = vec![
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, //
        2.0 * r + 0.30, 0.0, 0.0, 0.0, 0.0, 0.0,
    ];
    let cfg = SimConfig {
        dt: 1e-4,
        duration: 10.0,
        gravity_mode: GravityMode::Upright,
    };
    let t0 = Instant::now();
    let out = run(&mut engine, y0, &mut [pd(lean), pd(-lean)], &cfg).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    let ok = elapsed < 5.0 && !out.diverged() && out.log.n_samples() == 100_001;
    report(
        ok,
        &format!(
            "performance: 100000 two-module RK4 steps in {elapsed:.2} s (< 5 s), {} samples",
            out.log.n_samples()
        ),
    );
}
