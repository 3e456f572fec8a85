//! Python bindings: the analysis entry points and scenario runner of the
//! core crate, with plain Python types (dicts, lists, tuples) at the
//! boundary so no Rust types leak into user code.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use rolldisk_core::config::ResolvedConfig;
use rolldisk_core::dynamics::{
    single_module_derivative, ContactRegime, CouplingModel, FrictionParams, GravityMode,
    ModulePhysics, ModuleState, DEFAULT_ARRAY_RECESS_M,
};
use rolldisk_core::linmodel::{
    closed_loop_tf, published_gain_conditions, q_factor, ModuleParams, PdGains,
};
use rolldisk_core::magnetics::{
    flux_profile as core_flux_profile, gap_force_discrepancy, preset_array, PRESET_NAMES,
};
use rolldisk_core::scenarios::{self, Sense};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Names of the built-in magnet array layouts.
#[pyfunction]
fn magnet_presets() -> Vec<String> {
    PRESET_NAMES.iter().map(|s| s.to_string()).collect()
}

/// Names every scenario `run_scenario` accepts.
#[pyfunction]
fn list_scenarios() -> Vec<String> {
    scenarios::SCENARIO_NAMES.iter().map(|s| s.to_string()).collect()
}

/// Flux magnitude along the array normal: returns (distances_m, flux_T).
#[pyfunction]
#[pyo3(signature = (preset, start_m, end_m, samples=64))]
fn flux_profile(
    preset: &str,
    start_m: f64,
    end_m: f64,
    samples: usize,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let array = preset_array(preset).map_err(value_err)?;
    let profile = core_flux_profile(&array, start_m, end_m, samples).map_err(value_err)?;
    Ok((profile.distances, profile.flux_magnitude))
}

/// Coupling attraction between two facing arrays at a surface gap, N.
#[pyfunction]
#[pyo3(signature = (preset, gap_m, scale=1.0))]
fn attraction(preset: &str, gap_m: f64, scale: f64) -> PyResult<f64> {
    let array = preset_array(preset).map_err(value_err)?;
    let mut model =
        CouplingModel::for_array(&array, DEFAULT_ARRAY_RECESS_M).map_err(value_err)?;
    model.scale *= scale;
    Ok(model.attraction(gap_m))
}

/// The closed-form gap-force reference value and its documented
/// discrepancy against the quoted load.
#[pyfunction]
fn gap_force_reference(py: Python<'_>) -> PyResult<Py<PyDict>> {
    let d = gap_force_discrepancy();
    let out = PyDict::new(py);
    out.set_item("computed_force_n", d.computed_force_n)?;
    out.set_item("reported_force_n", d.reported_force_n)?;
    out.set_item("ratio", d.ratio)?;
    out.set_item("reported_load_kg", d.reported_load_kg)?;
    out.set_item("note", d.note)?;
    Ok(out.into())
}

/// Linearized module constant q (denominator scale of the plant).
#[pyfunction]
fn module_q_factor() -> f64 {
    q_factor(&ModuleParams::default())
}

/// Closed-form gain conditions plus closed-loop poles for (kp, kd).
#[pyfunction]
fn gain_check(py: Python<'_>, kp: f64, kd: f64) -> PyResult<Py<PyDict>> {
    let params = ModuleParams::default();
    let gains = PdGains { kp, kd };
    let cond = published_gain_conditions(&params, &gains).map_err(value_err)?;
    let tf = closed_loop_tf(&params, &gains).map_err(value_err)?;
    let poles: Vec<(f64, f64)> = tf
        .poles()
        .map_err(value_err)?
        .into_iter()
        .map(|p| (p.re, p.im))
        .collect();
    let out = PyDict::new(py);
    out.set_item("condition1", cond.condition1)?;
    out.set_item("margin1", cond.margin1)?;
    out.set_item("condition2", cond.condition2)?;
    out.set_item("margin2", cond.margin2)?;
    out.set_item("min_kp", cond.min_kp)?;
    out.set_item("poles", poles)?;
    Ok(out.into())
}

/// Time derivative of one module's state under a direct motor torque.
/// Returns (x_dot, x_ddot, phi_dot, phi_ddot, theta_dot, theta_ddot).
#[pyfunction]
#[pyo3(signature = (state, torque=0.0, mode="upright", regime="stick"))]
fn module_derivative(
    state: (f64, f64, f64, f64, f64, f64),
    torque: f64,
    mode: &str,
    regime: &str,
) -> PyResult<(f64, f64, f64, f64, f64, f64)> {
    let mode = match mode {
        "upright" => GravityMode::Upright,
        "side" => GravityMode::Side,
        other => return Err(value_err(format!("mode must be upright or side, got {other}"))),
    };
    let regime = ContactRegime::from_str(regime)
        .ok_or_else(|| value_err(format!("unknown contact regime \"{regime}\"")))?;
    let s = ModuleState {
        x: state.0,
        x_dot: state.1,
        phi: state.2,
        phi_dot: state.3,
        theta: state.4,
        theta_dot: state.5,
        regime,
    };
    let d = single_module_derivative(
        &ModulePhysics::default(),
        &FrictionParams::default(),
        &s,
        torque,
        mode,
    )
    .map_err(value_err)?;
    Ok((d.x_dot, d.x_ddot, d.phi_dot, d.phi_ddot, d.theta_dot, d.theta_ddot))
}

/// Runs a named scenario and returns its metric report as a dict. With
/// `include_log=True` the trajectory is attached as a CSV string.
#[pyfunction]
#[pyo3(signature = (name, magnet_scale=None, duration=None, include_log=false))]
fn run_scenario(
    py: Python<'_>,
    name: &str,
    magnet_scale: Option<f64>,
    duration: Option<f64>,
    include_log: bool,
) -> PyResult<Py<PyDict>> {
    let mut cfg = ResolvedConfig::default();
    if let Some(scale) = magnet_scale {
        cfg.magnet_scale = scale;
        cfg.mark_flag("magnet_scale");
    }
    if let Some(d) = duration {
        cfg.sim.duration = d;
        cfg.mark_flag("sim.duration");
    }
    cfg.validate().map_err(value_err)?;
    let report = scenarios::from_config(name, &cfg)
        .map_err(value_err)?
        .run()
        .map_err(value_err)?;

    let metrics = PyList::empty(py);
    for m in &report.metrics {
        let entry = PyDict::new(py);
        entry.set_item("name", &m.name)?;
        entry.set_item("measured", m.measured)?;
        entry.set_item("threshold", m.threshold)?;
        entry.set_item(
            "sense",
            match m.sense {
                Sense::AtMost => "at_most",
                Sense::AtLeast => "at_least",
            },
        )?;
        entry.set_item("pass", m.pass())?;
        metrics.append(entry)?;
    }
    let out = PyDict::new(py);
    out.set_item("scenario", &report.scenario)?;
    out.set_item("metrics", metrics)?;
    out.set_item("expected_failure", report.expected_failure)?;
    out.set_item("metrics_pass", report.metrics_pass())?;
    out.set_item("as_expected", report.as_expected())?;
    out.set_item("note", report.note.as_deref())?;
    out.set_item("divergence", report.log.divergence.as_deref())?;
    if include_log {
        out.set_item("trajectory_csv", report.log.to_csv())?;
    }
    Ok(out.into())
}

#[pymodule]
fn rolldisk(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(magnet_presets, m)?)?;
    m.add_function(wrap_pyfunction!(list_scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(flux_profile, m)?)?;
    m.add_function(wrap_pyfunction!(attraction, m)?)?;
    m.add_function(wrap_pyfunction!(gap_force_reference, m)?)?;
    m.add_function(wrap_pyfunction!(module_q_factor, m)?)?;
    m.add_function(wrap_pyfunction!(gain_check, m)?)?;
    m.add_function(wrap_pyfunction!(module_derivative, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
