//! Layered run configuration: built-in defaults, then an optional TOML
//! file, then command-line overrides, with per-key provenance recorded so a
//! run manifest can say exactly where every value came from.
//!
//! File values use bench units (millimeters, degrees) where that is what a
//! person would type; everything is converted to SI on resolution.

use crate::dynamics::{GravityMode, SimConfig, DEFAULT_ARRAY_RECESS_M};
use crate::linmodel::{ModuleParams, PdGains};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid value: {0}")]
    Invalid(String),
}

/// Where a resolved value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Default,
    File,
    Flag,
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layer::Default => "default",
            Layer::File => "file",
            Layer::Flag => "flag",
        })
    }
}

// ---------------------------------------------------------------------------
// File schema. Every field is optional; present fields override defaults.
// ---------------------------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    magnet: MagnetSection,
    #[serde(default)]
    module: ModuleSection,
    #[serde(default)]
    gains: GainsSection,
    #[serde(default)]
    sim: SimSection,
    #[serde(default)]
    scenario: ScenarioSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MagnetSection {
    /// Preset array name ("H", "X", ...).
    preset: Option<String>,
    /// Multiplier on the attraction curve (1.0 = as built).
    scale: Option<f64>,
    /// How deep each array sits behind its coupling face, mm.
    recess_mm: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModuleSection {
    shell_mass_kg: Option<f64>,
    pendulum_mass_kg: Option<f64>,
    arm_mm: Option<f64>,
    inertia_kgm2: Option<f64>,
    damping: Option<f64>,
    radius_mm: Option<f64>,
    rolling_resistance: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GainsSection {
    kp: Option<f64>,
    kd: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimSection {
    dt_s: Option<f64>,
    duration_s: Option<f64>,
    /// "upright" or "side".
    gravity_mode: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSection {
    name: Option<String>,
    start_gap_mm: Option<f64>,
    pendulum_target_deg: Option<f64>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }
}

// ---------------------------------------------------------------------------
// Resolved configuration, SI units throughout.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub magnet_preset: String,
    pub magnet_scale: f64,
    /// Array recess behind the coupling face, m.
    pub recess_m: f64,
    pub module: ModuleParams,
    pub rolling_resistance: f64,
    pub gains: PdGains,
    pub sim: SimConfig,
    pub scenario: Option<String>,
    /// Starting surface gap for the docking scenario, m.
    pub start_gap_m: f64,
    /// Pendulum hold target, rad.
    pub pendulum_target: f64,
    provenance: BTreeMap<String, Layer>,
}

impl Default for ResolvedConfig {
    fn default() -> Self {
        Self {
            magnet_preset: "H".into(),
            magnet_scale: 1.0,
            recess_m: DEFAULT_ARRAY_RECESS_M,
            module: ModuleParams::default(),
            rolling_resistance: 0.005,
            gains: PdGains::default(),
            sim: SimConfig::default(),
            scenario: None,
            start_gap_m: 0.30,
            pendulum_target: std::f64::consts::FRAC_PI_4,
            provenance: BTreeMap::new(),
        }
    }
}

macro_rules! take {
    ($self:ident, $layer:expr, $src:expr => $($field:tt)+) => {
        if let Some(v) = $src {
            $self.$($field)+ = v;
            $self
                .provenance
                .insert(stringify!($($field)+).replace(' ', ""), $layer);
        }
    };
}

impl ResolvedConfig {
    /// Applies a parsed file on top of the current values.
    pub fn apply_file(&mut self, file: &ConfigFile) -> Result<(), ConfigError> {
        let l = Layer::File;
        take!(self, l, file.magnet.preset.clone() => magnet_preset);
        take!(self, l, file.magnet.scale => magnet_scale);
        take!(self, l, file.magnet.recess_mm.map(|v| v * 1e-3) => recess_m);
        take!(self, l, file.module.shell_mass_kg => module.shell_mass);
        take!(self, l, file.module.pendulum_mass_kg => module.pendulum_mass);
        take!(self, l, file.module.arm_mm.map(|v| v * 1e-3) => module.arm);
        take!(self, l, file.module.inertia_kgm2 => module.inertia);
        take!(self, l, file.module.damping => module.damping);
        take!(self, l, file.module.radius_mm.map(|v| v * 1e-3) => module.radius);
        take!(self, l, file.module.rolling_resistance => rolling_resistance);
        take!(self, l, file.gains.kp => gains.kp);
        take!(self, l, file.gains.kd => gains.kd);
        take!(self, l, file.sim.dt_s => sim.dt);
        take!(self, l, file.sim.duration_s => sim.duration);
        if let Some(mode) = &file.sim.gravity_mode {
            self.sim.gravity_mode = match mode.as_str() {
                "upright" => GravityMode::Upright,
                "side" => GravityMode::Side,
                other => {
                    return Err(ConfigError::Invalid(format!(
                        "sim.gravity_mode must be \"upright\" or \"side\", got \"{other}\""
                    )))
                }
            };
            self.provenance.insert("sim.gravity_mode".into(), l);
        }
        take!(self, l, file.scenario.name.clone().map(Some) => scenario);
        take!(self, l, file.scenario.start_gap_mm.map(|v| v * 1e-3) => start_gap_m);
        take!(self, l, file.scenario.pendulum_target_deg.map(f64::to_radians) => pendulum_target);
        self.validate()
    }

    /// Records a command-line override for one dotted key; values arrive
    /// already in SI units from the CLI layer.
    pub fn mark_flag(&mut self, key: &str) {
        self.provenance.insert(key.into(), Layer::Flag);
    }

    pub fn provenance_of(&self, key: &str) -> Layer {
        self.provenance.get(key).copied().unwrap_or(Layer::Default)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive: [(&str, f64); 7] = [
            ("magnet.scale", self.magnet_scale),
            ("module.shell_mass_kg", self.module.shell_mass),
            ("module.pendulum_mass_kg", self.module.pendulum_mass),
            ("module.arm_mm", self.module.arm),
            ("module.radius_mm", self.module.radius),
            ("sim.dt_s", self.sim.dt),
            ("sim.duration_s", self.sim.duration),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(ConfigError::Invalid(format!("{name} must be positive")));
            }
        }
        if self.recess_m < 0.0 {
            return Err(ConfigError::Invalid(
                "magnet.recess_mm must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Full manifest of this run: resolved values, where each overridden one
    /// came from, tool version and wall-clock time.
    pub fn manifest(&self) -> RunManifest {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            unix_time_s: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            resolved: self.clone(),
            provenance: self.provenance.clone(),
        }
    }
}

/// Snapshot written next to run outputs so results stay reproducible.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub unix_time_s: u64,
    pub resolved: ResolvedConfig,
    /// Only keys that differ from the defaults appear here.
    pub provenance: BTreeMap<String, Layer>,
}

impl RunManifest {
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("manifest serializes")
    }
}
