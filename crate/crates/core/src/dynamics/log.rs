//! Time-stamped trajectory records and their CSV form.

use super::{ContactRegime, DynamicsError};

/// One module's logged quantities at one sample instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    /// Module index, 0-based.
    pub module: usize,
    pub x: f64,
    pub x_dot: f64,
    pub phi: f64,
    pub phi_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
    /// Controller output before the motor-side sign, rad/s (0 for torque or
    /// undriven modules).
    pub u: f64,
    pub regime: ContactRegime,
    /// Inter-module surface gap, m; 0 for single-module runs.
    pub gap: f64,
    pub coupled: bool,
}

/// Full simulation record: one [`Sample`] per module per time step.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryLog {
    pub samples: Vec<Sample>,
    pub n_modules: usize,
    /// Set when the run aborted; the log holds the partial trajectory.
    pub divergence: Option<String>,
}

pub const CSV_HEADER: &str = "t,module,x,x_dot,phi,phi_dot,theta,theta_dot,u,regime,gap,coupled";

impl TrajectoryLog {
    pub fn new(n_modules: usize) -> Self {
        Self {
            samples: Vec::new(),
            n_modules,
            divergence: None,
        }
    }

    /// Number of time samples (rows per module).
    pub fn n_samples(&self) -> usize {
        self.samples.len() / self.n_modules.max(1)
    }

    /// Iterator over one module's samples in time order.
    pub fn module(&self, idx: usize) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(move |s| s.module == idx)
    }

    /// Last sample of a module, if any.
    pub fn last_of(&self, idx: usize) -> Option<&Sample> {
        self.samples.iter().rev().find(|s| s.module == idx)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * self.samples.len() + 64);
        out.push_str(CSV_HEADER);
        out.push('\n');
        for s in &self.samples {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                s.t,
                s.module + 1,
                s.x,
                s.x_dot,
                s.phi,
                s.phi_dot,
                s.theta,
                s.theta_dot,
                s.u,
                s.regime.as_str(),
                s.gap,
                u8::from(s.coupled),
            ));
        }
        out
    }

    /// Parses a log back from its CSV form, so metrics can be replayed
    /// without re-simulating.
    pub fn from_csv(text: &str) -> Result<Self, DynamicsError> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == CSV_HEADER => {}
            _ => return Err(DynamicsError::BadLog("missing or wrong header".into())),
        }
        let mut log = TrajectoryLog::new(1);
        let mut max_module = 0usize;
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 12 {
                return Err(DynamicsError::BadLog(format!(
                    "line {}: expected 12 fields, got {}",
                    i + 2,
                    fields.len()
                )));
            }
            let num = |k: usize| -> Result<f64, DynamicsError> {
                fields[k]
                    .parse()
                    .map_err(|_| DynamicsError::BadLog(format!("line {}: bad number", i + 2)))
            };
            let module = fields[1]
                .parse::<usize>()
                .map_err(|_| DynamicsError::BadLog(format!("line {}: bad module", i + 2)))?
                - 1;
            max_module = max_module.max(module);
            log.samples.push(Sample {
                t: num(0)?,
                module,
                x: num(2)?,
                x_dot: num(3)?,
                phi: num(4)?,
                phi_dot: num(5)?,
                theta: num(6)?,
                theta_dot: num(7)?,
                u: num(8)?,
                regime: ContactRegime::from_str(fields[9]).ok_or_else(|| {
                    DynamicsError::BadLog(format!("line {}: bad regime", i + 2))
                })?,
                gap: num(10)?,
                coupled: fields[11] == "1",
            });
        }
        log.n_modules = max_module + 1;
        Ok(log)
    }
}
