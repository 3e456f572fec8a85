//! Analytic magnet-array model: per-cell cuboid fields, flux-vs-distance
//! profiles for the named polarity arrangements, the gap-force formula and
//! array-to-array coupling force with a decoupling threshold.

mod cuboid;

pub use cuboid::cuboid_field_z;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;

/// Default cell geometry: 10x10x5 mm cuboids on a 3x3 grid, 12 mm pitch,
/// N42-grade remanence. The source does not publish the cell geometry.
pub const DEFAULT_HALF_EXTENTS_M: [f64; 3] = [0.005, 0.005, 0.0025];
pub const DEFAULT_PITCH_M: f64 = 0.012;
pub const DEFAULT_REMANENCE_T: f64 = 1.32;

#[derive(Debug, Error)]
pub enum MagneticsError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("field evaluation point lies inside a magnet cell")]
    PointInsideCell,
    #[error("unknown preset '{0}' (known: H, X, H-reversed)")]
    UnknownPreset(String),
    #[error("coupling force is below the hold force at every gap down to the minimum")]
    AlwaysDecoupled,
}

/// One signed cuboid magnet cell, magnetized along the array normal (+z),
/// sign given by `polarity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagnetCell {
    /// Cell center, m.
    pub center: [f64; 3],
    /// Half extents along x, y, z, m (strictly positive).
    pub half_extents: [f64; 3],
    /// +1 or -1.
    pub polarity: i8,
    /// Remanence magnitude, T (> 0).
    pub remanence: f64,
}

impl MagnetCell {
    pub fn validate(&self) -> Result<(), MagneticsError> {
        if self.half_extents.iter().any(|&h| !(h > 0.0)) {
            return Err(MagneticsError::InvalidParameter(
                "half extents must be strictly positive".into(),
            ));
        }
        if !(self.remanence > 0.0) {
            return Err(MagneticsError::InvalidParameter(
                "remanence must be strictly positive".into(),
            ));
        }
        if self.polarity != 1 && self.polarity != -1 {
            return Err(MagneticsError::InvalidParameter(
                "polarity must be +1 or -1".into(),
            ));
        }
        Ok(())
    }

    /// Signed polarization J_z in tesla.
    pub fn polarization(&self) -> f64 {
        f64::from(self.polarity) * self.remanence
    }

    pub fn volume(&self) -> f64 {
        8.0 * self.half_extents[0] * self.half_extents[1] * self.half_extents[2]
    }

    /// Equivalent point-dipole moment, A·m².
    pub fn dipole_moment(&self) -> f64 {
        self.polarization() * self.volume() / MU0
    }

    pub fn contains(&self, point: Vector3<f64>) -> bool {
        (0..3).all(|i| (point[i] - self.center[i]).abs() < self.half_extents[i])
    }

    fn field_at(&self, point: Vector3<f64>) -> Vector3<f64> {
        let rel = point - Vector3::from(self.center);
        cuboid_field_z(rel, Vector3::from(self.half_extents), self.polarization())
    }
}

/// Grid of signed cuboid magnet cells sharing the +z normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnetArray {
    pub name: String,
    pub cells: Vec<MagnetCell>,
}

impl MagnetArray {
    pub fn new(name: impl Into<String>, cells: Vec<MagnetCell>) -> Result<Self, MagneticsError> {
        let array = Self {
            name: name.into(),
            cells,
        };
        array.validate()?;
        Ok(array)
    }

    pub fn validate(&self) -> Result<(), MagneticsError> {
        if self.cells.is_empty() {
            return Err(MagneticsError::InvalidParameter(
                "array needs at least one cell".into(),
            ));
        }
        for cell in &self.cells {
            cell.validate()?;
        }
        // Non-overlap: every pair separated along at least one axis.
        for (i, a) in self.cells.iter().enumerate() {
            for b in &self.cells[i + 1..] {
                let separated = (0..3).any(|k| {
                    (a.center[k] - b.center[k]).abs() >= a.half_extents[k] + b.half_extents[k] - 1e-12
                });
                if !separated {
                    return Err(MagneticsError::InvalidParameter(format!(
                        "cells at {:?} and {:?} overlap",
                        a.center, b.center
                    )));
                }
            }
        }
        Ok(())
    }

    /// Geometric centroid of the cell centers.
    pub fn centroid(&self) -> Vector3<f64> {
        let sum: Vector3<f64> = self.cells.iter().map(|c| Vector3::from(c.center)).sum();
        sum / self.cells.len() as f64
    }

    /// Array with every cell polarity negated.
    pub fn negated(&self) -> Self {
        let mut out = self.clone();
        for cell in &mut out.cells {
            cell.polarity = -cell.polarity;
        }
        out
    }

    /// Total face area of the active cells, m².
    pub fn face_area(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| 4.0 * c.half_extents[0] * c.half_extents[1])
            .sum()
    }

    /// Largest cell dimension, m.
    pub fn max_cell_dimension(&self) -> f64 {
        self.cells
            .iter()
            .flat_map(|c| c.half_extents.iter().map(|h| 2.0 * h))
            .fold(0.0, f64::max)
    }
}

/// Superposed field of all cells at `point`, tesla.
pub fn field_at(array: &MagnetArray, point: Vector3<f64>) -> Result<Vector3<f64>, MagneticsError> {
    if array.cells.iter().any(|c| c.contains(point)) {
        return Err(MagneticsError::PointInsideCell);
    }
    Ok(array.cells.iter().map(|c| c.field_at(point)).sum())
}

/// Flux magnitude sampled along the array's central normal axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxProfile {
    /// Strictly increasing distances from the array center plane, m.
    pub distances: Vec<f64>,
    /// |B| at each distance, T.
    pub flux_magnitude: Vec<f64>,
}

impl FluxProfile {
    pub fn validate(&self) -> Result<(), MagneticsError> {
        if self.distances.len() != self.flux_magnitude.len() {
            return Err(MagneticsError::InvalidParameter("length mismatch".into()));
        }
        if !self.distances.windows(2).all(|w| w[0] < w[1]) {
            return Err(MagneticsError::InvalidParameter(
                "distances must be strictly increasing".into(),
            ));
        }
        if self.flux_magnitude.iter().any(|&f| f < 0.0) {
            return Err(MagneticsError::InvalidParameter(
                "flux magnitude must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// CSV with header `distance_m,flux_T`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("distance_m,flux_T\n");
        for (d, f) in self.distances.iter().zip(&self.flux_magnitude) {
            out.push_str(&format!("{d},{f}\n"));
        }
        out
    }

    pub fn max_flux_in(&self, lo: f64, hi: f64) -> f64 {
        self.distances
            .iter()
            .zip(&self.flux_magnitude)
            .filter(|(d, _)| **d >= lo && **d <= hi)
            .map(|(_, f)| *f)
            .fold(0.0, f64::max)
    }
}

/// Samples |field_at| at `n_samples` points on the central normal axis from
/// `axis_start` to `axis_end` (distances from the array center plane).
pub fn flux_profile(
    array: &MagnetArray,
    axis_start: f64,
    axis_end: f64,
    n_samples: usize,
) -> Result<FluxProfile, MagneticsError> {
    if !(axis_start > 0.0 && axis_end > axis_start) {
        return Err(MagneticsError::InvalidParameter(
            "need 0 < axis_start < axis_end".into(),
        ));
    }
    if n_samples < 2 {
        return Err(MagneticsError::InvalidParameter("need n_samples >= 2".into()));
    }
    let centroid = array.centroid();
    let mut distances = Vec::with_capacity(n_samples);
    let mut flux = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let d = axis_start + (axis_end - axis_start) * i as f64 / (n_samples - 1) as f64;
        let point = Vector3::new(centroid.x, centroid.y, centroid.z + d);
        flux.push(field_at(array, point)?.norm());
        distances.push(d);
    }
    let profile = FluxProfile {
        distances,
        flux_magnitude: flux,
    };
    profile.validate()?;
    Ok(profile)
}

/// Parameters of the gap-force formula F = mu0 H^2 A / 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapForceParams {
    /// Vacuum permeability, default 4π×10⁻⁷.
    pub mu0: f64,
    /// Magnetizing field, A/m.
    pub h_field: f64,
    /// Cross-sectional area, m².
    pub area: f64,
}

impl GapForceParams {
    /// The published parameter set: H = 501.34e3 A/m, A = 1.37e-4 m².
    pub fn reference() -> Self {
        Self {
            mu0: MU0,
            h_field: 501.34e3,
            area: 1.37e-4,
        }
    }
}

/// F = mu0 H^2 A / 2, newtons, exactly as written.
pub fn gap_force(p: &GapForceParams) -> Result<f64, MagneticsError> {
    if !(p.mu0 > 0.0 && p.area > 0.0) || !p.h_field.is_finite() {
        return Err(MagneticsError::InvalidParameter(
            "mu0 and area must be strictly positive, H finite".into(),
        ));
    }
    Ok(p.mu0 * p.h_field * p.h_field * p.area / 2.0)
}

/// Supported load mass for a holding force, kg.
pub fn load_capacity(force_n: f64, g: f64) -> Result<f64, MagneticsError> {
    if !(g > 0.0) {
        return Err(MagneticsError::InvalidParameter("g must be positive".into()));
    }
    Ok(force_n / g)
}

/// Reported force value for the reference parameters in the source: the
/// formula evaluates to ~21.64 N there, yet the text approximates it as
/// 7.24 N (supporting 0.731 kg). Both are surfaced, neither is "corrected".
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapForceDiscrepancy {
    pub computed_force_n: f64,
    pub reported_force_n: f64,
    pub ratio: f64,
    pub computed_load_kg_at_g981: f64,
    pub reported_load_kg: f64,
    /// g that would make the reported force/load pair consistent.
    pub implied_g: f64,
    pub note: String,
}

pub const REPORTED_GAP_FORCE_N: f64 = 7.24;
pub const REPORTED_LOAD_KG: f64 = 0.731;

/// Evaluates the gap-force formula for the reference parameters and builds
/// the machine-readable discrepancy record against the reported values.
pub fn gap_force_discrepancy() -> GapForceDiscrepancy {
    let computed = gap_force(&GapForceParams::reference()).expect("reference params valid");
    GapForceDiscrepancy {
        computed_force_n: computed,
        reported_force_n: REPORTED_GAP_FORCE_N,
        ratio: computed / REPORTED_GAP_FORCE_N,
        computed_load_kg_at_g981: REPORTED_GAP_FORCE_N / 9.81,
        reported_load_kg: REPORTED_LOAD_KG,
        implied_g: REPORTED_GAP_FORCE_N / REPORTED_LOAD_KG,
        note: "formula value differs from the reported approximation; possibly a per-magnet \
               area or pole-pair convention is implied. Both values are reported, none guessed."
            .into(),
    }
}

/// Named 3x3-grid polarity layouts.
pub fn preset_array(name: &str) -> Result<MagnetArray, MagneticsError> {
    let cell = |col: i32, row: i32, polarity: i8| MagnetCell {
        center: [
            col as f64 * DEFAULT_PITCH_M,
            row as f64 * DEFAULT_PITCH_M,
            0.0,
        ],
        half_extents: DEFAULT_HALF_EXTENTS_M,
        polarity,
        remanence: DEFAULT_REMANENCE_T,
    };
    let cells = match name {
        // Two full side columns plus the centre cell, uniform polarity.
        "H" => vec![
            cell(-1, -1, 1),
            cell(-1, 0, 1),
            cell(-1, 1, 1),
            cell(1, -1, 1),
            cell(1, 0, 1),
            cell(1, 1, 1),
            cell(0, 0, 1),
        ],
        // Diagonals plus centre.
        "X" => vec![
            cell(-1, -1, 1),
            cell(-1, 1, 1),
            cell(1, -1, 1),
            cell(1, 1, 1),
            cell(0, 0, 1),
        ],
        // "H" with the outer two centre-column magnets present and reversed.
        "H-reversed" => vec![
            cell(-1, -1, 1),
            cell(-1, 0, 1),
            cell(-1, 1, 1),
            cell(1, -1, 1),
            cell(1, 0, 1),
            cell(1, 1, 1),
            cell(0, 0, 1),
            cell(0, -1, -1),
            cell(0, 1, -1),
        ],
        other => return Err(MagneticsError::UnknownPreset(other.into())),
    };
    MagnetArray::new(name, cells)
}

pub const PRESET_NAMES: [&str; 3] = ["H", "X", "H-reversed"];

/// Force of one point dipole (moment m1 ẑ at r1) on another (m2 ẑ at r2).
fn dipole_force_z(r1: Vector3<f64>, m1: f64, r2: Vector3<f64>, m2: f64) -> Vector3<f64> {
    let d = r2 - r1;
    let r = d.norm();
    let n = d / r;
    let k = 3.0 * MU0 * m1 * m2 / (4.0 * std::f64::consts::PI * r.powi(4));
    let nz = n.z;
    k * (2.0 * nz * Vector3::z() + (1.0 - 5.0 * nz * nz) * n)
}

fn facing_world_cells(a: &MagnetArray, b: &MagnetArray, gap: f64) -> (Vec<(Vector3<f64>, f64)>, Vec<(Vector3<f64>, f64)>) {
    // Array a keeps its native frame shifted so its facing plane is z = 0;
    // array b is mirrored (rotated pi about x) so its facing plane is at
    // z = gap, which flips its dipole moments.
    let face_a = a
        .cells
        .iter()
        .map(|c| c.center[2] + c.half_extents[2])
        .fold(f64::NEG_INFINITY, f64::max);
    let face_b = b
        .cells
        .iter()
        .map(|c| c.center[2] + c.half_extents[2])
        .fold(f64::NEG_INFINITY, f64::max);
    let cells_a = a
        .cells
        .iter()
        .map(|c| {
            (
                Vector3::new(c.center[0], c.center[1], c.center[2] - face_a),
                c.dipole_moment(),
            )
        })
        .collect();
    let cells_b = b
        .cells
        .iter()
        .map(|c| {
            (
                Vector3::new(c.center[0], -c.center[1], gap + face_b - c.center[2]),
                -c.dipole_moment(),
            )
        })
        .collect();
    (cells_a, cells_b)
}

/// Net force on array `b`, facing array `a` across `gap` (face-to-face
/// surface distance), newtons. Each cell is reduced to a point dipole at
/// its center; attraction shows as a negative z component.
pub fn coupling_force(a: &MagnetArray, b: &MagnetArray, gap: f64) -> Result<Vector3<f64>, MagneticsError> {
    if !(gap > 0.0) {
        return Err(MagneticsError::InvalidParameter("gap must be positive".into()));
    }
    let (cells_a, cells_b) = facing_world_cells(a, b, gap);
    let mut force = Vector3::zeros();
    for &(ra, ma) in &cells_a {
        for &(rb, mb) in &cells_b {
            force += dipole_force_z(ra, ma, rb, mb);
        }
    }
    Ok(force)
}

/// Reaction force on array `a` in the same configuration, for third-law
/// checks; evaluated independently with the roles swapped per pair.
pub fn coupling_reaction(a: &MagnetArray, b: &MagnetArray, gap: f64) -> Result<Vector3<f64>, MagneticsError> {
    if !(gap > 0.0) {
        return Err(MagneticsError::InvalidParameter("gap must be positive".into()));
    }
    let (cells_a, cells_b) = facing_world_cells(a, b, gap);
    let mut force = Vector3::zeros();
    for &(ra, ma) in &cells_a {
        for &(rb, mb) in &cells_b {
            force += dipole_force_z(rb, mb, ra, ma);
        }
    }
    Ok(force)
}

/// Attractive normal coupling force magnitude at a gap; zero when the
/// configuration is repulsive.
pub fn attraction_at(a: &MagnetArray, b: &MagnetArray, gap: f64) -> Result<f64, MagneticsError> {
    Ok((-coupling_force(a, b, gap)?.z).max(0.0))
}

/// Search bounds for [`decoupling_gap`].
pub const DECOUPLING_MIN_GAP: f64 = 1e-4;
pub const DECOUPLING_MAX_GAP: f64 = 0.5;
pub const DECOUPLING_RESOLUTION: f64 = 1e-5;

/// Smallest gap at which the normal coupling force drops below `hold_force`,
/// found by bisection to 10 µm. Returns the search upper bound when the
/// force never drops below `hold_force`.
pub fn decoupling_gap(a: &MagnetArray, b: &MagnetArray, hold_force: f64) -> Result<f64, MagneticsError> {
    if !(hold_force > 0.0) {
        return Err(MagneticsError::InvalidParameter(
            "hold force must be positive".into(),
        ));
    }
    let holds = |gap: f64| -> Result<bool, MagneticsError> {
        Ok(coupling_force(a, b, gap)?.z.abs() >= hold_force)
    };
    if !holds(DECOUPLING_MIN_GAP)? {
        return Err(MagneticsError::AlwaysDecoupled);
    }
    if holds(DECOUPLING_MAX_GAP)? {
        return Ok(DECOUPLING_MAX_GAP);
    }
    let mut lo = DECOUPLING_MIN_GAP; // still holding
    let mut hi = DECOUPLING_MAX_GAP; // decoupled
    while hi - lo > DECOUPLING_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        if holds(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// On-disk layout description, millimetres in the file, metres internally.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayLayoutFile {
    pub name: String,
    pub cells: Vec<CellEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellEntry {
    pub center_mm: [f64; 3],
    pub half_extents_mm: [f64; 3],
    pub polarity: i8,
    #[serde(rename = "remanence_T")]
    pub remanence_t: f64,
}

impl ArrayLayoutFile {
    pub fn from_array(array: &MagnetArray) -> Self {
        Self {
            name: array.name.clone(),
            cells: array
                .cells
                .iter()
                .map(|c| CellEntry {
                    center_mm: c.center.map(|v| v * 1e3),
                    half_extents_mm: c.half_extents.map(|v| v * 1e3),
                    polarity: c.polarity,
                    remanence_t: c.remanence,
                })
                .collect(),
        }
    }

    pub fn to_array(&self) -> Result<MagnetArray, MagneticsError> {
        MagnetArray::new(
            self.name.clone(),
            self.cells
                .iter()
                .map(|e| MagnetCell {
                    center: e.center_mm.map(|v| v * 1e-3),
                    half_extents: e.half_extents_mm.map(|v| v * 1e-3),
                    polarity: e.polarity,
                    remanence: e.remanence_t,
                })
                .collect(),
        )
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("layout serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, MagneticsError> {
        toml::from_str(text).map_err(|e| MagneticsError::InvalidParameter(e.to_string()))
    }
}
