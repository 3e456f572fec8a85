//! Exterior B-field of a homogeneously magnetized cuboid via the magnetic
//! surface-charge (face-charge) method, specialised to polarization along z.
//!
//! References:
//! - Yang, Supercond. Sci. Technol. 3(12):591, 1990
//! - Engel-Herbert, J. Appl. Phys. 97(7):074504, 2005

use nalgebra::Vector3;

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// B-field in tesla at `point` (relative to the cuboid center) of a cuboid
/// with the given half-extents and polarization `j_z` tesla along +z.
///
/// Positions are mapped into one octant first to avoid indeterminate forms
/// on edge extensions, with sign corrections applied to the result.
pub fn cuboid_field_z(point: Vector3<f64>, half_extents: Vector3<f64>, j_z: f64) -> Vector3<f64> {
    let (a, b, c) = (half_extents.x, half_extents.y, half_extents.z);
    let mut x = point.x;
    let mut y = point.y;
    let mut z = point.z;

    // Octant mapping with sign corrections for the z-polarization row.
    let mut qx = 1.0;
    let mut qy = 1.0;
    if x < 0.0 {
        x = -x;
        qx = -qx;
    }
    if y > 0.0 {
        y = -y;
        qy = -qy;
    }
    if z > 0.0 {
        z = -z;
        qx = -qx;
        qy = -qy;
    }

    let xma = x - a;
    let xpa = x + a;
    let ymb = y - b;
    let ypb = y + b;
    let zmc = z - c;
    let zpc = z + c;

    let (xma2, xpa2) = (xma * xma, xpa * xpa);
    let (ymb2, ypb2) = (ymb * ymb, ypb * ypb);
    let (zmc2, zpc2) = (zmc * zmc, zpc * zpc);

    let mmm = (xma2 + ymb2 + zmc2).sqrt();
    let pmp = (xpa2 + ymb2 + zpc2).sqrt();
    let pmm = (xpa2 + ymb2 + zmc2).sqrt();
    let mmp = (xma2 + ymb2 + zpc2).sqrt();
    let mpm = (xma2 + ypb2 + zmc2).sqrt();
    let ppp = (xpa2 + ypb2 + zpc2).sqrt();
    let ppm = (xpa2 + ypb2 + zmc2).sqrt();
    let mpp = (xma2 + ypb2 + zpc2).sqrt();

    let ff2x = (((xma + mmm) * (xpa + ppm) * (xpa + pmp) * (xma + mpp))
        / ((xpa + pmm) * (xma + mpm) * (xma + mmp) * (xpa + ppp)))
        .ln();

    let ff2y = (((-ymb + mmm) * (-ypb + ppm) * (-ymb + pmp) * (-ypb + mpp))
        / ((-ymb + pmm) * (-ypb + mpm) * (ymb - mmp) * (ypb - ppp)))
        .ln();

    let ff1z = f64::atan2(xma * ymb, zmc * mmm) - f64::atan2(xpa * ymb, zmc * pmm)
        - f64::atan2(xma * ypb, zmc * mpm)
        + f64::atan2(xpa * ypb, zmc * ppm)
        - f64::atan2(xma * ymb, zpc * mmp)
        + f64::atan2(xpa * ymb, zpc * pmp)
        + f64::atan2(xma * ypb, zpc * mpp)
        - f64::atan2(xpa * ypb, zpc * ppp);

    Vector3::new(
        j_z * ff2y * qx / FOUR_PI,
        -j_z * ff2x * qy / FOUR_PI,
        j_z * ff1z / FOUR_PI,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const MU0: f64 = 4.0e-7 * std::f64::consts::PI;

    #[test]
    fn on_axis_far_field_matches_point_dipole() {
        let he = Vector3::new(0.005, 0.005, 0.0025);
        let j = 1.32;
        let volume = 8.0 * he.x * he.y * he.z;
        let m_dip = j * volume / MU0;
        let z = 0.08; // 8 cell-lengths
        let b = cuboid_field_z(Vector3::new(0.0, 0.0, z), he, j);
        let expected = MU0 * m_dip / (2.0 * std::f64::consts::PI * z * z * z);
        assert!((b.z - expected).abs() / expected < 0.02, "{} vs {expected}", b.z);
        assert!(b.x.abs() < 1e-12 * b.z.abs());
        assert!(b.y.abs() < 1e-12 * b.z.abs());
    }

    #[test]
    fn field_is_odd_in_polarization() {
        let he = Vector3::new(0.005, 0.005, 0.0025);
        let p = Vector3::new(0.013, -0.007, 0.011);
        let bp = cuboid_field_z(p, he, 1.32);
        let bm = cuboid_field_z(p, he, -1.32);
        assert_eq!(bp, -bm);
    }

    #[test]
    fn off_axis_far_field_matches_dipole_vector() {
        let he = Vector3::new(0.005, 0.005, 0.0025);
        let j = 1.0;
        let volume = 8.0 * he.x * he.y * he.z;
        let m = j * volume / MU0;
        let p = Vector3::new(0.05, 0.03, 0.07);
        let b = cuboid_field_z(p, he, j);
        // dipole: B = mu0/(4 pi r^3) (3 (m.r̂) r̂ - m)
        let r = p.norm();
        let rh = p / r;
        let mz = Vector3::new(0.0, 0.0, m);
        let expected = MU0 / (FOUR_PI * r * r * r) * (3.0 * mz.dot(&rh) * rh - mz);
        assert!((b - expected).norm() / expected.norm() < 0.02);
    }
}
