//! Complementary attitude filter filling the role of the MPU-9250's onboard
//! motion processor: gyro propagation plus accelerometer tilt correction.
//!
//! Six-axis only. Tilt (roll/pitch) is observable from gravity and gets
//! corrected; yaw has no reference and drifts with integrated gyro bias.

use thiserror::Error;

use crate::quat::{Quaternion, Vec3};

/// Default correction gain in 1/s.
pub const DEFAULT_ALPHA: f64 = 0.05;
/// Accel-norm gate half-width around 1 g. Outside it the reading is treated
/// as dynamic motion and the tilt correction is skipped entirely.
pub const ACCEL_GATE_G: f64 = 0.1;

const WORLD_UP: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 1.0 };

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    /// Initialization requires a near-static accel reading.
    #[error("accel norm {norm_g} g outside [0.5, 1.5] g; sensor is not static")]
    NotStatic { norm_g: f64 },
}

/// State of one sensor's attitude filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState {
    /// Body-to-world orientation estimate.
    pub q: Quaternion,
    /// Tilt correction gain per second, in `[0, 1]`.
    pub alpha: f64,
    pub initialized: bool,
}

impl FilterState {
    /// Start the filter at a known orientation (e.g. a factory-converged
    /// state in simulation).
    pub fn with_orientation(q: Quaternion, alpha: f64) -> FilterState {
        FilterState { q, alpha, initialized: true }
    }

    /// Initialize from a static accelerometer reading: the tilt that maps
    /// the body accel direction onto world +Z, with zero yaw.
    pub fn init_from_accel(accel: Vec3, alpha: f64) -> Result<FilterState, FusionError> {
        let norm = accel.norm();
        if !(0.5..=1.5).contains(&norm) {
            return Err(FusionError::NotStatic { norm_g: norm });
        }
        let dir = accel * (1.0 / norm);
        Ok(FilterState { q: tilt_aligning(dir), alpha, initialized: true })
    }

    /// One filter step: integrate the gyro over `dt`, then, when the accel
    /// norm is within the static gate, rotate the estimate toward the
    /// accel-implied tilt by `min(1, alpha*dt)` about the tilt-error axis.
    /// Yaw is never touched by the correction.
    #[must_use]
    pub fn update(self, gyro_deg_s: Vec3, accel_g: Vec3, dt: f64) -> FilterState {
        let mut q = self.q.integrate_gyro(gyro_deg_s, dt);

        let norm = accel_g.norm();
        if (norm - 1.0).abs() <= ACCEL_GATE_G {
            let up_meas = q.rotate(accel_g * (1.0 / norm));
            let cross = up_meas.cross(WORLD_UP);
            let err_deg = cross.norm().atan2(up_meas.dot(WORLD_UP)).to_degrees();
            if err_deg > 1e-12 {
                let axis = match cross.normalized() {
                    Some(a) => a,
                    // Antipodal: any horizontal axis works, fix +x.
                    None => Vec3::new(1.0, 0.0, 0.0),
                };
                let fraction = (self.alpha * dt).min(1.0);
                let correction = Quaternion::from_axis_angle(axis, fraction * err_deg)
                    .expect("axis is unit");
                q = correction.multiply(q);
            }
        }
        FilterState { q: q.renormalized(), ..self }
    }
}

/// Tilt-only quaternion rotating the unit body direction `dir` onto world
/// +Z. The rotation axis is horizontal, so the result has zero yaw.
fn tilt_aligning(dir: Vec3) -> Quaternion {
    let cross = dir.cross(WORLD_UP);
    let angle_deg = cross.norm().atan2(dir.dot(WORLD_UP)).to_degrees();
    match cross.normalized() {
        Some(axis) => Quaternion::from_axis_angle(axis, angle_deg).expect("axis is unit"),
        None if dir.dot(WORLD_UP) > 0.0 => Quaternion::IDENTITY,
        // Upside down: tie-break with a 180 degree flip about +x.
        None => Quaternion::from_axis_angle(Vec3::new(1.0, 0.0, 0.0), 180.0).expect("axis is unit"),
    }
}

/// Angle in degrees between world +Z and the world-frame image of the
/// measured accel direction under `q`.
pub fn tilt_error(q: Quaternion, accel: Vec3) -> f64 {
    let dir = accel.normalized().expect("accel must be nonzero");
    let up_meas = q.rotate(dir);
    up_meas.cross(WORLD_UP).norm().atan2(up_meas.dot(WORLD_UP)).to_degrees()
}
