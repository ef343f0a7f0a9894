//! Shared oracles for the integration tests. Everything here is an
//! independent route to the answers the library computes: rotations go
//! through 3x3 matrices, integration through brute-force fine stepping.
//! None of it calls the implementation paths it is used to check.

#![allow(dead_code)]

use glove_core::quat::{Quaternion, Vec3};
use rand::Rng;

pub type Mat3 = [[f64; 3]; 3];

/// Rotation matrix of a unit quaternion (body-to-world).
pub fn quat_to_mat(q: Quaternion) -> Mat3 {
    let (w, x, y, z) = (q.w, q.x, q.y, q.z);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn mat_transpose(m: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = m[j][i];
        }
    }
    out
}

pub fn mat_apply(m: &Mat3, v: Vec3) -> Vec3 {
    Vec3::new(
        m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
        m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
        m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
    )
}

/// Shepperd's method, branch per dominant diagonal term.
pub fn mat_to_quat(m: &Mat3) -> Quaternion {
    let trace = m[0][0] + m[1][1] + m[2][2];
    if trace > 0.0 {
        let s = 0.5 / (trace + 1.0).sqrt();
        Quaternion::new(
            0.25 / s,
            (m[2][1] - m[1][2]) * s,
            (m[0][2] - m[2][0]) * s,
            (m[1][0] - m[0][1]) * s,
        )
    } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
        let s = 2.0 * (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt();
        Quaternion::new(
            (m[2][1] - m[1][2]) / s,
            0.25 * s,
            (m[0][1] + m[1][0]) / s,
            (m[0][2] + m[2][0]) / s,
        )
    } else if m[1][1] > m[2][2] {
        let s = 2.0 * (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt();
        Quaternion::new(
            (m[0][2] - m[2][0]) / s,
            (m[0][1] + m[1][0]) / s,
            0.25 * s,
            (m[1][2] + m[2][1]) / s,
        )
    } else {
        let s = 2.0 * (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt();
        Quaternion::new(
            (m[1][0] - m[0][1]) / s,
            (m[0][2] + m[2][0]) / s,
            (m[1][2] + m[2][1]) / s,
            0.25 * s,
        )
    }
}

/// First-order Euler integration of `q_dot = 0.5 q (0, omega)` with
/// renormalization after every substep. Constant-axis input keeps the axis
/// exact, so the error is third order in the substep angle.
pub fn euler_integration_oracle(
    q: Quaternion,
    omega_deg_s: Vec3,
    dt: f64,
    substeps: u32,
) -> Quaternion {
    let w = omega_deg_s * (std::f64::consts::PI / 180.0);
    let h = dt / substeps as f64;
    let mut q = q;
    for _ in 0..substeps {
        let dq = q.multiply(Quaternion::new(0.0, w.x, w.y, w.z));
        q = Quaternion::new(
            q.w + 0.5 * h * dq.w,
            q.x + 0.5 * h * dq.x,
            q.y + 0.5 * h * dq.y,
            q.z + 0.5 * h * dq.z,
        )
        .normalize()
        .expect("oracle state stays near unit");
    }
    q
}

/// Angle between two unit quaternions computed through the chord length,
/// which stays accurate down to nanodegrees where `acos` of the dot
/// product cannot resolve anything below a few microdegrees.
pub fn precise_angle_deg(a: Quaternion, b: Quaternion) -> f64 {
    let diff = |a: Quaternion, b: Quaternion| {
        ((a.w - b.w).powi(2) + (a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (a.z - b.z).powi(2))
            .sqrt()
    };
    let chord = diff(a, b).min(diff(a, -b));
    4.0 * (chord / 2.0).clamp(0.0, 1.0).asin().to_degrees()
}

/// Componentwise closeness up to the quaternion double cover.
pub fn assert_quat_close(a: Quaternion, b: Quaternion, tol: f64, context: &str) {
    let d1 = (a.w - b.w)
        .abs()
        .max((a.x - b.x).abs())
        .max((a.y - b.y).abs())
        .max((a.z - b.z).abs());
    let d2 = (a.w + b.w)
        .abs()
        .max((a.x + b.x).abs())
        .max((a.y + b.y).abs())
        .max((a.z + b.z).abs());
    let d = d1.min(d2);
    assert!(d <= tol, "{context}: componentwise distance {d} > {tol}\n  a = {a:?}\n  b = {b:?}");
}

pub fn random_unit_quat(rng: &mut impl Rng) -> Quaternion {
    loop {
        let q = Quaternion::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        if q.norm() > 0.1 {
            return q.normalize().unwrap();
        }
    }
}

pub fn random_vec3(rng: &mut impl Rng, scale: f64) -> Vec3 {
    Vec3::new(
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
    )
}

pub fn random_unit_vec3(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = random_vec3(rng, 1.0);
        if let Some(u) = v.normalized() {
            if v.norm() <= 1.0 {
                return u;
            }
        }
    }
}
