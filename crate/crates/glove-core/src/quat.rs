//! Quaternion algebra and angular-error metrics.
//!
//! Hamilton convention, scalar-first storage `(w, x, y, z)`, body-to-world
//! orientation quaternions. All public angle parameters and results are in
//! degrees; radians appear only inside function bodies.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum QuatError {
    /// Input quaternion has (near-)zero norm and denotes no rotation.
    #[error("degenerate quaternion: norm {norm} is too small to normalize")]
    DegenerateQuaternion { norm: f64 },
    /// Rotation axis has (near-)zero norm but the angle is nonzero.
    #[error("degenerate axis: norm {norm} with nonzero angle {angle_deg} deg")]
    DegenerateAxis { norm: f64, angle_deg: f64 },
}

const ZERO_NORM_EPS: f64 = 1e-12;

// ─── Vec3 ────────────────────────────────────────────────────────────────────

/// 3-component vector. Units are fixed by context: g for accelerometer
/// readings, deg/s for gyroscope rates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, rhs: Vec3) -> f64 {
        self.x * rhs.x + self.y * rhs.y + self.z * rhs.z
    }

    pub fn cross(self, rhs: Vec3) -> Vec3 {
        Vec3 {
            x: self.y * rhs.z - self.z * rhs.y,
            y: self.z * rhs.x - self.x * rhs.z,
            z: self.x * rhs.y - self.y * rhs.x,
        }
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Unit vector in the same direction, or `None` for a (near-)zero input.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        if n < ZERO_NORM_EPS {
            None
        } else {
            Some(self * (1.0 / n))
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl std::ops::Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl std::ops::Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

// ─── Quaternion ──────────────────────────────────────────────────────────────

/// Unit rotation quaternion, the orientation representation used throughout
/// the crate (estimated and ground-truth).
///
/// `q` and `-q` denote the same rotation; comparisons go through
/// [`Quaternion::angular_distance`], never componentwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub fn norm(self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dot(self, rhs: Quaternion) -> f64 {
        self.w * rhs.w + self.x * rhs.x + self.y * rhs.y + self.z * rhs.z
    }

    /// Conjugate; equals the inverse for unit quaternions.
    pub fn conjugate(self) -> Quaternion {
        Quaternion::new(self.w, -self.x, -self.y, -self.z)
    }

    /// Scale to unit norm. Errors on (near-)zero input.
    pub fn normalize(self) -> Result<Quaternion, QuatError> {
        let n = self.norm();
        if n < ZERO_NORM_EPS {
            return Err(QuatError::DegenerateQuaternion { norm: n });
        }
        let inv = 1.0 / n;
        Ok(Quaternion::new(self.w * inv, self.x * inv, self.y * inv, self.z * inv))
    }

    /// Renormalize a quaternion whose norm is structurally near 1 (filter
    /// states, integration outputs). Panics only if that invariant is broken.
    pub(crate) fn renormalized(self) -> Quaternion {
        self.normalize().expect("unit-norm invariant violated")
    }

    /// Hamilton product `self ⊗ rhs`: as a rotation, apply `rhs` first,
    /// then `self`.
    pub fn multiply(self, rhs: Quaternion) -> Quaternion {
        Quaternion {
            w: self.w * rhs.w - self.x * rhs.x - self.y * rhs.y - self.z * rhs.z,
            x: self.w * rhs.x + self.x * rhs.w + self.y * rhs.z - self.z * rhs.y,
            y: self.w * rhs.y - self.x * rhs.z + self.y * rhs.w + self.z * rhs.x,
            z: self.w * rhs.z + self.x * rhs.y - self.y * rhs.x + self.z * rhs.w,
        }
    }

    /// Rotation of `angle_deg` degrees about `axis` (right-hand rule).
    ///
    /// A zero axis is an error unless the angle is also zero, which is the
    /// identity rotation.
    pub fn from_axis_angle(axis: Vec3, angle_deg: f64) -> Result<Quaternion, QuatError> {
        let n = axis.norm();
        if n < ZERO_NORM_EPS {
            if angle_deg == 0.0 {
                return Ok(Quaternion::IDENTITY);
            }
            return Err(QuatError::DegenerateAxis { norm: n, angle_deg });
        }
        let half = angle_deg.to_radians() / 2.0;
        let (s, c) = half.sin_cos();
        let k = s / n;
        Ok(Quaternion::new(c, axis.x * k, axis.y * k, axis.z * k))
    }

    /// Angle in degrees between two unit-quaternion orientations, in
    /// `[0, 180]`. Respects the double cover: `angular_distance(q, -q) = 0`.
    ///
    /// Mathematically `2*acos(min(1, |a.b|))`, evaluated through `atan2` of
    /// the relative rotation so nanodegree differences stay resolvable
    /// where `acos` of a near-1 dot product loses everything below a few
    /// microdegrees.
    pub fn angular_distance(self, rhs: Quaternion) -> f64 {
        let rel = self.conjugate().multiply(rhs);
        let vec_norm = (rel.x * rel.x + rel.y * rel.y + rel.z * rel.z).sqrt();
        (2.0 * vec_norm.atan2(rel.w.abs())).to_degrees()
    }

    /// Propagate an orientation through one step of body-frame angular
    /// velocity: `q ⊗ exp(½ ω dt)`, the exact rotation for constant `omega`
    /// (deg/s) over `dt` seconds. Result is unit.
    pub fn integrate_gyro(self, omega_deg_s: Vec3, dt: f64) -> Quaternion {
        let theta = omega_deg_s.norm().to_radians() * dt;
        if theta < 1e-15 {
            return self;
        }
        let axis = omega_deg_s * (1.0 / omega_deg_s.norm());
        let half = theta / 2.0;
        let (s, c) = half.sin_cos();
        let step = Quaternion::new(c, axis.x * s, axis.y * s, axis.z * s);
        self.multiply(step).renormalized()
    }

    /// Rotate a body-frame vector into the world frame: `q v q*`.
    pub fn rotate(self, v: Vec3) -> Vec3 {
        // Expanded q v q* for unit q, avoiding two full quaternion products.
        let u = Vec3::new(self.x, self.y, self.z);
        let uv = u.cross(v);
        let uuv = u.cross(uv);
        v + (uv * self.w + uuv) * 2.0
    }

    /// Rotate a world-frame vector into the body frame.
    pub fn rotate_inverse(self, v: Vec3) -> Vec3 {
        self.conjugate().rotate(v)
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 4]) -> Quaternion {
        Quaternion::new(a[0], a[1], a[2], a[3])
    }
}

impl Default for Quaternion {
    fn default() -> Self {
        Quaternion::IDENTITY
    }
}

impl std::ops::Mul for Quaternion {
    type Output = Quaternion;
    fn mul(self, rhs: Quaternion) -> Quaternion {
        self.multiply(rhs)
    }
}

impl std::ops::Neg for Quaternion {
    type Output = Quaternion;
    fn neg(self) -> Quaternion {
        Quaternion::new(-self.w, -self.x, -self.y, -self.z)
    }
}

// On the wire and in JSON a quaternion is the array [w, x, y, z].
impl Serialize for Quaternion {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        self.to_array().serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Quaternion {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        Ok(Quaternion::from_array(<[f64; 4]>::deserialize(de)?))
    }
}
