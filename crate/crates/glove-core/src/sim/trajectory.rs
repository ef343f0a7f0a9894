//! Ground-truth trajectory sources: per segment, per time instant they
//! provide the true orientation, body angular rate, and world-frame linear
//! acceleration consumed by the sensor models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::hand::flexion_axis;
use crate::imu::TruthSample;
use crate::quat::{Quaternion, Vec3};
use crate::topology::{Phalanx, SegmentLabel};

/// Default peak excursion of the random-motion wander, degrees. Wide,
/// slow arm-like swings keep the body-frame gyro bias pointing away from
/// world vertical much of the time, so its yaw projection integrates more
/// slowly than in the static case; this value sets the dynamic/static
/// drift ratio of the default protocol.
pub const DEFAULT_WANDER_DEG: f64 = 143.0;

/// Sinusoids per axis in the random-motion generator.
const WANDER_TERMS: usize = 3;
/// Wander frequency band, Hz. Slow, wide arm-like swings: the band keeps
/// large excursions reachable inside the rate bound.
const WANDER_FREQ_HZ: (f64, f64) = (0.02, 0.12);
/// Fraction of the configured rate bound the generator actually uses,
/// leaving headroom so measured rates stay below the bound even with
/// sensor noise added.
const RATE_HEADROOM: f64 = 0.98;

/// Trajectory selection, as written in the run-config JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectoryConfig {
    /// Glove at rest: every segment holds the level calibration pose.
    #[default]
    StaticPose,
    /// All fingers flex sinusoidally from flat to `amplitude_deg` and back
    /// every `period_s`; the hand back stays level.
    ScriptedFlexion { amplitude_deg: f64, period_s: f64 },
    /// Band-limited random wander of every segment, rate-bounded.
    RandomMotion {
        max_rate_deg_s: f64,
        #[serde(default = "default_wander")]
        wander_deg: f64,
    },
}

fn default_wander() -> f64 {
    DEFAULT_WANDER_DEG
}

impl TrajectoryConfig {
    pub fn descriptor(&self) -> String {
        match self {
            TrajectoryConfig::StaticPose => "static_pose".into(),
            TrajectoryConfig::ScriptedFlexion { amplitude_deg, period_s } => {
                format!("scripted_flexion(amplitude={amplitude_deg} deg, period={period_s} s)")
            }
            TrajectoryConfig::RandomMotion { max_rate_deg_s, wander_deg } => {
                format!("random_motion(max_rate={max_rate_deg_s} deg/s, wander={wander_deg} deg)")
            }
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self, TrajectoryConfig::StaticPose)
    }

    /// Build the truth source for one segment. `seed`/`stream` make
    /// random-motion draws reproducible and independent across segments.
    pub fn sampler(&self, segment: SegmentLabel, seed: u64, stream: u64) -> SegmentTrajectory {
        match *self {
            TrajectoryConfig::StaticPose => SegmentTrajectory { inner: Inner::Static },
            TrajectoryConfig::ScriptedFlexion { amplitude_deg, period_s } => {
                let (axis, factor) = match segment {
                    SegmentLabel::HandBack => (Vec3::new(1.0, 0.0, 0.0), 0.0),
                    SegmentLabel::Phalanx { finger, phalanx } => {
                        // The intermediate phalanx carries the proximal
                        // flexion plus its own, so it swings twice as far in
                        // the world frame.
                        let factor = match phalanx {
                            Phalanx::Proximal => 1.0,
                            Phalanx::Intermediate => 2.0,
                        };
                        (flexion_axis(finger), factor)
                    }
                };
                SegmentTrajectory { inner: Inner::Flexion { axis, factor, amplitude_deg, period_s } }
            }
            TrajectoryConfig::RandomMotion { max_rate_deg_s, wander_deg } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(stream);
                SegmentTrajectory::wander(&mut rng, max_rate_deg_s, wander_deg)
            }
        }
    }
}

/// One sinusoidal term of the rotation-vector wander.
#[derive(Debug, Clone, Copy)]
struct SinTerm {
    amplitude_deg: f64,
    freq_hz: f64,
    phase: f64,
}

/// Truth source for a single segment.
#[derive(Debug, Clone)]
pub struct SegmentTrajectory {
    inner: Inner,
}

#[derive(Debug, Clone)]
enum Inner {
    Static,
    Flexion { axis: Vec3, factor: f64, amplitude_deg: f64, period_s: f64 },
    /// Orientation is the exponential of a rotation vector whose components
    /// are sums of sinusoids, so the excursion stays bounded while the
    /// angular rate stays continuous.
    Wander { terms: [[SinTerm; WANDER_TERMS]; 3] },
}

impl SegmentTrajectory {
    fn wander(rng: &mut ChaCha8Rng, max_rate_deg_s: f64, wander_deg: f64) -> SegmentTrajectory {
        let mut terms = [[SinTerm { amplitude_deg: 0.0, freq_hz: 0.0, phase: 0.0 }; WANDER_TERMS]; 3];
        for axis_terms in &mut terms {
            for t in axis_terms.iter_mut() {
                *t = SinTerm {
                    amplitude_deg: rng.gen_range(0.5..=1.0),
                    freq_hz: rng.gen_range(WANDER_FREQ_HZ.0..=WANDER_FREQ_HZ.1),
                    phase: rng.gen_range(0.0..std::f64::consts::TAU),
                };
            }
        }
        // Worst-case excursion and rate if every sinusoid peaked at once.
        let mut excursion_sq = 0.0;
        let mut rate_sq = 0.0;
        for axis_terms in &terms {
            let a_sum: f64 = axis_terms.iter().map(|t| t.amplitude_deg).sum();
            let r_sum: f64 =
                axis_terms.iter().map(|t| t.amplitude_deg * std::f64::consts::TAU * t.freq_hz).sum();
            excursion_sq += a_sum * a_sum;
            rate_sq += r_sum * r_sum;
        }
        // |omega_body| <= |dr/dt| for exponential-map trajectories, so
        // bounding the rotation-vector rate bounds the body rate.
        let scale = (wander_deg / excursion_sq.sqrt())
            .min(RATE_HEADROOM * max_rate_deg_s / rate_sq.sqrt());
        for axis_terms in &mut terms {
            for t in axis_terms.iter_mut() {
                t.amplitude_deg *= scale;
            }
        }
        SegmentTrajectory { inner: Inner::Wander { terms } }
    }

    fn rotation_vector_deg(terms: &[[SinTerm; WANDER_TERMS]; 3], t_s: f64) -> Vec3 {
        let axis_value = |axis_terms: &[SinTerm; WANDER_TERMS]| {
            axis_terms
                .iter()
                .map(|c| c.amplitude_deg * (std::f64::consts::TAU * c.freq_hz * t_s + c.phase).sin())
                .sum()
        };
        Vec3::new(axis_value(&terms[0]), axis_value(&terms[1]), axis_value(&terms[2]))
    }

    pub fn orientation(&self, t_s: f64) -> Quaternion {
        match &self.inner {
            Inner::Static => Quaternion::IDENTITY,
            Inner::Flexion { axis, factor, amplitude_deg, period_s } => {
                let angle = factor * flexion_profile(*amplitude_deg, *period_s, t_s);
                Quaternion::from_axis_angle(*axis, angle).expect("fixed unit axis")
            }
            Inner::Wander { terms } => {
                let r = Self::rotation_vector_deg(terms, t_s);
                let angle = r.norm();
                if angle < 1e-12 {
                    Quaternion::IDENTITY
                } else {
                    Quaternion::from_axis_angle(r * (1.0 / angle), angle).expect("unit axis")
                }
            }
        }
    }

    /// Body-frame angular rate in deg/s.
    pub fn omega_body(&self, t_s: f64) -> Vec3 {
        match &self.inner {
            Inner::Static => Vec3::ZERO,
            Inner::Flexion { axis, factor, amplitude_deg, period_s } => {
                // Rotation about a fixed axis: the body and world rates are
                // the same vector.
                let rate = factor * flexion_rate(*amplitude_deg, *period_s, t_s);
                *axis * rate
            }
            Inner::Wander { .. } => {
                // Central difference of the exact orientation; h is far
                // below the wander band so the truncation error is
                // negligible against the rate bound headroom.
                const H: f64 = 1e-5;
                let q0 = self.orientation(t_s - H);
                let q1 = self.orientation(t_s + H);
                let dq = q0.conjugate().multiply(q1);
                let vec_norm = (dq.x * dq.x + dq.y * dq.y + dq.z * dq.z).sqrt();
                if vec_norm < 1e-300 {
                    return Vec3::ZERO;
                }
                let angle_rad = 2.0 * vec_norm.atan2(dq.w.abs());
                let sign = if dq.w < 0.0 { -1.0 } else { 1.0 };
                let rate = angle_rad.to_degrees() / (2.0 * H);
                Vec3::new(dq.x, dq.y, dq.z) * (sign * rate / vec_norm)
            }
        }
    }

    /// World-frame linear acceleration in g. Segment translation is not
    /// modeled; specific force is gravity only.
    pub fn linear_accel_world(&self, _t_s: f64) -> Vec3 {
        Vec3::ZERO
    }

    pub fn truth_at(&self, t_s: f64) -> TruthSample {
        TruthSample {
            orientation: self.orientation(t_s),
            omega_body: self.omega_body(t_s),
            linear_accel_world: self.linear_accel_world(t_s),
        }
    }

    /// Truth with the angular rate evaluated at a separate instant; the
    /// simulator passes the midpoint of the sampling interval so a discrete
    /// integrator sees the mean rate over the step.
    pub fn truth_at_with_omega(&self, t_s: f64, omega_t_s: f64) -> TruthSample {
        TruthSample {
            orientation: self.orientation(t_s),
            omega_body: self.omega_body(omega_t_s),
            linear_accel_world: self.linear_accel_world(t_s),
        }
    }
}

/// Flexion angle profile: smooth 0 → amplitude → 0 over each period.
fn flexion_profile(amplitude_deg: f64, period_s: f64, t_s: f64) -> f64 {
    amplitude_deg / 2.0 * (1.0 - (std::f64::consts::TAU * t_s / period_s).cos())
}

fn flexion_rate(amplitude_deg: f64, period_s: f64, t_s: f64) -> f64 {
    amplitude_deg / 2.0 * std::f64::consts::TAU / period_s
        * (std::f64::consts::TAU * t_s / period_s).sin()
}
