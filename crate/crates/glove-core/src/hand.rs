//! Map per-segment orientations from the sensor topology to hand joint
//! angles.
//!
//! Anatomical frame convention (calibration pose: flat hand, fingers
//! extended): +x across the palm, +y along the fingers, +z out of the back
//! of the hand. Flexion axes are fixed per finger in the hand-back frame:
//! +x for the four fingers, the thumb axis rotated -45 degrees about z.
//! Only flexion is reported; no distal phalanx.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::quat::{Quaternion, Vec3};
use crate::topology::{Finger, Phalanx, SegmentLabel, SensorTopology};
use crate::wire::SensorPacket;

/// Anatomical flexion range, degrees. Values outside are clamped and
/// flagged, never rejected: drift will eventually exceed any range and
/// downstream consumers need a signal, not a crash.
pub const FLEXION_MIN_DEG: f64 = -30.0;
pub const FLEXION_MAX_DEG: f64 = 135.0;

#[derive(Debug, Error, PartialEq)]
pub enum HandError {
    /// The hand-back sensor anchors every joint angle; without it no pose
    /// can be computed.
    #[error("no sample for the hand-back reference sensor")]
    MissingReference,
}

/// Flexion axis for `finger`, expressed in the hand-back frame at the
/// calibration pose.
pub fn flexion_axis(finger: Finger) -> Vec3 {
    match finger {
        // Thumb axis rotated -45 degrees about z from the common +x axis.
        Finger::Thumb => {
            let c = std::f64::consts::FRAC_1_SQRT_2;
            Vec3::new(c, -c, 0.0)
        }
        _ => Vec3::new(1.0, 0.0, 0.0),
    }
}

/// Orientation of `child` expressed in the `parent` frame: `parent^-1 ⊗ child`.
pub fn relative_orientation(parent: Quaternion, child: Quaternion) -> Quaternion {
    parent.conjugate().multiply(child)
}

/// Signed flexion in degrees of a relative segment rotation about `axis`.
///
/// Twist about the segment's long axis (`z × axis`) is discarded first via
/// swing-twist decomposition; the remaining swing is then projected onto
/// `axis` as a signed twist angle in `(-180, 180]`.
pub fn flexion_angle(rel: Quaternion, axis: Vec3) -> f64 {
    let swing = match Vec3::new(0.0, 0.0, 1.0).cross(axis).normalized() {
        Some(long) => {
            let twist = twist_about(rel, long);
            rel.multiply(twist.conjugate())
        }
        None => rel,
    };
    let p = Vec3::new(swing.x, swing.y, swing.z).dot(axis);
    let mut deg = 2.0 * p.atan2(swing.w).to_degrees();
    if deg > 180.0 {
        deg -= 360.0;
    } else if deg <= -180.0 {
        deg += 360.0;
    }
    deg
}

/// Twist component of `q` about unit `axis`: the unique rotation about
/// `axis` such that `q = swing ⊗ twist` with the swing axis perpendicular
/// to `axis`.
fn twist_about(q: Quaternion, axis: Vec3) -> Quaternion {
    let p = Vec3::new(q.x, q.y, q.z).dot(axis);
    let t = Quaternion::new(q.w, axis.x * p, axis.y * p, axis.z * p);
    // Degenerate when q is a 180-degree rotation perpendicular to axis: no
    // twist at all.
    t.normalize().unwrap_or(Quaternion::IDENTITY)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FingerAngles {
    pub mcp_deg: f64,
    pub pip_deg: f64,
    /// True when the raw angle fell outside the anatomical range and was
    /// clamped.
    pub mcp_clamped: bool,
    pub pip_clamped: bool,
}

/// Joint angles plus the segment orientations they were derived from. One
/// record per acquisition cycle; serializes to a JSON Lines row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HandPose {
    /// Device timestamp of the packet this pose came from, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_ms: Option<u32>,
    pub segments: BTreeMap<SegmentLabel, Quaternion>,
    pub fingers: BTreeMap<Finger, FingerAngles>,
    /// Segments declared in the topology but absent from the input; their
    /// fingers are omitted from `fingers`.
    pub missing: Vec<SegmentLabel>,
}

fn clamp_flexion(deg: f64) -> (f64, bool) {
    if deg < FLEXION_MIN_DEG {
        (FLEXION_MIN_DEG, true)
    } else if deg > FLEXION_MAX_DEG {
        (FLEXION_MAX_DEG, true)
    } else {
        (deg, false)
    }
}

/// Compute joint angles from per-sensor orientations.
///
/// MCP flexion is the proximal phalanx relative to the hand back; PIP
/// flexion is the intermediate phalanx relative to the proximal. Fingers
/// with either sensor missing are omitted and reported in `missing`.
pub fn compute_pose(
    orientations: &BTreeMap<u8, Quaternion>,
    topo: &SensorTopology,
) -> Result<HandPose, HandError> {
    let hb_id = topo.hand_back_id().ok_or(HandError::MissingReference)?;
    let hand_back = *orientations.get(&hb_id).ok_or(HandError::MissingReference)?;

    let mut segments = BTreeMap::new();
    segments.insert(SegmentLabel::HandBack, hand_back);
    let mut fingers = BTreeMap::new();
    let mut missing = Vec::new();

    for finger in Finger::ALL {
        let mut segment_quat = |phalanx: Phalanx| -> Option<Quaternion> {
            let label = SegmentLabel::phalanx(finger, phalanx);
            let entry = topo.sensor_for_segment(label)?;
            match orientations.get(&entry.id) {
                Some(q) => {
                    segments.insert(label, *q);
                    Some(*q)
                }
                None => {
                    missing.push(label);
                    None
                }
            }
        };
        let proximal = segment_quat(Phalanx::Proximal);
        let intermediate = segment_quat(Phalanx::Intermediate);
        let (Some(proximal), Some(intermediate)) = (proximal, intermediate) else {
            continue;
        };

        let axis = flexion_axis(finger);
        let (mcp_deg, mcp_clamped) =
            clamp_flexion(flexion_angle(relative_orientation(hand_back, proximal), axis));
        let (pip_deg, pip_clamped) =
            clamp_flexion(flexion_angle(relative_orientation(proximal, intermediate), axis));
        fingers.insert(finger, FingerAngles { mcp_deg, pip_deg, mcp_clamped, pip_clamped });
    }

    Ok(HandPose { t_ms: None, segments, fingers, missing })
}

impl HandPose {
    /// Pose from one decoded telemetry packet.
    pub fn from_packet(packet: &SensorPacket, topo: &SensorTopology) -> Result<HandPose, HandError> {
        let orientations: BTreeMap<u8, Quaternion> = packet
            .samples
            .iter()
            .filter_map(|s| {
                let q = s.orientation_quat().normalize().ok()?;
                Some((s.sensor_id, q))
            })
            .collect();
        let mut pose = compute_pose(&orientations, topo)?;
        pose.t_ms = packet.samples.first().map(|s| s.timestamp_ms);
        Ok(pose)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("pose serialization cannot fail")
    }
}
