//! Bit-exact encoder/decoder for the UDP telemetry packets carrying sensor
//! samples from glove to host.
//!
//! Layout, frozen at version 1, little-endian throughout:
//!
//! ```text
//! header (12 bytes):
//!   magic   4B  "GLV1" (47 4C 56 31)
//!   version u8  = 1
//!   flags   u8  = 0
//!   count   u8  samples in this packet
//!   reserved u8 = 0
//!   sequence u32 wrapping packet counter
//! per-sample record (48 bytes):
//!   sensor_id u8, flags u8 = 0, reserved u16 = 0
//!   timestamp_ms u32        milliseconds since glove boot
//!   accel 3xf32 (g)
//!   gyro  3xf32 (deg/s)
//!   quaternion 4xf32        w, x, y, z
//! ```
//!
//! One packet per UDP datagram; one full multiplexer sweep per packet.

use thiserror::Error;

use crate::quat::{Quaternion, Vec3};

pub const MAGIC: [u8; 4] = *b"GLV1";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 12;
pub const SAMPLE_LEN: usize = 48;
/// Cap keeping the worst-case datagram (12 + 20*48 = 972 bytes) under a safe
/// 1,200-byte UDP payload.
pub const MAX_SAMPLES: usize = 20;
/// Default destination UDP port.
pub const DEFAULT_PORT: u16 = 9750;
/// A sequence decrease smaller than this window is a reordered packet, not a
/// wrap.
pub const REORDER_WINDOW: u32 = 1_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("packet has {count} samples, max {MAX_SAMPLES}")]
    PacketTooLarge { count: usize },
    #[error("bad magic {found:02x?}")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported protocol version {0}")]
    UnsupportedVersion(u8),
    #[error("truncated packet: need {needed} bytes, got {got}")]
    Truncated { needed: usize, got: usize },
    #[error("count mismatch: {trailing} trailing bytes after {count} samples")]
    CountMismatch { count: u8, trailing: usize },
}

/// One sensor reading as carried on the wire. Floats are `f32` because that
/// is the wire precision; [`ImuSample::orientation_quat`] and friends widen
/// to the `f64` math types.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    pub sensor_id: u8,
    /// Milliseconds since glove boot (device clock).
    pub timestamp_ms: u32,
    /// Specific force in g, body frame.
    pub accel: [f32; 3],
    /// Angular rate in deg/s, body frame.
    pub gyro: [f32; 3],
    /// Onboard-fusion orientation estimate, `[w, x, y, z]`.
    pub orientation: [f32; 4],
}

impl ImuSample {
    pub fn accel_vec(&self) -> Vec3 {
        Vec3::new(self.accel[0] as f64, self.accel[1] as f64, self.accel[2] as f64)
    }

    pub fn gyro_vec(&self) -> Vec3 {
        Vec3::new(self.gyro[0] as f64, self.gyro[1] as f64, self.gyro[2] as f64)
    }

    pub fn orientation_quat(&self) -> Quaternion {
        Quaternion::new(
            self.orientation[0] as f64,
            self.orientation[1] as f64,
            self.orientation[2] as f64,
            self.orientation[3] as f64,
        )
    }
}

/// One telemetry datagram: a wrapping sequence number and up to
/// [`MAX_SAMPLES`] samples (one multiplexer sweep).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SensorPacket {
    pub sequence: u32,
    pub samples: Vec<ImuSample>,
}

impl SensorPacket {
    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + SAMPLE_LEN * self.samples.len()
    }

    /// Serialize to wire bytes. Deterministic: the same packet always
    /// produces the same bytes.
    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        if self.samples.len() > MAX_SAMPLES {
            return Err(WireError::PacketTooLarge { count: self.samples.len() });
        }
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(0); // flags
        out.push(self.samples.len() as u8);
        out.push(0); // reserved
        out.extend_from_slice(&self.sequence.to_le_bytes());
        for s in &self.samples {
            out.push(s.sensor_id);
            out.push(0); // flags
            out.extend_from_slice(&0u16.to_le_bytes()); // reserved
            out.extend_from_slice(&s.timestamp_ms.to_le_bytes());
            for v in s.accel {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for v in s.gyro {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for v in s.orientation {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        debug_assert_eq!(out.len(), self.encoded_len());
        Ok(out)
    }

    /// Parse wire bytes. Inverse of [`SensorPacket::encode`] on valid input;
    /// never reads past the buffer and never panics on any input.
    pub fn decode(bytes: &[u8]) -> Result<SensorPacket, WireError> {
        if bytes.len() < HEADER_LEN {
            return Err(WireError::Truncated { needed: HEADER_LEN, got: bytes.len() });
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(WireError::BadMagic { found: magic });
        }
        let version = bytes[4];
        if version != VERSION {
            return Err(WireError::UnsupportedVersion(version));
        }
        let count = bytes[6];
        let needed = HEADER_LEN + SAMPLE_LEN * count as usize;
        if bytes.len() < needed {
            return Err(WireError::Truncated { needed, got: bytes.len() });
        }
        if bytes.len() > needed {
            return Err(WireError::CountMismatch { count, trailing: bytes.len() - needed });
        }
        let sequence = u32::from_le_bytes(bytes[8..12].try_into().unwrap());

        let mut samples = Vec::with_capacity(count as usize);
        for i in 0..count as usize {
            let r = &bytes[HEADER_LEN + i * SAMPLE_LEN..HEADER_LEN + (i + 1) * SAMPLE_LEN];
            let f32_at = |off: usize| f32::from_le_bytes(r[off..off + 4].try_into().unwrap());
            samples.push(ImuSample {
                sensor_id: r[0],
                timestamp_ms: u32::from_le_bytes(r[4..8].try_into().unwrap()),
                accel: [f32_at(8), f32_at(12), f32_at(16)],
                gyro: [f32_at(20), f32_at(24), f32_at(28)],
                orientation: [f32_at(32), f32_at(36), f32_at(40), f32_at(44)],
            });
        }
        Ok(SensorPacket { sequence, samples })
    }
}
