//! Physical sensor arrangement of the glove: I2C lanes, addresses, and
//! hand-segment assignment.
//!
//! The multiplexer exposes 6 lanes (0–5) and each lane carries at most two
//! sensors, one per selectable I2C address. Lane conventions: hand back on
//! lane 0, thumb on lane 1 through little finger on lane 5, proximal phalanx
//! at address A and intermediate at address B.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of I2C lanes behind the multiplexer.
pub const LANE_COUNT: u8 = 6;
/// Selectable addresses per lane.
pub const SENSORS_PER_LANE: usize = 2;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("topology parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid topology: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum I2cAddress {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Finger {
    Thumb,
    Index,
    Middle,
    Ring,
    Little,
}

impl Finger {
    pub const ALL: [Finger; 5] =
        [Finger::Thumb, Finger::Index, Finger::Middle, Finger::Ring, Finger::Little];

    pub fn name(self) -> &'static str {
        match self {
            Finger::Thumb => "thumb",
            Finger::Index => "index",
            Finger::Middle => "middle",
            Finger::Ring => "ring",
            Finger::Little => "little",
        }
    }
}

impl fmt::Display for Finger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phalanx {
    Proximal,
    Intermediate,
}

impl Phalanx {
    pub fn name(self) -> &'static str {
        match self {
            Phalanx::Proximal => "proximal",
            Phalanx::Intermediate => "intermediate",
        }
    }
}

/// Hand segment a sensor is strapped to: the back of the hand (core module)
/// or one phalanx of one finger (sensory module).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SegmentLabel {
    HandBack,
    Phalanx { finger: Finger, phalanx: Phalanx },
}

impl SegmentLabel {
    pub fn phalanx(finger: Finger, phalanx: Phalanx) -> Self {
        SegmentLabel::Phalanx { finger, phalanx }
    }
}

impl fmt::Display for SegmentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SegmentLabel::HandBack => f.write_str("hand_back"),
            SegmentLabel::Phalanx { finger, phalanx } => {
                write!(f, "{}/{}", finger.name(), phalanx.name())
            }
        }
    }
}

impl std::str::FromStr for SegmentLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "hand_back" {
            return Ok(SegmentLabel::HandBack);
        }
        let (f, p) = s
            .split_once('/')
            .ok_or_else(|| format!("segment `{s}` is not `hand_back` or `<finger>/<phalanx>`"))?;
        let finger = Finger::ALL
            .into_iter()
            .find(|x| x.name() == f)
            .ok_or_else(|| format!("unknown finger `{f}`"))?;
        let phalanx = match p {
            "proximal" => Phalanx::Proximal,
            "intermediate" => Phalanx::Intermediate,
            other => return Err(format!("unknown phalanx `{other}`")),
        };
        Ok(SegmentLabel::Phalanx { finger, phalanx })
    }
}

impl Serialize for SegmentLabel {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SegmentLabel {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Handedness {
    #[default]
    Right,
    Left,
}

/// One sensor slot: which lane and address it answers on and which hand
/// segment it is mounted to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorEntry {
    pub id: u8,
    pub lane: u8,
    pub address: I2cAddress,
    pub segment: SegmentLabel,
}

/// Mapping sensor id → (I2C lane, address, hand segment) for the whole glove.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorTopology {
    pub version: u32,
    #[serde(default)]
    pub handedness: Handedness,
    pub sensors: Vec<SensorEntry>,
}

/// Single invariant violation found by [`SensorTopology::validate`].
/// Violations are data, not errors: `validate` reports all of them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    LaneOutOfRange { id: u8, lane: u8 },
    LaneOverflow { lane: u8, count: usize },
    DuplicateId { id: u8 },
    DuplicateAddress { lane: u8, address: I2cAddress },
    DuplicateSegment { segment: SegmentLabel },
    ReservedId { id: u8 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LaneOutOfRange { id, lane } => {
                write!(f, "sensor {id}: lane {lane} out of range 0-{}", LANE_COUNT - 1)
            }
            Violation::LaneOverflow { lane, count } => {
                write!(f, "lane {lane} has {count} > {SENSORS_PER_LANE} sensors")
            }
            Violation::DuplicateId { id } => write!(f, "duplicate sensor id {id}"),
            Violation::DuplicateAddress { lane, address } => {
                write!(f, "lane {lane} address {address:?} assigned twice")
            }
            Violation::DuplicateSegment { segment } => {
                write!(f, "segment {segment} carries more than one sensor")
            }
            Violation::ReservedId { id } => write!(f, "sensor id {id} is reserved"),
        }
    }
}

impl SensorTopology {
    /// The reference glove: eleven IMUs. Hand back alone on lane 0; one lane
    /// per finger with the proximal phalanx at address A and the
    /// intermediate at address B.
    pub fn default_topology() -> SensorTopology {
        let mut sensors = vec![SensorEntry {
            id: 0,
            lane: 0,
            address: I2cAddress::A,
            segment: SegmentLabel::HandBack,
        }];
        for (i, finger) in Finger::ALL.into_iter().enumerate() {
            let lane = (i + 1) as u8;
            sensors.push(SensorEntry {
                id: (2 * i + 1) as u8,
                lane,
                address: I2cAddress::A,
                segment: SegmentLabel::phalanx(finger, Phalanx::Proximal),
            });
            sensors.push(SensorEntry {
                id: (2 * i + 2) as u8,
                lane,
                address: I2cAddress::B,
                segment: SegmentLabel::phalanx(finger, Phalanx::Intermediate),
            });
        }
        SensorTopology { version: 1, handedness: Handedness::Right, sensors }
    }

    /// Check every invariant and return all violations found.
    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = Vec::new();
        let mut ids = BTreeSet::new();
        let mut slots = BTreeSet::new();
        let mut segments = BTreeSet::new();
        let mut lane_counts = [0usize; LANE_COUNT as usize];

        for s in &self.sensors {
            if s.id == 255 {
                violations.push(Violation::ReservedId { id: s.id });
            }
            if !ids.insert(s.id) {
                violations.push(Violation::DuplicateId { id: s.id });
            }
            if s.lane >= LANE_COUNT {
                violations.push(Violation::LaneOutOfRange { id: s.id, lane: s.lane });
                continue;
            }
            lane_counts[s.lane as usize] += 1;
            if !slots.insert((s.lane, s.address)) {
                violations.push(Violation::DuplicateAddress { lane: s.lane, address: s.address });
            }
            if !segments.insert(s.segment) {
                violations.push(Violation::DuplicateSegment { segment: s.segment });
            }
        }
        for (lane, &count) in lane_counts.iter().enumerate() {
            if count > SENSORS_PER_LANE {
                violations.push(Violation::LaneOverflow { lane: lane as u8, count });
            }
        }
        violations
    }

    /// Parse and validate a topology document (see the JSON schema in the
    /// repository README).
    pub fn load(text: &str) -> Result<SensorTopology, TopologyError> {
        let t: SensorTopology = serde_json::from_str(text)?;
        let violations = t.validate();
        if violations.is_empty() {
            Ok(t)
        } else {
            Err(TopologyError::Invalid(violations))
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("topology serialization cannot fail")
    }

    /// Sensors in multiplexer polling order: lane 0 → 5, address A then B.
    pub fn polling_order(&self) -> Vec<SensorEntry> {
        let mut order = self.sensors.clone();
        order.sort_by_key(|s| (s.lane, s.address));
        order
    }

    pub fn sensor_for_segment(&self, segment: SegmentLabel) -> Option<&SensorEntry> {
        self.sensors.iter().find(|s| s.segment == segment)
    }

    pub fn hand_back_id(&self) -> Option<u8> {
        self.sensor_for_segment(SegmentLabel::HandBack).map(|s| s.id)
    }

    pub fn len(&self) -> usize {
        self.sensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sensors.is_empty()
    }
}
