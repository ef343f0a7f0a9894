//! One JSON document configures a whole run: topology, noise, timing,
//! battery, trajectory, network endpoint, and seed. Every section is
//! optional and defaults to the reference glove.
//!
//! A 64-bit content digest of the config (seed excluded) is embedded in all
//! reports so any number is traceable to its run configuration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imu::NoiseModel;
use crate::sim::trajectory::TrajectoryConfig;
use crate::sim::{BatteryModel, TimingModel};
use crate::topology::{SensorTopology, Violation};
use crate::wire::DEFAULT_PORT;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unknown noise preset `{0}`")]
    UnknownNoisePreset(String),
    #[error("unknown topology name `{0}` (only \"default\" or an inline object)")]
    UnknownTopology(String),
    #[error("invalid topology: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Topology(Vec<Violation>),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Topology section: the string `"default"` or an inline topology object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TopologySection {
    Named(String),
    Inline(SensorTopology),
}

impl Default for TopologySection {
    fn default() -> Self {
        TopologySection::Named("default".into())
    }
}

/// Noise section: `{"preset": "..."}` or an explicit noise model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSection {
    Preset { preset: String },
    Explicit(NoiseModel),
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection::Explicit(NoiseModel::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    /// Destination for emitted datagrams, `host:port`.
    pub target: String,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig { target: format!("127.0.0.1:{DEFAULT_PORT}") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub topology: TopologySection,
    pub noise: NoiseSection,
    pub timing: TimingModel,
    pub battery: BatteryModel,
    pub trajectory: TrajectoryConfig,
    pub network: NetworkConfig,
    pub seed: u64,
}

/// Config with every section materialized and validated.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub topology: SensorTopology,
    pub noise: NoiseModel,
    pub timing: TimingModel,
    pub battery: BatteryModel,
    pub trajectory: TrajectoryConfig,
    pub seed: u64,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization cannot fail")
    }

    /// Materialize presets and check every section; returns the first
    /// structural problem found.
    pub fn resolve(&self) -> Result<ResolvedConfig, ConfigError> {
        let topology = match &self.topology {
            TopologySection::Named(name) if name == "default" => SensorTopology::default_topology(),
            TopologySection::Named(other) => {
                return Err(ConfigError::UnknownTopology(other.clone()))
            }
            TopologySection::Inline(t) => t.clone(),
        };
        let violations = topology.validate();
        if !violations.is_empty() {
            return Err(ConfigError::Topology(violations));
        }
        if topology.is_empty() {
            return Err(ConfigError::Invalid("topology has no sensors".into()));
        }
        if topology.len() > crate::wire::MAX_SAMPLES {
            return Err(ConfigError::Invalid(format!(
                "{} sensors exceed the {}-sample packet limit",
                topology.len(),
                crate::wire::MAX_SAMPLES
            )));
        }

        // The glove's RNG seed also perturbs the sensors' noise streams so
        // that re-seeding a trial re-rolls everything at once.
        let mut noise = match &self.noise {
            NoiseSection::Preset { preset } => NoiseModel::by_preset(preset, 0)
                .ok_or_else(|| ConfigError::UnknownNoisePreset(preset.clone()))?,
            NoiseSection::Explicit(m) => *m,
        };
        noise.seed ^= self.seed;
        if !noise.is_valid() {
            return Err(ConfigError::Invalid("noise sigmas must be finite and >= 0".into()));
        }

        if !self.timing.is_valid() {
            return Err(ConfigError::Invalid("timing parameters out of range".into()));
        }
        if self.timing.nominal_cycle_ms(topology.len()) <= 0.0 {
            return Err(ConfigError::Invalid("cycle time must be positive".into()));
        }
        if !self.battery.is_valid() {
            return Err(ConfigError::Invalid("battery capacity and draw must be > 0".into()));
        }
        match self.trajectory {
            TrajectoryConfig::ScriptedFlexion { amplitude_deg, period_s } => {
                if period_s <= 0.0 || !amplitude_deg.is_finite() {
                    return Err(ConfigError::Invalid("flexion period must be > 0".into()));
                }
            }
            TrajectoryConfig::RandomMotion { max_rate_deg_s, wander_deg } => {
                if max_rate_deg_s <= 0.0 || wander_deg <= 0.0 {
                    return Err(ConfigError::Invalid(
                        "random motion rate and wander must be > 0".into(),
                    ));
                }
            }
            TrajectoryConfig::StaticPose => {}
        }

        Ok(ResolvedConfig {
            topology,
            noise,
            timing: self.timing,
            battery: self.battery,
            trajectory: self.trajectory.clone(),
            seed: self.seed,
        })
    }

    /// Content hash of the configuration with the seed zeroed, so all
    /// trials of one protocol share a digest while the seed is reported
    /// separately.
    pub fn digest(&self) -> String {
        let mut canonical = self.clone();
        canonical.seed = 0;
        let bytes = serde_json::to_vec(&canonical).expect("config serialization cannot fail");
        format!("{:016x}", fnv1a64(&bytes))
    }

    /// Same config with a different seed; used for repeated trials.
    pub fn with_seed(&self, seed: u64) -> RunConfig {
        let mut c = self.clone();
        c.seed = seed;
        c
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_reference_glove() {
        let config = RunConfig::from_json("{}").unwrap();
        let resolved = config.resolve().unwrap();
        assert_eq!(resolved.topology.len(), 11);
        assert_eq!(resolved.battery, BatteryModel::default());
        assert_eq!(resolved.trajectory, TrajectoryConfig::StaticPose);
    }

    #[test]
    fn noise_preset_by_name() {
        let config =
            RunConfig::from_json(r#"{"noise": {"preset": "mpu9250_default"}, "seed": 3}"#).unwrap();
        let resolved = config.resolve().unwrap();
        assert_eq!(resolved.noise.gyro_white_sigma, 0.1);
        assert_eq!(resolved.noise.seed, 3);

        let bad = RunConfig::from_json(r#"{"noise": {"preset": "nope"}}"#).unwrap();
        assert!(matches!(bad.resolve(), Err(ConfigError::UnknownNoisePreset(_))));
    }

    #[test]
    fn digest_ignores_seed_but_not_content() {
        let a = RunConfig::default();
        let b = a.with_seed(123);
        assert_eq!(a.digest(), b.digest());

        let mut c = a.clone();
        c.battery.draw_ma = 100.0;
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn invalid_sections_are_rejected() {
        let mut c = RunConfig::default();
        c.battery.draw_ma = 0.0;
        assert!(matches!(c.resolve(), Err(ConfigError::Invalid(_))));

        let mut c = RunConfig::default();
        c.timing.jitter_sigma = -1.0;
        assert!(matches!(c.resolve(), Err(ConfigError::Invalid(_))));

        let c = RunConfig::from_json(r#"{"trajectory": {"kind": "scripted_flexion", "amplitude_deg": 90.0, "period_s": 0.0}}"#).unwrap();
        assert!(matches!(c.resolve(), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn unknown_root_keys_are_parse_errors() {
        assert!(RunConfig::from_json(r#"{"batery": {}}"#).is_err());
    }
}
