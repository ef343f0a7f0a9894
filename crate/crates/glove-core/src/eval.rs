//! Evaluation protocol: static drift, dynamic drift, autonomy, and
//! frequency reports with angular-RMSE aggregation, reproducing the
//! reference experiments at desk scale.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::quat::Quaternion;
use crate::sim::{Capture, GloveSim, Pace, RunMode, SimError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty error series")]
    EmptySeries,
    #[error("trajectory must be {expected} for this test, got {got}")]
    WrongTrajectory { expected: &'static str, got: String },
    #[error("evaluation needs at least one trial")]
    NoTrials,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Root mean square of an angular error series, degrees.
pub fn rmse(errors_deg: &[f64]) -> Result<f64, EvalError> {
    if errors_deg.is_empty() {
        return Err(EvalError::EmptySeries);
    }
    let mean_sq = errors_deg.iter().map(|e| e * e).sum::<f64>() / errors_deg.len() as f64;
    Ok(mean_sq.sqrt())
}

/// First-sample alignment: the fixed world rotation taking the estimate
/// onto the truth at t=0, applied to the whole estimated series before
/// error computation. Matches the "put the glove on, zero it" workflow.
pub fn align(est: &[Quaternion], truth: &[Quaternion]) -> Quaternion {
    match (est.first(), truth.first()) {
        (Some(e), Some(t)) => t.multiply(e.conjugate()),
        _ => Quaternion::IDENTITY,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorRmse {
    pub id: u8,
    pub rmse_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    /// Arithmetic mean of the per-sensor RMSE values.
    pub mean_deg: f64,
    /// Population SD across sensors.
    pub sd_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentEntry {
    pub id: u8,
    pub quat: Quaternion,
}

/// Per-sensor and aggregate angular RMSE of one drift session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub test: String,
    pub duration_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<String>,
    pub per_sensor: Vec<SensorRmse>,
    pub aggregate: Aggregate,
    /// First-sample alignment rotation used for each sensor.
    pub alignment: Vec<AlignmentEntry>,
    pub config_digest: String,
    pub seed: u64,
}

impl DriftReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serialization cannot fail")
    }
}

fn aggregate_of(values: &[f64]) -> Aggregate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Aggregate { mean_deg: mean, sd_deg: var.sqrt() }
}

/// Run one drift session and score it: simulate with ground-truth capture,
/// align each sensor's estimate series on its first sample, and aggregate
/// the per-sensor angular RMSE.
fn drift_test(config: &RunConfig, duration_s: f64, test: &str) -> Result<DriftReport, EvalError> {
    let mut sim = GloveSim::new(config)?;
    let log = sim.run(
        RunMode::Duration(duration_s),
        Pace::Fast,
        Capture { packets: true, truth: true },
        None,
    )?;

    let mut est: BTreeMap<u8, Vec<Quaternion>> = BTreeMap::new();
    for (_, packet) in &log.packets {
        for s in &packet.samples {
            // Wire quaternions are f32 and unit only to wire precision.
            let q = s.orientation_quat().normalize().unwrap_or(Quaternion::IDENTITY);
            est.entry(s.sensor_id).or_default().push(q);
        }
    }
    let mut truth: BTreeMap<u8, Vec<Quaternion>> = BTreeMap::new();
    for r in &log.truth {
        truth.entry(r.sensor_id).or_default().push(r.quat);
    }

    let mut per_sensor = Vec::with_capacity(est.len());
    let mut alignment = Vec::with_capacity(est.len());
    for (&id, est_series) in &est {
        let truth_series = &truth[&id];
        debug_assert_eq!(est_series.len(), truth_series.len());
        let a = align(est_series, truth_series);
        let errors: Vec<f64> = est_series
            .iter()
            .zip(truth_series)
            .map(|(e, t)| a.multiply(*e).angular_distance(*t))
            .collect();
        per_sensor.push(SensorRmse { id, rmse_deg: rmse(&errors)? });
        alignment.push(AlignmentEntry { id, quat: a });
    }

    let values: Vec<f64> = per_sensor.iter().map(|s| s.rmse_deg).collect();
    Ok(DriftReport {
        test: test.to_string(),
        duration_s,
        trajectory: (test != "static_drift").then(|| config.trajectory.descriptor()),
        aggregate: aggregate_of(&values),
        per_sensor,
        alignment,
        config_digest: config.digest(),
        seed: config.seed,
    })
}

/// Static protocol: glove at rest, measure how far the estimated
/// orientations wander from the pose over `duration_s`.
pub fn static_drift_test(config: &RunConfig, duration_s: f64) -> Result<DriftReport, EvalError> {
    if !config.trajectory.is_static() {
        return Err(EvalError::WrongTrajectory {
            expected: "static_pose",
            got: config.trajectory.descriptor(),
        });
    }
    drift_test(config, duration_s, "static_drift")
}

/// Dynamic protocol: same scoring with a moving ground truth.
pub fn dynamic_drift_test(config: &RunConfig, duration_s: f64) -> Result<DriftReport, EvalError> {
    if config.trajectory.is_static() {
        return Err(EvalError::WrongTrajectory {
            expected: "a moving trajectory",
            got: config.trajectory.descriptor(),
        });
    }
    drift_test(config, duration_s, "dynamic_drift")
}

/// Simulated minutes until the battery empties.
pub fn autonomy_test(config: &RunConfig) -> Result<f64, EvalError> {
    let mut sim = GloveSim::new(config)?;
    let log = sim.run(RunMode::UntilEmpty, Pace::Fast, Capture::nothing(), None)?;
    Ok(log.autonomy_minutes())
}

/// Mean/SD across repeated seeded trials of a scalar result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub mean: f64,
    pub sd: f64,
}

fn trial_stats(values: &[f64]) -> TrialStats {
    let a = aggregate_of(values);
    TrialStats { mean: a.mean_deg, sd: a.sd_deg }
}

/// Drift protocol over `trials` independent runs seeded `seed, seed+1, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftTrials {
    pub test: String,
    pub duration_s: f64,
    pub trials: Vec<DriftReport>,
    /// Across-trial statistics of the per-trial aggregate means.
    pub across_trials: TrialStats,
    pub config_digest: String,
    pub seed: u64,
}

pub fn drift_trials(
    config: &RunConfig,
    duration_s: f64,
    trials: u32,
    dynamic: bool,
) -> Result<DriftTrials, EvalError> {
    if trials == 0 {
        return Err(EvalError::NoTrials);
    }
    let mut reports = Vec::with_capacity(trials as usize);
    for i in 0..trials {
        let trial_config = config.with_seed(config.seed + i as u64);
        let report = if dynamic {
            dynamic_drift_test(&trial_config, duration_s)?
        } else {
            static_drift_test(&trial_config, duration_s)?
        };
        reports.push(report);
    }
    let means: Vec<f64> = reports.iter().map(|r| r.aggregate.mean_deg).collect();
    Ok(DriftTrials {
        test: reports[0].test.clone(),
        duration_s,
        across_trials: trial_stats(&means),
        trials: reports,
        config_digest: config.digest(),
        seed: config.seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutonomyTrials {
    pub test: String,
    pub minutes: Vec<f64>,
    pub across_trials: TrialStats,
    pub config_digest: String,
    pub seed: u64,
}

pub fn autonomy_trials(config: &RunConfig, trials: u32) -> Result<AutonomyTrials, EvalError> {
    if trials == 0 {
        return Err(EvalError::NoTrials);
    }
    let mut minutes = Vec::with_capacity(trials as usize);
    for i in 0..trials {
        minutes.push(autonomy_test(&config.with_seed(config.seed + i as u64))?);
    }
    Ok(AutonomyTrials {
        test: "autonomy".to_string(),
        across_trials: trial_stats(&minutes),
        minutes,
        config_digest: config.digest(),
        seed: config.seed,
    })
}
