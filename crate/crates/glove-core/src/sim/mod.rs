//! Virtual glove firmware: drives the multiplexer polling loop over the
//! topology, reads the simulated sensors, assembles telemetry packets,
//! models timing jitter and battery discharge, and hands datagrams to a
//! sink (UDP socket or in-process collector).
//!
//! The core is single-threaded and fully deterministic given the config
//! seed. Simulated time runs as fast as the host allows by default; the
//! real-time pace sleeps to wall clock for live driver demos.

pub mod trajectory;

use std::net::UdpSocket;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RunConfig;
use crate::imu::{ImuState, NoiseModel};
use crate::quat::{Quaternion, Vec3};
use crate::wire::{ImuSample, SensorPacket};
use trajectory::SegmentTrajectory;

/// RNG stream ids; sensors use their id for noise and `TRAJECTORY_STREAM +
/// id` for trajectory draws, so streams never collide.
const JITTER_STREAM: u64 = 0xFFFF_0001;
const TRAJECTORY_STREAM: u64 = 0x0100_0000;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    /// Battery charge reached zero; the simulator is in its terminal state.
    #[error("battery empty after {minutes:.2} simulated minutes")]
    BatteryEmpty { minutes: f64 },
}

/// Acquisition-loop timing. One cycle reads every sensor in lane order and
/// then spends the overhead assembling and sending the packet:
/// `cycle = count * per_sensor_read_ms + cycle_overhead_ms`, multiplied by
/// a lognormal jitter factor, plus a rare stall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimingModel {
    pub per_sensor_read_ms: f64,
    pub cycle_overhead_ms: f64,
    /// Sigma of the lognormal multiplicative jitter on cycle time; 0 is
    /// jitter-free.
    pub jitter_sigma: f64,
    /// Probability per cycle of a stall (WiFi contention and similar).
    pub stall_prob: f64,
    pub stall_ms: f64,
    /// Internal sampling rate of each sensor's motion processor, Hz. The
    /// onboard filter advances at this rate regardless of how fast the
    /// polling loop reads the results.
    pub imu_rate_hz: f64,
}

impl Default for TimingModel {
    /// Calibrated jitter-free timing: 11 sensors at 4 ms each plus 1.87 ms
    /// overhead gives the 45.87 ms cycle of a 21.8 Hz stream.
    fn default() -> Self {
        TimingModel {
            per_sensor_read_ms: 4.0,
            cycle_overhead_ms: 1.87,
            jitter_sigma: 0.0,
            stall_prob: 0.0,
            stall_ms: 300.0,
            imu_rate_hz: 200.0,
        }
    }
}

impl TimingModel {
    /// Heavy-tailed preset: lognormal jitter plus rare 300 ms stalls,
    /// producing the large window-to-window rate spread seen on contended
    /// WiFi links.
    pub fn stall_jitter() -> TimingModel {
        TimingModel { jitter_sigma: 0.8, stall_prob: 0.01, ..TimingModel::default() }
    }

    pub fn nominal_cycle_ms(&self, sensor_count: usize) -> f64 {
        sensor_count as f64 * self.per_sensor_read_ms + self.cycle_overhead_ms
    }

    pub fn is_valid(&self) -> bool {
        self.per_sensor_read_ms >= 0.0
            && self.cycle_overhead_ms >= 0.0
            && self.jitter_sigma >= 0.0
            && (0.0..=1.0).contains(&self.stall_prob)
            && self.stall_ms >= 0.0
            && self.imu_rate_hz > 0.0
    }
}

/// Constant-current battery: no voltage model, no load dependence. Lifetime
/// is exactly `capacity_mah / draw_ma` hours, quantized to the cycle that
/// empties it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatteryModel {
    pub capacity_mah: f64,
    pub draw_ma: f64,
}

impl Default for BatteryModel {
    /// The reference glove: 220 mAh pack, with the draw back-solved from
    /// its measured 62.89-minute autonomy.
    fn default() -> Self {
        BatteryModel { capacity_mah: 220.0, draw_ma: 209.9 }
    }
}

impl BatteryModel {
    pub fn is_valid(&self) -> bool {
        self.capacity_mah > 0.0 && self.draw_ma > 0.0
    }

    pub fn nominal_autonomy_min(&self) -> f64 {
        self.capacity_mah / self.draw_ma * 60.0
    }
}

/// Ground-truth record paired with one wire sample, for evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub t_ms: f64,
    pub sensor_id: u8,
    pub quat: Quaternion,
}

/// Product of one polling cycle.
#[derive(Debug, Clone)]
pub struct StepOutput {
    /// Simulated time the datagram leaves the glove (end of cycle).
    pub emit_time_ms: f64,
    pub packet: SensorPacket,
    /// One record per sample, aligned with `packet.samples`.
    pub truth: Vec<TruthRecord>,
}

/// Where encoded datagrams go.
pub trait PacketSink {
    fn emit(&mut self, sim_time_ms: f64, datagram: &[u8]);
    /// Datagrams this sink discarded (full queue, would-block socket, ...).
    fn dropped(&self) -> u64 {
        0
    }
}

/// Collects raw datagrams in memory; drops nothing.
#[derive(Debug, Default)]
pub struct CollectSink {
    pub datagrams: Vec<(f64, Vec<u8>)>,
}

impl PacketSink for CollectSink {
    fn emit(&mut self, sim_time_ms: f64, datagram: &[u8]) {
        self.datagrams.push((sim_time_ms, datagram.to_vec()));
    }
}

/// Fire-and-forget UDP emitter. The socket is non-blocking; datagrams the
/// kernel will not take immediately are dropped and counted, mirroring
/// real UDP loss instead of stalling the simulated clock.
#[derive(Debug)]
pub struct UdpSink {
    socket: UdpSocket,
    pub sent: u64,
    dropped: u64,
}

impl UdpSink {
    pub fn connect(target: &str) -> std::io::Result<UdpSink> {
        let socket = UdpSocket::bind("0.0.0.0:0")?;
        socket.connect(target)?;
        socket.set_nonblocking(true)?;
        Ok(UdpSink { socket, sent: 0, dropped: 0 })
    }
}

impl PacketSink for UdpSink {
    fn emit(&mut self, _sim_time_ms: f64, datagram: &[u8]) {
        match self.socket.send(datagram) {
            Ok(_) => self.sent += 1,
            Err(_) => self.dropped += 1,
        }
    }

    fn dropped(&self) -> u64 {
        self.dropped
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunMode {
    /// Run until the simulated clock reaches this many seconds.
    Duration(f64),
    /// Run until the battery empties.
    UntilEmpty,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Pace {
    /// As fast as the host allows.
    #[default]
    Fast,
    /// Sleep so simulated time tracks wall time.
    Realtime,
}

/// What `run` should retain in memory.
#[derive(Debug, Clone, Copy)]
pub struct Capture {
    pub packets: bool,
    pub truth: bool,
}

impl Capture {
    pub fn all() -> Capture {
        Capture { packets: true, truth: true }
    }

    pub fn nothing() -> Capture {
        Capture { packets: false, truth: false }
    }
}

/// Everything a finished run leaves behind.
#[derive(Debug, Default)]
pub struct SessionLog {
    pub packets: Vec<(f64, SensorPacket)>,
    pub truth: Vec<TruthRecord>,
    pub cycles: u64,
    pub end_clock_ms: f64,
    pub battery_empty: bool,
    pub sink_dropped: u64,
}

impl SessionLog {
    pub fn autonomy_minutes(&self) -> f64 {
        self.end_clock_ms / 60_000.0
    }
}

struct LatestReading {
    gyro: Vec3,
    accel: Vec3,
    orientation: Quaternion,
    truth_quat: Quaternion,
    t_ms: f64,
}

struct SensorRuntime {
    id: u8,
    trajectory: SegmentTrajectory,
    imu: ImuState,
    ticks: u64,
    latest: LatestReading,
}

/// The virtual glove.
pub struct GloveSim {
    sensors: Vec<SensorRuntime>,
    noise: NoiseModel,
    timing: TimingModel,
    battery: BatteryModel,
    jitter_rng: ChaCha8Rng,
    tick_dt_s: f64,
    clock_ms: f64,
    charge_mah: f64,
    sequence: u32,
    cycles: u64,
}

impl GloveSim {
    pub fn new(config: &RunConfig) -> Result<GloveSim, crate::config::ConfigError> {
        let resolved = config.resolve()?;
        let tick_dt_s = 1.0 / resolved.timing.imu_rate_hz;

        let sensors = resolved
            .topology
            .polling_order()
            .into_iter()
            .map(|entry| {
                let trajectory = resolved.trajectory.sampler(
                    entry.segment,
                    resolved.seed,
                    TRAJECTORY_STREAM + entry.id as u64,
                );
                let truth0 = trajectory.truth_at(0.0);
                let mut imu = ImuState::new(
                    &resolved.noise,
                    entry.id as u64,
                    truth0.orientation,
                    crate::fusion::DEFAULT_ALPHA,
                );
                // Power-on read: gives the very first packet defined values
                // even if it lands before the first internal filter tick.
                let (gyro, accel) = imu.sample(&truth0, &resolved.noise, tick_dt_s);
                SensorRuntime {
                    id: entry.id,
                    imu,
                    trajectory,
                    ticks: 0,
                    latest: LatestReading {
                        gyro,
                        accel,
                        orientation: truth0.orientation,
                        truth_quat: truth0.orientation,
                        t_ms: 0.0,
                    },
                }
            })
            .collect();

        let mut jitter_rng = ChaCha8Rng::seed_from_u64(resolved.seed);
        jitter_rng.set_stream(JITTER_STREAM);

        Ok(GloveSim {
            sensors,
            noise: resolved.noise,
            timing: resolved.timing,
            battery: resolved.battery,
            jitter_rng,
            tick_dt_s,
            clock_ms: 0.0,
            charge_mah: resolved.battery.capacity_mah,
            sequence: 0,
            cycles: 0,
        })
    }

    pub fn clock_ms(&self) -> f64 {
        self.clock_ms
    }

    pub fn charge_mah(&self) -> f64 {
        self.charge_mah
    }

    /// One multiplexer sweep: read every sensor in lane order, assemble one
    /// packet, advance the clock by the jittered cycle time, and burn
    /// battery charge for it.
    pub fn step(&mut self) -> Result<StepOutput, SimError> {
        if self.charge_mah <= 0.0 {
            return Err(SimError::BatteryEmpty { minutes: self.clock_ms / 60_000.0 });
        }

        let jitter = if self.timing.jitter_sigma > 0.0 {
            let z: f64 = self.jitter_rng.sample(StandardNormal);
            (self.timing.jitter_sigma * z).exp()
        } else {
            1.0
        };
        let stall_ms = if self.timing.stall_prob > 0.0
            && self.jitter_rng.gen_bool(self.timing.stall_prob)
        {
            self.timing.stall_ms
        } else {
            0.0
        };

        let tick_dt_ms = self.tick_dt_s * 1000.0;
        let mut samples = Vec::with_capacity(self.sensors.len());
        let mut truth = Vec::with_capacity(self.sensors.len());

        for (k, sensor) in self.sensors.iter_mut().enumerate() {
            let t_read_ms = self.clock_ms + (k + 1) as f64 * self.timing.per_sensor_read_ms * jitter;

            // Advance the onboard motion processor to the read instant. The
            // gyro value for each tick is the rate at the interval midpoint,
            // i.e. the mean rate an integrating sensor reports.
            while (sensor.ticks + 1) as f64 * tick_dt_ms <= t_read_ms {
                let tick = sensor.ticks + 1;
                let t_tick_s = tick as f64 * self.tick_dt_s;
                let truth_sample = sensor
                    .trajectory
                    .truth_at_with_omega(t_tick_s, t_tick_s - self.tick_dt_s / 2.0);
                let (gyro, accel) = sensor.imu.sample(&truth_sample, &self.noise, self.tick_dt_s);
                let orientation = sensor.imu.onboard_orientation(gyro, accel, self.tick_dt_s);
                sensor.latest = LatestReading {
                    gyro,
                    accel,
                    orientation,
                    truth_quat: truth_sample.orientation,
                    t_ms: t_tick_s * 1000.0,
                };
                sensor.ticks = tick;
            }

            let l = &sensor.latest;
            samples.push(ImuSample {
                sensor_id: sensor.id,
                timestamp_ms: t_read_ms as u32,
                accel: [l.accel.x as f32, l.accel.y as f32, l.accel.z as f32],
                gyro: [l.gyro.x as f32, l.gyro.y as f32, l.gyro.z as f32],
                orientation: [
                    l.orientation.w as f32,
                    l.orientation.x as f32,
                    l.orientation.y as f32,
                    l.orientation.z as f32,
                ],
            });
            truth.push(TruthRecord { t_ms: l.t_ms, sensor_id: sensor.id, quat: l.truth_quat });
        }

        let cycle_ms = self.timing.nominal_cycle_ms(self.sensors.len()) * jitter + stall_ms;
        self.clock_ms += cycle_ms;
        self.charge_mah -= self.battery.draw_ma * cycle_ms / 3_600_000.0;
        self.cycles += 1;

        let packet = SensorPacket { sequence: self.sequence, samples };
        self.sequence = self.sequence.wrapping_add(1);
        Ok(StepOutput { emit_time_ms: self.clock_ms, packet, truth })
    }

    /// Drive the polling loop to completion. Deterministic given the seed;
    /// `BatteryEmpty` is normal termination in `UntilEmpty` mode and an
    /// error otherwise.
    pub fn run(
        &mut self,
        mode: RunMode,
        pace: Pace,
        capture: Capture,
        mut sink: Option<&mut dyn PacketSink>,
    ) -> Result<SessionLog, SimError> {
        let mut log = SessionLog::default();
        let wall_start = Instant::now();

        loop {
            if let RunMode::Duration(seconds) = mode {
                if self.clock_ms >= seconds * 1000.0 {
                    break;
                }
            }
            let out = match self.step() {
                Ok(out) => out,
                Err(SimError::BatteryEmpty { .. }) if mode == RunMode::UntilEmpty => {
                    log.battery_empty = true;
                    break;
                }
                Err(e) => return Err(e),
            };

            if pace == Pace::Realtime {
                let target = Duration::from_secs_f64(out.emit_time_ms / 1000.0);
                let elapsed = wall_start.elapsed();
                if target > elapsed {
                    std::thread::sleep(target - elapsed);
                }
            }

            if let Some(sink) = sink.as_mut() {
                let bytes = out.packet.encode().expect("topology-sized packets always encode");
                sink.emit(out.emit_time_ms, &bytes);
            }
            if capture.truth {
                log.truth.extend_from_slice(&out.truth);
            }
            if capture.packets {
                log.packets.push((out.emit_time_ms, out.packet));
            }
        }

        log.cycles = self.cycles;
        log.end_clock_ms = self.clock_ms;
        if let Some(sink) = sink.as_ref() {
            log.sink_dropped = sink.dropped();
        }
        Ok(log)
    }
}
