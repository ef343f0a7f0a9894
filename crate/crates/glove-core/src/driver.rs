//! Host-side receiver: listens for datagrams, decodes and timestamps them
//! on arrival, tracks loss and rate statistics, records sessions to disk,
//! and replays recordings.
//!
//! The socket loop and the consumer are decoupled by a bounded queue; when
//! the consumer falls behind, the oldest packets are dropped and counted as
//! overrun, so network loss and consumer overrun stay distinguishable.

use std::collections::{BTreeMap, VecDeque};
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::net::UdpSocket;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant, SystemTime};

use serde::Serialize;
use thiserror::Error;

use crate::wire::{SensorPacket, REORDER_WINDOW};

pub const RECORDING_MAGIC: [u8; 4] = *b"GLVR";
pub const RECORDING_VERSION: u16 = 1;
pub const RECORDING_HEADER_LEN: usize = 16;
/// Consumer queue depth before the oldest packet is dropped.
pub const QUEUE_CAPACITY: usize = 1024;
/// Datagrams larger than any valid packet are truncated at this size.
pub const MAX_DATAGRAM: usize = 2048;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("session shorter than 2 s; rate statistics undefined")]
    TooShort,
    #[error("recording corrupt at byte offset {offset}")]
    RecordingCorrupt { offset: u64 },
    #[error("failed to bind UDP port {port}: {source}")]
    Bind { port: u16, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
}

// ─── Session tracking ────────────────────────────────────────────────────────

/// Rate and loss statistics over one receive session. Rates are computed
/// over complete 1-second windows of arrival time; the SD is the population
/// standard deviation across windows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionStats {
    pub packets_received: u64,
    /// Sequence-gap count: packets the glove sent that never arrived.
    pub packets_lost: u64,
    pub malformed: u64,
    pub duration_s: f64,
    pub rate_mean_hz: f64,
    pub rate_sd_hz: f64,
    pub per_sensor: BTreeMap<u8, u64>,
    /// Packets dropped host-side because the consumer fell behind.
    pub consumer_overrun: u64,
}

/// Pure receive-side state machine: feed it datagrams with arrival times,
/// get decoded packets and statistics back. The socket listener wraps one
/// of these; tests can drive it directly.
#[derive(Debug, Clone, Default)]
pub struct SessionTracker {
    received: u64,
    malformed: u64,
    first_arrival_ms: Option<f64>,
    last_arrival_ms: f64,
    window_counts: Vec<u64>,
    per_sensor: BTreeMap<u8, u64>,
    seq: SeqState,
}

#[derive(Debug, Clone, Default)]
struct SeqState {
    first: Option<u64>,
    highest: u64,
    epoch: u64,
    last_raw: u32,
}

impl SeqState {
    /// Extend the wrapping u32 sequence to u64. A decrease within the
    /// reorder window is a late packet from the same epoch; a decrease of
    /// more than half the range is a wrap.
    fn observe(&mut self, raw: u32) -> u64 {
        if self.first.is_none() {
            let seq = raw as u64;
            self.first = Some(seq);
            self.highest = seq;
            self.last_raw = raw;
            return seq;
        }
        if raw < self.last_raw && self.last_raw - raw <= REORDER_WINDOW {
            // Reordered packet; keep the stream head where it is.
            return self.epoch << 32 | raw as u64;
        }
        if raw < self.last_raw && self.last_raw - raw > u32::MAX / 2 {
            self.epoch += 1;
        } else if raw > self.last_raw && raw - self.last_raw > u32::MAX / 2 && self.epoch > 0 {
            // Late packet from before the wrap.
            let seq = (self.epoch - 1) << 32 | raw as u64;
            self.highest = self.highest.max(seq);
            return seq;
        }
        self.last_raw = raw;
        let seq = self.epoch << 32 | raw as u64;
        self.highest = self.highest.max(seq);
        seq
    }
}

impl SessionTracker {
    pub fn new() -> SessionTracker {
        SessionTracker::default()
    }

    /// Process one datagram. Valid packets are returned for delivery;
    /// malformed ones are counted and skipped.
    pub fn feed(&mut self, arrival_ms: f64, datagram: &[u8]) -> Option<SensorPacket> {
        let packet = match SensorPacket::decode(datagram) {
            Ok(p) => p,
            Err(_) => {
                self.malformed += 1;
                return None;
            }
        };
        let first = *self.first_arrival_ms.get_or_insert(arrival_ms);
        self.last_arrival_ms = self.last_arrival_ms.max(arrival_ms);
        let window = ((arrival_ms - first) / 1000.0).floor().max(0.0) as usize;
        if window >= self.window_counts.len() {
            self.window_counts.resize(window + 1, 0);
        }
        self.window_counts[window] += 1;

        self.received += 1;
        self.seq.observe(packet.sequence);
        for s in &packet.samples {
            *self.per_sensor.entry(s.sensor_id).or_insert(0) += 1;
        }
        Some(packet)
    }

    pub fn received(&self) -> u64 {
        self.received
    }

    pub fn malformed(&self) -> u64 {
        self.malformed
    }

    pub fn duration_s(&self) -> f64 {
        match self.first_arrival_ms {
            Some(first) => (self.last_arrival_ms - first) / 1000.0,
            None => 0.0,
        }
    }

    pub fn packets_lost(&self) -> u64 {
        match self.seq.first {
            Some(first) => {
                let expected = self.seq.highest - first + 1;
                expected.saturating_sub(self.received)
            }
            None => 0,
        }
    }

    /// Final statistics. Needs at least 2 s of data for the windowed rates
    /// to mean anything.
    pub fn stats(&self) -> Result<SessionStats, DriverError> {
        self.stats_with_overrun(0)
    }

    pub fn stats_with_overrun(&self, consumer_overrun: u64) -> Result<SessionStats, DriverError> {
        let duration_s = self.duration_s();
        if duration_s < 2.0 {
            return Err(DriverError::TooShort);
        }
        let complete = duration_s.floor() as usize;
        let windows = &self.window_counts[..complete.min(self.window_counts.len())];
        let n = windows.len() as f64;
        let mean = windows.iter().sum::<u64>() as f64 / n;
        let var = windows.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / n;
        Ok(SessionStats {
            packets_received: self.received,
            packets_lost: self.packets_lost(),
            malformed: self.malformed,
            duration_s,
            rate_mean_hz: mean,
            rate_sd_hz: var.sqrt(),
            per_sensor: self.per_sensor.clone(),
            consumer_overrun,
        })
    }
}

// ─── Recording files ─────────────────────────────────────────────────────────

/// On-disk session format: a 16-byte header (magic "GLVR", version u16,
/// reserved u16, start epoch ms u64) followed by frames of
/// (arrival_offset_ms u32, payload_len u16, payload = raw datagram).
/// Little-endian throughout.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Recording {
    pub start_epoch_ms: u64,
    pub frames: Vec<RecordedFrame>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordedFrame {
    pub arrival_offset_ms: u32,
    pub payload: Vec<u8>,
}

impl Recording {
    pub fn load(path: &Path) -> Result<Recording, DriverError> {
        let mut reader = BufReader::new(File::open(path)?);
        Recording::read_from(&mut reader)
    }

    pub fn read_from(r: &mut impl Read) -> Result<Recording, DriverError> {
        let mut header = [0u8; RECORDING_HEADER_LEN];
        read_exact_at(r, &mut header, 0)?;
        if header[0..4] != RECORDING_MAGIC {
            return Err(DriverError::RecordingCorrupt { offset: 0 });
        }
        if u16::from_le_bytes([header[4], header[5]]) != RECORDING_VERSION {
            return Err(DriverError::RecordingCorrupt { offset: 4 });
        }
        let start_epoch_ms = u64::from_le_bytes(header[8..16].try_into().unwrap());

        let mut frames = Vec::new();
        let mut offset = RECORDING_HEADER_LEN as u64;
        loop {
            let mut frame_header = [0u8; 6];
            if r.read(&mut frame_header[..1])? == 0 {
                break; // clean end of file
            }
            read_exact_at(r, &mut frame_header[1..], offset + 1)?;
            let arrival_offset_ms = u32::from_le_bytes(frame_header[0..4].try_into().unwrap());
            let len = u16::from_le_bytes([frame_header[4], frame_header[5]]) as usize;
            let mut payload = vec![0u8; len];
            read_exact_at(r, &mut payload, offset + 6)?;
            frames.push(RecordedFrame { arrival_offset_ms, payload });
            offset += 6 + len as u64;
        }
        Ok(Recording { start_epoch_ms, frames })
    }

    pub fn save(&self, path: &Path) -> Result<(), DriverError> {
        let mut writer = RecordingWriter::create(path, self.start_epoch_ms)?;
        for f in &self.frames {
            writer.append(f.arrival_offset_ms, &f.payload)?;
        }
        writer.finish()?;
        Ok(())
    }

    /// Replay schedule: decoded packets with inter-arrival gaps scaled by
    /// `1/speed`. Malformed frames are skipped.
    pub fn replay(&self, speed: f64) -> Vec<(f64, SensorPacket)> {
        assert!(speed > 0.0, "replay speed must be positive");
        self.frames
            .iter()
            .filter_map(|f| {
                let packet = SensorPacket::decode(&f.payload).ok()?;
                Some((f.arrival_offset_ms as f64 / speed, packet))
            })
            .collect()
    }
}

fn read_exact_at(r: &mut impl Read, buf: &mut [u8], offset: u64) -> Result<(), DriverError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => DriverError::RecordingCorrupt { offset },
        _ => DriverError::Io(e),
    })
}

/// Streaming writer used while a session is live.
#[derive(Debug)]
pub struct RecordingWriter {
    out: BufWriter<File>,
    pub frames_written: u64,
}

impl RecordingWriter {
    pub fn create(path: &Path, start_epoch_ms: u64) -> Result<RecordingWriter, DriverError> {
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(&RECORDING_MAGIC)?;
        out.write_all(&RECORDING_VERSION.to_le_bytes())?;
        out.write_all(&0u16.to_le_bytes())?;
        out.write_all(&start_epoch_ms.to_le_bytes())?;
        Ok(RecordingWriter { out, frames_written: 0 })
    }

    pub fn append(&mut self, arrival_offset_ms: u32, payload: &[u8]) -> Result<(), DriverError> {
        debug_assert!(payload.len() <= u16::MAX as usize);
        self.out.write_all(&arrival_offset_ms.to_le_bytes())?;
        self.out.write_all(&(payload.len() as u16).to_le_bytes())?;
        self.out.write_all(payload)?;
        self.frames_written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), DriverError> {
        self.out.flush()?;
        Ok(())
    }
}

/// Flatten every sample of a recording to CSV rows
/// `t_ms,sensor_id,ax,ay,az,gx,gy,gz,qw,qx,qy,qz`. Returns the row count.
pub fn export_csv(recording: &Recording, out: &mut impl Write) -> io::Result<u64> {
    writeln!(out, "t_ms,sensor_id,ax,ay,az,gx,gy,gz,qw,qx,qy,qz")?;
    let mut rows = 0;
    for frame in &recording.frames {
        let Ok(packet) = SensorPacket::decode(&frame.payload) else { continue };
        for s in &packet.samples {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                s.timestamp_ms,
                s.sensor_id,
                s.accel[0],
                s.accel[1],
                s.accel[2],
                s.gyro[0],
                s.gyro[1],
                s.gyro[2],
                s.orientation[0],
                s.orientation[1],
                s.orientation[2],
                s.orientation[3],
            )?;
            rows += 1;
        }
    }
    Ok(rows)
}

// ─── UDP listener ────────────────────────────────────────────────────────────

struct ListenerShared {
    queue: Mutex<VecDeque<(f64, SensorPacket)>>,
    ready: Condvar,
    tracker: Mutex<SessionTracker>,
    recorder: Mutex<Option<RecordingWriter>>,
    overrun: AtomicU64,
    stop: AtomicBool,
}

/// Owns the receive socket. Every valid datagram is delivered exactly once
/// in arrival order through [`Listener::recv_timeout`]; malformed datagrams
/// are counted and skipped.
pub struct Listener {
    shared: Arc<ListenerShared>,
    port: u16,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl Listener {
    /// Bind `port` (0 picks a free one) and start receiving. When
    /// `record_to` is given, every raw datagram is also appended to that
    /// recording file as it arrives.
    pub fn bind(port: u16, record_to: Option<&Path>) -> Result<Listener, DriverError> {
        let socket = UdpSocket::bind(("0.0.0.0", port))
            .map_err(|source| DriverError::Bind { port, source })?;
        let local_port = socket.local_addr().map(|a| a.port()).unwrap_or(port);
        socket.set_read_timeout(Some(Duration::from_millis(50)))?;

        let start_epoch_ms = SystemTime::now()
            .duration_since(SystemTime::UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        let recorder = match record_to {
            Some(path) => Some(RecordingWriter::create(path, start_epoch_ms)?),
            None => None,
        };

        let shared = Arc::new(ListenerShared {
            queue: Mutex::new(VecDeque::with_capacity(QUEUE_CAPACITY)),
            ready: Condvar::new(),
            tracker: Mutex::new(SessionTracker::new()),
            recorder: Mutex::new(recorder),
            overrun: AtomicU64::new(0),
            stop: AtomicBool::new(false),
        });

        let thread_shared = Arc::clone(&shared);
        let thread = std::thread::spawn(move || {
            let start = Instant::now();
            let mut buf = [0u8; MAX_DATAGRAM];
            while !thread_shared.stop.load(Ordering::Relaxed) {
                let n = match socket.recv(&mut buf) {
                    Ok(n) => n,
                    Err(ref e)
                        if e.kind() == io::ErrorKind::WouldBlock
                            || e.kind() == io::ErrorKind::TimedOut =>
                    {
                        continue
                    }
                    Err(_) => break,
                };
                let arrival_ms = start.elapsed().as_secs_f64() * 1000.0;
                let datagram = &buf[..n];

                if let Some(writer) = thread_shared.recorder.lock().unwrap().as_mut() {
                    let _ = writer.append(arrival_ms as u32, datagram);
                }
                let delivered = thread_shared.tracker.lock().unwrap().feed(arrival_ms, datagram);
                if let Some(packet) = delivered {
                    let mut queue = thread_shared.queue.lock().unwrap();
                    if queue.len() >= QUEUE_CAPACITY {
                        queue.pop_front();
                        thread_shared.overrun.fetch_add(1, Ordering::Relaxed);
                    }
                    queue.push_back((arrival_ms, packet));
                    drop(queue);
                    thread_shared.ready.notify_one();
                }
            }
        });

        Ok(Listener { shared, port: local_port, thread: Some(thread) })
    }

    pub fn local_port(&self) -> u16 {
        self.port
    }

    /// Next packet in arrival order, or `None` on timeout.
    pub fn recv_timeout(&self, timeout: Duration) -> Option<(f64, SensorPacket)> {
        let deadline = Instant::now() + timeout;
        let mut queue = self.shared.queue.lock().unwrap();
        loop {
            if let Some(item) = queue.pop_front() {
                return Some(item);
            }
            let now = Instant::now();
            if now >= deadline {
                return None;
            }
            let (q, _) = self.shared.ready.wait_timeout(queue, deadline - now).unwrap();
            queue = q;
        }
    }

    pub fn tracker_snapshot(&self) -> SessionTracker {
        self.shared.tracker.lock().unwrap().clone()
    }

    pub fn consumer_overrun(&self) -> u64 {
        self.shared.overrun.load(Ordering::Relaxed)
    }

    pub fn stats(&self) -> Result<SessionStats, DriverError> {
        self.tracker_snapshot().stats_with_overrun(self.consumer_overrun())
    }

    /// Stop receiving, flush any recording, and return the final tracker.
    pub fn shutdown(mut self) -> Result<SessionTracker, DriverError> {
        self.shared.stop.store(true, Ordering::Relaxed);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
        if let Some(writer) = self.shared.recorder.lock().unwrap().take() {
            writer.finish()?;
        }
        Ok(self.shared.tracker.lock().unwrap().clone())
    }
}

impl Drop for Listener {
    fn drop(&mut self) {
        self.shared.stop.store(true, Ordering::Relaxed);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
