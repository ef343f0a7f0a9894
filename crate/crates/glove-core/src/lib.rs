//! Software twin of a modular IMU data glove.
//!
//! The crate models the full pipeline of an eleven-sensor inertial glove:
//!
//! - [`quat`]: quaternion algebra and angular-error metrics.
//! - [`topology`]: I2C lanes, addresses, and hand-segment assignment.
//! - [`wire`]: the bit-exact UDP telemetry codec.
//! - [`imu`]: stochastic sensor models (bias, random walk, white noise).
//! - [`fusion`]: the six-axis complementary attitude filter each sensor
//!   runs onboard.
//! - [`hand`]: per-segment orientations to hand joint angles.
//! - [`sim`]: the virtual firmware driving the polling loop, timing
//!   jitter, battery discharge, and datagram emission.
//! - [`driver`]: the host-side receiver with loss/rate statistics and
//!   session recording/replay.
//! - [`eval`]: the drift/autonomy/frequency evaluation protocol.
//! - [`config`]: the single JSON run configuration shared by all of it.

pub mod config;
pub mod driver;
pub mod eval;
pub mod fusion;
pub mod hand;
pub mod imu;
pub mod quat;
pub mod sim;
pub mod topology;
pub mod wire;

pub use config::RunConfig;
pub use quat::{Quaternion, Vec3};
