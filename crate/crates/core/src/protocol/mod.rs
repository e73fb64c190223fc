//! Framed serial protocol between a host and the hand's controller board.
//!
//! Wire format, all multi-byte fields little-endian:
//!
//! ```text
//! AA | len | cmd | actuator | payload (0..=32) | crc
//! ```
//!
//! `len` counts the actuator byte plus the payload. The CRC-8 (polynomial
//! 0x07, init 0) covers `len` through the end of the payload.

mod bus;
mod command;
mod crc;
mod device;
mod frame;

pub use bus::{frame_loss_probability, BusConfig, DuplexBus, SimulatedBus};
pub use command::{
    cmd, ActuatorId, Command, NakReason, Request, Response, TelemetryPayload, CURVATURE_SCALE,
    PRESSURE_SCALE,
};
pub use crc::crc8;
pub use device::{HandFirmware, HostClient, HostStats, RetryPolicy};
pub use frame::{
    decode_frame, encode_frame, Decoded, Decoder, DecoderStats, Frame, MAX_PAYLOAD, SYNC,
};
