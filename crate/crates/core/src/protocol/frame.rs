use super::crc::crc8;
use crate::error::{Error, Result};

pub const SYNC: u8 = 0xAA;
pub const MAX_PAYLOAD: usize = 32;
/// Highest addressable actuator; 0xFF broadcasts.
pub const MAX_ACTUATOR_ID: u8 = 5;
pub const BROADCAST_ID: u8 = 0xFF;

/// Bytes around `len` worth of body: sync, len, cmd and crc.
const OVERHEAD: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Frame {
    pub cmd: u8,
    pub actuator: u8,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(cmd: u8, actuator: u8, payload: Vec<u8>) -> Self {
        Self {
            cmd,
            actuator,
            payload,
        }
    }

    /// Size on the wire.
    pub fn wire_len(&self) -> usize {
        self.payload.len() + 1 + OVERHEAD
    }
}

fn valid_actuator(id: u8) -> bool {
    id <= MAX_ACTUATOR_ID || id == BROADCAST_ID
}

pub fn encode_frame(frame: &Frame) -> Result<Vec<u8>> {
    if frame.payload.len() > MAX_PAYLOAD {
        return Err(Error::Encode(format!(
            "payload of {} bytes exceeds {MAX_PAYLOAD}",
            frame.payload.len()
        )));
    }
    if !valid_actuator(frame.actuator) {
        return Err(Error::Encode(format!(
            "actuator id {:#04x} is neither 0..={MAX_ACTUATOR_ID} nor broadcast",
            frame.actuator
        )));
    }
    let mut out = Vec::with_capacity(frame.wire_len());
    out.push(SYNC);
    out.push((frame.payload.len() + 1) as u8);
    out.push(frame.cmd);
    out.push(frame.actuator);
    out.extend_from_slice(&frame.payload);
    out.push(crc8(&out[1..]));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResyncReason {
    BadSync,
    BadLength,
    BadActuator,
    CrcMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decoded {
    Frame(Frame),
    NeedMore,
    Resync(ResyncReason),
}

/// Try to parse one frame at `cursor`. Returns the outcome and the cursor
/// to continue from: past the frame, one byte on for a resync, unchanged
/// when more bytes are needed.
pub fn decode_frame(bytes: &[u8], cursor: usize) -> (Decoded, usize) {
    let rest = bytes.get(cursor..).unwrap_or(&[]);
    let Some(&first) = rest.first() else {
        return (Decoded::NeedMore, cursor);
    };
    if first != SYNC {
        return (Decoded::Resync(ResyncReason::BadSync), cursor + 1);
    }
    let Some(&len) = rest.get(1) else {
        return (Decoded::NeedMore, cursor);
    };
    let len = len as usize;
    if len == 0 || len > MAX_PAYLOAD + 1 {
        return (Decoded::Resync(ResyncReason::BadLength), cursor + 1);
    }
    if let Some(&id) = rest.get(3) {
        if !valid_actuator(id) {
            return (Decoded::Resync(ResyncReason::BadActuator), cursor + 1);
        }
    }
    let total = len + OVERHEAD;
    if rest.len() < total {
        return (Decoded::NeedMore, cursor);
    }
    if crc8(&rest[1..total - 1]) != rest[total - 1] {
        return (Decoded::Resync(ResyncReason::CrcMismatch), cursor + 1);
    }
    let frame = Frame {
        cmd: rest[2],
        actuator: rest[3],
        payload: rest[4..total - 1].to_vec(),
    };
    (Decoded::Frame(frame), cursor + total)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecoderStats {
    pub frames: u64,
    pub crc_errors: u64,
    /// Resynchronizations for any reason, CRC failures included.
    pub resyncs: u64,
    pub bytes_skipped: u64,
}

/// Incremental decoder over an arbitrary byte stream. Holds at most one
/// partial frame between calls.
#[derive(Debug, Clone, Default)]
pub struct Decoder {
    buf: Vec<u8>,
    stats: DecoderStats,
}

impl Decoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stats(&self) -> DecoderStats {
        self.stats
    }

    /// Bytes held waiting for the rest of a frame.
    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    pub fn push(&mut self, bytes: &[u8]) -> Vec<Frame> {
        let mut out = Vec::new();
        self.push_with(bytes, |f| out.push(f));
        out
    }

    pub fn push_with(&mut self, bytes: &[u8], mut on_frame: impl FnMut(Frame)) {
        self.buf.extend_from_slice(bytes);
        let mut cursor = 0;
        loop {
            match decode_frame(&self.buf, cursor) {
                (Decoded::Frame(f), next) => {
                    self.stats.frames += 1;
                    cursor = next;
                    on_frame(f);
                }
                (Decoded::NeedMore, _) => break,
                (Decoded::Resync(reason), next) => {
                    if reason != ResyncReason::BadSync {
                        self.stats.resyncs += 1;
                    }
                    if reason == ResyncReason::CrcMismatch {
                        self.stats.crc_errors += 1;
                    }
                    // jump straight to the next sync byte
                    let skip = self.buf[next..]
                        .iter()
                        .position(|&b| b == SYNC)
                        .unwrap_or(self.buf.len() - next);
                    self.stats.bytes_skipped += (next - cursor + skip) as u64;
                    cursor = next + skip;
                }
            }
        }
        self.buf.drain(..cursor);
    }
}
