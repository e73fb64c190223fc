use super::frame::{Frame, BROADCAST_ID, MAX_ACTUATOR_ID};
use crate::controller::FsmMode;
use crate::error::{Error, Result};

/// Command codes.
pub mod cmd {
    pub const SET_PRESSURE_TARGET: u8 = 0x01;
    pub const SET_CURVATURE_TARGET: u8 = 0x02;
    pub const STOP: u8 = 0x03;
    pub const VENT: u8 = 0x04;
    pub const GET_STATE: u8 = 0x05;
    pub const STREAM_START: u8 = 0x06;
    pub const STREAM_STOP: u8 = 0x07;
    pub const RESET_FAULT: u8 = 0x08;
    /// Negative acknowledgement; payload is the rejected code and a reason.
    pub const NAK: u8 = 0x7F;
    /// Acknowledgements echo the command code with this bit set.
    pub const ACK_BIT: u8 = 0x80;
    pub const TELEMETRY: u8 = 0x85;
}

/// Pa per wire unit.
pub const PRESSURE_SCALE: f64 = 10.0;
/// 1/m per wire unit.
pub const CURVATURE_SCALE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActuatorId {
    One(u8),
    Broadcast,
}

impl ActuatorId {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            BROADCAST_ID => Some(ActuatorId::Broadcast),
            b if b <= MAX_ACTUATOR_ID => Some(ActuatorId::One(b)),
            _ => None,
        }
    }

    pub fn byte(self) -> u8 {
        match self {
            ActuatorId::One(b) => b,
            ActuatorId::Broadcast => BROADCAST_ID,
        }
    }

    pub fn addresses(self, index: usize) -> bool {
        match self {
            ActuatorId::One(b) => b as usize == index,
            ActuatorId::Broadcast => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Command {
    /// Pa, carried as u16 tens of Pa.
    SetPressureTarget(f64),
    /// 1/m, carried as u16 hundredths.
    SetCurvatureTarget(f64),
    Stop,
    Vent,
    GetState,
    /// Telemetry period in ms.
    StreamStart(u8),
    StreamStop,
    ResetFault,
}

impl Command {
    pub fn code(&self) -> u8 {
        match self {
            Command::SetPressureTarget(_) => cmd::SET_PRESSURE_TARGET,
            Command::SetCurvatureTarget(_) => cmd::SET_CURVATURE_TARGET,
            Command::Stop => cmd::STOP,
            Command::Vent => cmd::VENT,
            Command::GetState => cmd::GET_STATE,
            Command::StreamStart(_) => cmd::STREAM_START,
            Command::StreamStop => cmd::STREAM_STOP,
            Command::ResetFault => cmd::RESET_FAULT,
        }
    }
}

fn scaled_u16(value: f64, scale: f64, what: &str) -> Result<[u8; 2]> {
    let units = (value / scale).round();
    if !(0.0..=u16::MAX as f64).contains(&units) {
        return Err(Error::Encode(format!(
            "{what} {value} does not fit the wire range"
        )));
    }
    Ok((units as u16).to_le_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum NakReason {
    UnknownCommand = 1,
    BadPayload = 2,
    BadActuator = 3,
    OutOfRange = 4,
    Faulted = 5,
}

impl NakReason {
    pub fn from_byte(b: u8) -> Option<Self> {
        Some(match b {
            1 => NakReason::UnknownCommand,
            2 => NakReason::BadPayload,
            3 => NakReason::BadActuator,
            4 => NakReason::OutOfRange,
            5 => NakReason::Faulted,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Request {
    pub actuator: ActuatorId,
    pub command: Command,
}

impl Request {
    pub fn new(actuator: ActuatorId, command: Command) -> Self {
        Self { actuator, command }
    }

    pub fn to_frame(&self) -> Result<Frame> {
        let payload = match self.command {
            Command::SetPressureTarget(p) => scaled_u16(p, PRESSURE_SCALE, "pressure")?.to_vec(),
            Command::SetCurvatureTarget(k) => scaled_u16(k, CURVATURE_SCALE, "curvature")?.to_vec(),
            Command::StreamStart(ms) => vec![ms],
            _ => Vec::new(),
        };
        Ok(Frame::new(
            self.command.code(),
            self.actuator.byte(),
            payload,
        ))
    }

    pub fn from_frame(frame: &Frame) -> std::result::Result<Self, NakReason> {
        let actuator = ActuatorId::from_byte(frame.actuator).ok_or(NakReason::BadActuator)?;
        let p = &frame.payload;
        let u16_payload = || -> std::result::Result<f64, NakReason> {
            match p.as_slice() {
                [lo, hi] => Ok(u16::from_le_bytes([*lo, *hi]) as f64),
                _ => Err(NakReason::BadPayload),
            }
        };
        let empty = || {
            if p.is_empty() {
                Ok(())
            } else {
                Err(NakReason::BadPayload)
            }
        };
        let command = match frame.cmd {
            cmd::SET_PRESSURE_TARGET => Command::SetPressureTarget(u16_payload()? * PRESSURE_SCALE),
            cmd::SET_CURVATURE_TARGET => {
                Command::SetCurvatureTarget(u16_payload()? * CURVATURE_SCALE)
            }
            cmd::STOP => empty().map(|_| Command::Stop)?,
            cmd::VENT => empty().map(|_| Command::Vent)?,
            cmd::GET_STATE => empty().map(|_| Command::GetState)?,
            cmd::STREAM_START => match p.as_slice() {
                [ms] if *ms > 0 => Command::StreamStart(*ms),
                _ => return Err(NakReason::BadPayload),
            },
            cmd::STREAM_STOP => empty().map(|_| Command::StreamStop)?,
            cmd::RESET_FAULT => empty().map(|_| Command::ResetFault)?,
            _ => return Err(NakReason::UnknownCommand),
        };
        Ok(Request { actuator, command })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TelemetryPayload {
    pub t_ms: u32,
    pub pressure_counts: u16,
    pub strain_counts: u16,
    pub mode: u8,
}

impl TelemetryPayload {
    pub const LEN: usize = 9;

    pub fn to_bytes(&self) -> [u8; Self::LEN] {
        let mut b = [0u8; Self::LEN];
        b[0..4].copy_from_slice(&self.t_ms.to_le_bytes());
        b[4..6].copy_from_slice(&self.pressure_counts.to_le_bytes());
        b[6..8].copy_from_slice(&self.strain_counts.to_le_bytes());
        b[8] = self.mode;
        b
    }

    pub fn from_bytes(b: &[u8]) -> Option<Self> {
        if b.len() != Self::LEN {
            return None;
        }
        Some(Self {
            t_ms: u32::from_le_bytes([b[0], b[1], b[2], b[3]]),
            pressure_counts: u16::from_le_bytes([b[4], b[5]]),
            strain_counts: u16::from_le_bytes([b[6], b[7]]),
            mode: b[8],
        })
    }

    pub fn fsm_mode(&self) -> Option<FsmMode> {
        FsmMode::from_code(self.mode)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Response {
    Ack {
        actuator: u8,
        cmd: u8,
    },
    Nak {
        actuator: u8,
        cmd: u8,
        reason: NakReason,
    },
    Telemetry {
        actuator: u8,
        data: TelemetryPayload,
    },
}

impl Response {
    pub fn to_frame(&self) -> Frame {
        match *self {
            Response::Ack { actuator, cmd } => Frame::new(cmd::ACK_BIT | cmd, actuator, vec![]),
            Response::Nak {
                actuator,
                cmd,
                reason,
            } => Frame::new(cmd::NAK, actuator, vec![cmd, reason as u8]),
            Response::Telemetry { actuator, data } => {
                Frame::new(cmd::TELEMETRY, actuator, data.to_bytes().to_vec())
            }
        }
    }

    pub fn from_frame(frame: &Frame) -> Option<Self> {
        let actuator = frame.actuator;
        match (frame.cmd, frame.payload.as_slice()) {
            (cmd::TELEMETRY, p) => {
                TelemetryPayload::from_bytes(p).map(|data| Response::Telemetry { actuator, data })
            }
            (cmd::NAK, [c, r]) => NakReason::from_byte(*r).map(|reason| Response::Nak {
                actuator,
                cmd: *c,
                reason,
            }),
            (c, []) if c & cmd::ACK_BIT != 0 => Some(Response::Ack {
                actuator,
                cmd: c & !cmd::ACK_BIT,
            }),
            _ => None,
        }
    }
}
