use super::bus::DuplexBus;
use super::command::{cmd, ActuatorId, Command, NakReason, Request, Response, TelemetryPayload};
use super::frame::{encode_frame, Decoder, Frame};
use crate::controller::{FsmMode, HandController, TargetKind};
use crate::error::Result;
use crate::physics::ValvePair;
use crate::sensors::SensorFrame;

/// Controller board firmware: parses host commands, drives the state
/// machines and streams telemetry.
#[derive(Debug, Clone)]
pub struct HandFirmware {
    decoder: Decoder,
    pub controller: HandController,
    stream_period: f64,
    streaming: Vec<bool>,
    next_stream_t: f64,
    latest: Vec<SensorFrame>,
}

impl HandFirmware {
    pub fn new(controller: HandController) -> Self {
        let n = controller.len();
        Self {
            decoder: Decoder::new(),
            controller,
            stream_period: 0.0,
            streaming: vec![false; n],
            next_stream_t: 0.0,
            latest: Vec::new(),
        }
    }

    pub fn decoder(&self) -> &Decoder {
        &self.decoder
    }

    /// Consume bytes from the host and return the response bytes.
    pub fn receive(&mut self, bytes: &[u8], t: f64) -> Vec<u8> {
        let frames = self.decoder.push(bytes);
        let mut out = Vec::new();
        for frame in frames {
            for r in self.handle(&frame, t) {
                // responses are always well-formed
                out.extend(encode_frame(&r.to_frame()).expect("valid response frame"));
            }
        }
        out
    }

    fn handle(&mut self, frame: &Frame, t: f64) -> Vec<Response> {
        let nak = |reason| {
            vec![Response::Nak {
                actuator: frame.actuator,
                cmd: frame.cmd,
                reason,
            }]
        };
        let req = match Request::from_frame(frame) {
            Ok(r) => r,
            Err(reason) => return nak(reason),
        };
        let n = self.controller.len();
        if let ActuatorId::One(i) = req.actuator {
            if i as usize >= n {
                return nak(NakReason::BadActuator);
            }
        }
        let addressed: Vec<usize> = (0..n).filter(|&i| req.actuator.addresses(i)).collect();
        let ack = vec![Response::Ack {
            actuator: frame.actuator,
            cmd: frame.cmd,
        }];
        let set = |fw: &mut Self, kind: TargetKind, value: f64| {
            let Ok(target) = fw.controller.config.target(kind, value) else {
                return nak(NakReason::OutOfRange);
            };
            let mut faulted = false;
            for &i in &addressed {
                let fsm = &mut fw.controller.fsms[i];
                faulted |= fsm.mode == FsmMode::Fault;
                fsm.set_target(target, t);
            }
            if faulted {
                nak(NakReason::Faulted)
            } else {
                ack.clone()
            }
        };
        match req.command {
            Command::SetPressureTarget(p) => set(self, TargetKind::Pressure, p),
            Command::SetCurvatureTarget(k) => set(self, TargetKind::Curvature, k),
            Command::Vent => {
                let r = set(self, TargetKind::Pressure, 0.0);
                // a faulted actuator is already venting
                if matches!(
                    r[0],
                    Response::Nak {
                        reason: NakReason::Faulted,
                        ..
                    }
                ) {
                    ack
                } else {
                    r
                }
            }
            Command::Stop => {
                for &i in &addressed {
                    self.controller.fsms[i].stop(t);
                }
                ack
            }
            Command::ResetFault => {
                for &i in &addressed {
                    self.controller.fsms[i].reset_fault(t);
                }
                ack
            }
            Command::GetState => addressed.iter().map(|&i| self.telemetry(i, t)).collect(),
            Command::StreamStart(ms) => {
                self.stream_period = ms as f64 / 1000.0;
                self.next_stream_t = t;
                for &i in &addressed {
                    self.streaming[i] = true;
                }
                ack
            }
            Command::StreamStop => {
                for &i in &addressed {
                    self.streaming[i] = false;
                }
                ack
            }
        }
    }

    fn telemetry(&self, i: usize, t: f64) -> Response {
        let (pressure_counts, strain_counts) = self
            .latest
            .get(i)
            .map(|f| (f.pressure_counts, f.strain_counts))
            .unwrap_or((0, 0));
        Response::Telemetry {
            actuator: i as u8,
            data: TelemetryPayload {
                t_ms: (t * 1000.0).round().clamp(0.0, u32::MAX as f64) as u32,
                pressure_counts,
                strain_counts,
                mode: self.controller.fsms[i].mode.code(),
            },
        }
    }

    /// One control period: returns valve commands and streamed telemetry bytes.
    pub fn tick(&mut self, frames: &[SensorFrame], t: f64) -> Result<(Vec<ValvePair>, Vec<u8>)> {
        let valves = self.controller.tick(frames, t)?;
        self.latest = frames.to_vec();
        let mut out = Vec::new();
        if self.stream_period > 0.0 && t + 1e-9 >= self.next_stream_t {
            for i in (0..self.streaming.len()).filter(|&i| self.streaming[i]) {
                out.extend(
                    encode_frame(&self.telemetry(i, t).to_frame()).expect("valid telemetry"),
                );
            }
            while self.next_stream_t <= t + 1e-9 {
                self.next_stream_t += self.stream_period;
            }
        }
        Ok((valves, out))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Time to wait for a reply before resending, s.
    pub timeout: f64,
    /// Total transmissions per command, first one included.
    pub max_attempts: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            timeout: 0.02,
            max_attempts: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HostStats {
    pub sent: u64,
    pub retries: u64,
    pub acked: u64,
    pub naked: u64,
    pub failed: u64,
    pub telemetry: u64,
}

#[derive(Debug, Clone)]
struct Pending {
    request: Request,
    bytes: Vec<u8>,
    sent_t: f64,
    attempts: u32,
}

/// Host side: sends commands and resends them until acknowledged. Every
/// command is an absolute setting, so a duplicate delivery is harmless.
#[derive(Debug, Clone, Default)]
pub struct HostClient {
    decoder: Decoder,
    pub policy: RetryPolicy,
    pending: Vec<Pending>,
    pub stats: HostStats,
    pub telemetry: Vec<(u8, TelemetryPayload)>,
    pub naks: Vec<Response>,
}

impl HostClient {
    pub fn new(policy: RetryPolicy) -> Self {
        Self {
            policy,
            ..Default::default()
        }
    }

    pub fn decoder(&self) -> &Decoder {
        &self.decoder
    }

    /// Commands still awaiting a reply.
    pub fn outstanding(&self) -> usize {
        self.pending.len()
    }

    pub fn send(&mut self, request: Request, bus: &mut DuplexBus, t: f64) -> Result<()> {
        let bytes = encode_frame(&request.to_frame()?)?;
        let code = request.command.code();
        // a newer setting supersedes one still in flight
        self.pending.retain(|p| {
            !(p.request.command.code() == code && p.request.actuator == request.actuator)
        });
        bus.to_device.write(&bytes, t);
        self.stats.sent += 1;
        self.pending.push(Pending {
            request,
            bytes,
            sent_t: t,
            attempts: 1,
        });
        Ok(())
    }

    fn settle(&mut self, actuator: u8, code: u8) -> bool {
        let before = self.pending.len();
        self.pending.retain(|p| {
            let a = p.request.actuator;
            let same_target =
                a.byte() == actuator || (a == ActuatorId::Broadcast && code == cmd::GET_STATE);
            !(p.request.command.code() == code && same_target)
        });
        self.pending.len() != before
    }

    /// Read replies, then resend anything that timed out.
    pub fn poll(&mut self, bus: &mut DuplexBus, t: f64) -> Vec<Response> {
        let bytes = bus.to_host.read(t);
        let responses: Vec<Response> = self
            .decoder
            .push(&bytes)
            .iter()
            .filter_map(Response::from_frame)
            .collect();
        for r in &responses {
            match *r {
                Response::Ack { actuator, cmd } => {
                    if self.settle(actuator, cmd) {
                        self.stats.acked += 1;
                    }
                }
                Response::Nak { actuator, cmd, .. } => {
                    self.settle(actuator, cmd);
                    self.stats.naked += 1;
                    self.naks.push(*r);
                }
                Response::Telemetry { actuator, data } => {
                    if self.settle(actuator, cmd::GET_STATE) {
                        self.stats.acked += 1;
                    }
                    self.stats.telemetry += 1;
                    self.telemetry.push((actuator, data));
                }
            }
        }
        let policy = self.policy;
        let mut failed = 0;
        let mut resent = 0;
        self.pending.retain_mut(|p| {
            if t - p.sent_t + 1e-12 < policy.timeout {
                return true;
            }
            if p.attempts >= policy.max_attempts {
                failed += 1;
                return false;
            }
            bus.to_device.write(&p.bytes, t);
            p.sent_t = t;
            p.attempts += 1;
            resent += 1;
            true
        });
        self.stats.failed += failed;
        self.stats.retries += resent;
        self.stats.sent += resent;
        responses
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::CalibrationRecord;
    use crate::controller::ControllerConfig;
    use crate::physics::ActuatorParams;
    use crate::protocol::bus::BusConfig;
    use crate::sensors::SensorSuite;

    fn firmware(n: usize) -> HandFirmware {
        let cal = CalibrationRecord::nominal(&ActuatorParams::default(), &SensorSuite::default());
        HandFirmware::new(HandController::new(ControllerConfig::default(), vec![cal; n]).unwrap())
    }

    fn exchange(fw: &mut HandFirmware, req: Request) -> Vec<Response> {
        let bytes = encode_frame(&req.to_frame().unwrap()).unwrap();
        let out = fw.receive(&bytes, 0.0);
        Decoder::new()
            .push(&out)
            .iter()
            .filter_map(Response::from_frame)
            .collect()
    }

    #[test]
    fn set_target_is_acked_and_applied() {
        let mut fw = firmware(3);
        let r = exchange(
            &mut fw,
            Request::new(ActuatorId::One(1), Command::SetPressureTarget(40_000.0)),
        );
        assert_eq!(
            r,
            vec![Response::Ack {
                actuator: 1,
                cmd: cmd::SET_PRESSURE_TARGET
            }]
        );
        assert_eq!(fw.controller.fsms[1].target.unwrap().value, 40_000.0);
        assert!(fw.controller.fsms[0].target.is_none());
    }

    #[test]
    fn replay_leaves_target_unchanged() {
        let mut fw = firmware(3);
        let req = Request::new(ActuatorId::Broadcast, Command::SetPressureTarget(50_000.0));
        exchange(&mut fw, req);
        let before = fw.controller.fsms.clone();
        exchange(&mut fw, req);
        assert_eq!(fw.controller.fsms, before);
    }

    #[test]
    fn bad_requests_are_naked() {
        let mut fw = firmware(3);
        let r = exchange(&mut fw, Request::new(ActuatorId::One(4), Command::Stop));
        assert!(matches!(
            r[0],
            Response::Nak {
                reason: NakReason::BadActuator,
                ..
            }
        ));
        let r = exchange(
            &mut fw,
            Request::new(ActuatorId::One(0), Command::SetPressureTarget(400_000.0)),
        );
        assert!(matches!(
            r[0],
            Response::Nak {
                reason: NakReason::OutOfRange,
                ..
            }
        ));
        let bytes = encode_frame(&Frame::new(0x33, 0, vec![])).unwrap();
        let out = fw.receive(&bytes, 0.0);
        let r: Vec<_> = Decoder::new()
            .push(&out)
            .iter()
            .filter_map(Response::from_frame)
            .collect();
        assert_eq!(
            r,
            vec![Response::Nak {
                actuator: 0,
                cmd: 0x33,
                reason: NakReason::UnknownCommand
            }]
        );
    }

    #[test]
    fn broadcast_get_state_reports_every_actuator() {
        let mut fw = firmware(3);
        let r = exchange(
            &mut fw,
            Request::new(ActuatorId::Broadcast, Command::GetState),
        );
        assert_eq!(r.len(), 3);
    }

    #[test]
    fn host_retries_until_acked() {
        let cfg = BusConfig {
            loss_rate: 0.5,
            seed: 3,
            ..Default::default()
        };
        let mut bus = DuplexBus::new(cfg).unwrap();
        let mut fw = firmware(3);
        let mut host = HostClient::new(RetryPolicy::default());
        host.send(
            Request::new(ActuatorId::One(2), Command::SetPressureTarget(30_000.0)),
            &mut bus,
            0.0,
        )
        .unwrap();
        let mut t = 0.0;
        while host.outstanding() > 0 && t < 5.0 {
            t += 0.005;
            let inbound = bus.to_device.read(t);
            let out = fw.receive(&inbound, t);
            bus.to_host.write(&out, t);
            host.poll(&mut bus, t);
        }
        assert_eq!(host.outstanding(), 0);
        assert_eq!(host.stats.failed, 0);
        assert_eq!(fw.controller.fsms[2].target.unwrap().value, 30_000.0);
    }
}
