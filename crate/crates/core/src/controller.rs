//! Per-actuator bang-bang servo.
//!
//! Each actuator runs a small state machine that opens the inlet or the
//! vent until the measured pressure or curvature is within a deadband of
//! its target, then closes both valves and holds. A held actuator only
//! re-engages once the measurement leaves a band twice as wide, so noise
//! within the deadband never toggles a valve.
//!
//! Failures are states, not errors: overpressure or a target not reached
//! within the timeout latch `Fault`, which vents until reset.

use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationRecord;
use crate::error::{Error, Result};
use crate::physics::ValvePair;
use crate::sensors::{counts_to_physical, SensorFrame};
use crate::units::PSI;

/// Maximum number of actuators one controller board drives.
pub const MAX_ACTUATORS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Pressure,
    Curvature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlTarget {
    pub kind: TargetKind,
    /// Pa or 1/m.
    pub value: f64,
    /// Acceptance half-width, same units as `value`.
    pub deadband: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FsmMode {
    Idle,
    Inflating,
    Venting,
    Holding,
    Fault,
}

impl FsmMode {
    pub fn code(self) -> u8 {
        match self {
            FsmMode::Idle => 0,
            FsmMode::Inflating => 1,
            FsmMode::Venting => 2,
            FsmMode::Holding => 3,
            FsmMode::Fault => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => FsmMode::Idle,
            1 => FsmMode::Inflating,
            2 => FsmMode::Venting,
            3 => FsmMode::Holding,
            4 => FsmMode::Fault,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FsmMode::Idle => "idle",
            FsmMode::Inflating => "inflating",
            FsmMode::Venting => "venting",
            FsmMode::Holding => "holding",
            FsmMode::Fault => "fault",
        }
    }
}

impl std::fmt::Display for FsmMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    #[serde(rename = "pressure_deadband_pa")]
    pub pressure_deadband: f64,
    #[serde(rename = "curvature_deadband_per_m")]
    pub curvature_deadband: f64,
    /// Holding re-engages outside `reengage_factor * deadband`.
    pub reengage_factor: f64,
    #[serde(rename = "timeout_s")]
    pub timeout: f64,
    #[serde(rename = "tick_period_s")]
    pub tick_period: f64,
    /// Overpressure limit, Pa.
    #[serde(rename = "p_max_pa")]
    pub p_max: f64,
    /// Largest admissible curvature target, 1/m.
    #[serde(rename = "kappa_max_per_m")]
    pub kappa_max: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            pressure_deadband: 0.15 * PSI,
            curvature_deadband: 0.3,
            reengage_factor: 2.0,
            timeout: 10.0,
            tick_period: 0.005,
            p_max: 15.0 * PSI,
            kappa_max: 200.0,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pressure_deadband > 0.0) || !(self.curvature_deadband > 0.0) {
            return Err(Error::Config("deadbands must be positive".into()));
        }
        if !(self.reengage_factor >= 1.0) {
            return Err(Error::Config("reengage_factor must be at least 1".into()));
        }
        if !(self.timeout > 0.0) || !(self.tick_period > 0.0) {
            return Err(Error::Config(
                "timeout and tick period must be positive".into(),
            ));
        }
        if !(self.p_max > 0.0) || !(self.kappa_max > 0.0) {
            return Err(Error::Config("p_max and kappa_max must be positive".into()));
        }
        Ok(())
    }

    /// Build a target with the configured deadband, rejecting values
    /// outside `[0, p_max]` or `[0, kappa_max]`.
    pub fn target(&self, kind: TargetKind, value: f64) -> Result<ControlTarget> {
        let (max, deadband) = match kind {
            TargetKind::Pressure => (self.p_max, self.pressure_deadband),
            TargetKind::Curvature => (self.kappa_max, self.curvature_deadband),
        };
        if !(0.0..=max).contains(&value) {
            return Err(Error::domain(format!(
                "{kind:?} target {value} outside [0, {max}]"
            )));
        }
        Ok(ControlTarget {
            kind,
            value,
            deadband,
        })
    }
}

/// Physical measurements seen by the controller.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Measurement {
    pub pressure: f64,
    pub curvature: f64,
}

impl Measurement {
    fn along(&self, kind: TargetKind) -> f64 {
        match kind {
            TargetKind::Pressure => self.pressure,
            TargetKind::Curvature => self.curvature,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FsmState {
    pub mode: FsmMode,
    pub target: Option<ControlTarget>,
    pub last_transition_t: f64,
    /// Start of the current approach to the target, for the timeout.
    pub seek_started_t: f64,
}

impl Default for FsmState {
    fn default() -> Self {
        Self {
            mode: FsmMode::Idle,
            target: None,
            last_transition_t: 0.0,
            seek_started_t: 0.0,
        }
    }
}

impl FsmState {
    /// Accept a new absolute target. Re-sending the current target is a
    /// no-op, which makes retried commands safe. Ignored while faulted.
    pub fn set_target(&mut self, target: ControlTarget, t: f64) {
        if self.mode == FsmMode::Fault || self.target == Some(target) {
            return;
        }
        self.target = Some(target);
        self.seek_started_t = t;
        if self.mode != FsmMode::Inflating && self.mode != FsmMode::Venting {
            // direction is settled on the next tick
            self.mode = FsmMode::Inflating;
            self.last_transition_t = t;
        }
    }

    /// Drop the target and close both valves.
    pub fn stop(&mut self, t: f64) {
        if self.mode == FsmMode::Fault {
            return;
        }
        self.target = None;
        if self.mode != FsmMode::Idle {
            self.mode = FsmMode::Idle;
            self.last_transition_t = t;
        }
    }

    pub fn reset_fault(&mut self, t: f64) {
        if self.mode == FsmMode::Fault {
            self.mode = FsmMode::Idle;
            self.target = None;
            self.last_transition_t = t;
        }
    }
}

fn valves_for(mode: FsmMode) -> ValvePair {
    match mode {
        FsmMode::Inflating => ValvePair {
            inlet: true,
            vent: false,
        },
        FsmMode::Venting | FsmMode::Fault => ValvePair {
            inlet: false,
            vent: true,
        },
        FsmMode::Idle | FsmMode::Holding => ValvePair::CLOSED,
    }
}

/// One controller tick: a pure function of state, measurement and time.
pub fn fsm_tick(
    fsm: &FsmState,
    measured: &Measurement,
    t: f64,
    cfg: &ControllerConfig,
) -> (FsmState, ValvePair) {
    let mut next = *fsm;
    let transition = |next: &mut FsmState, mode: FsmMode| {
        if next.mode != mode {
            next.mode = mode;
            next.last_transition_t = t;
        }
    };

    let sane = measured.pressure.is_finite() && measured.curvature.is_finite() && t.is_finite();
    if !sane || measured.pressure > cfg.p_max {
        transition(&mut next, FsmMode::Fault);
        return (next, valves_for(FsmMode::Fault));
    }

    match (next.mode, next.target) {
        (FsmMode::Fault, _) => {}
        (_, None) => transition(&mut next, FsmMode::Idle),
        (FsmMode::Idle, Some(_)) => {
            // a target with an idle machine only comes from direct mutation
            next.seek_started_t = t;
            transition(&mut next, FsmMode::Inflating);
            return fsm_tick(&next, measured, t, cfg);
        }
        (FsmMode::Holding, Some(target)) => {
            let error = measured.along(target.kind) - target.value;
            if error.abs() > cfg.reengage_factor * target.deadband {
                next.seek_started_t = t;
                let mode = if error < 0.0 {
                    FsmMode::Inflating
                } else {
                    FsmMode::Venting
                };
                transition(&mut next, mode);
            }
        }
        (_, Some(target)) if target.kind == TargetKind::Pressure && target.value <= 0.0 => {
            // venting to atmosphere has nothing to overshoot, keep the valve open
            transition(&mut next, FsmMode::Venting);
        }
        (FsmMode::Inflating | FsmMode::Venting, Some(target)) => {
            let error = measured.along(target.kind) - target.value;
            if error.abs() <= target.deadband {
                transition(&mut next, FsmMode::Holding);
            } else if t - next.seek_started_t > cfg.timeout {
                transition(&mut next, FsmMode::Fault);
            } else if error < 0.0 {
                transition(&mut next, FsmMode::Inflating);
            } else {
                transition(&mut next, FsmMode::Venting);
            }
        }
    }
    (next, valves_for(next.mode))
}

/// Tick every actuator of a board in index order.
pub fn hand_controller_tick(
    fsms: &[FsmState],
    measurements: &[Measurement],
    t: f64,
    cfg: &ControllerConfig,
) -> Result<(Vec<FsmState>, Vec<ValvePair>)> {
    if fsms.len() > MAX_ACTUATORS {
        return Err(Error::Config(format!(
            "{} actuators configured, a board drives at most {MAX_ACTUATORS}",
            fsms.len()
        )));
    }
    if fsms.len() != measurements.len() {
        return Err(Error::Config(format!(
            "{} state machines but {} measurements",
            fsms.len(),
            measurements.len()
        )));
    }
    Ok(fsms
        .iter()
        .zip(measurements)
        .map(|(f, m)| fsm_tick(f, m, t, cfg))
        .unzip())
}

/// The board-level controller: state machines plus the calibration used to
/// turn raw frames into physical measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct HandController {
    pub config: ControllerConfig,
    pub fsms: Vec<FsmState>,
    pub calibrations: Vec<CalibrationRecord>,
}

impl HandController {
    pub fn new(config: ControllerConfig, calibrations: Vec<CalibrationRecord>) -> Result<Self> {
        config.validate()?;
        if calibrations.len() > MAX_ACTUATORS {
            return Err(Error::Config(format!(
                "{} actuators configured, a board drives at most {MAX_ACTUATORS}",
                calibrations.len()
            )));
        }
        Ok(Self {
            config,
            fsms: vec![FsmState::default(); calibrations.len()],
            calibrations,
        })
    }

    pub fn len(&self) -> usize {
        self.fsms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fsms.is_empty()
    }

    pub fn measure(&self, frames: &[SensorFrame]) -> Vec<Measurement> {
        frames
            .iter()
            .zip(&self.calibrations)
            .map(|(f, cal)| {
                let r = counts_to_physical(f, cal);
                Measurement {
                    pressure: r.pressure,
                    curvature: r.curvature,
                }
            })
            .collect()
    }

    pub fn tick(&mut self, frames: &[SensorFrame], t: f64) -> Result<Vec<ValvePair>> {
        let measurements = self.measure(frames);
        let (fsms, valves) = hand_controller_tick(&self.fsms, &measurements, t, &self.config)?;
        self.fsms = fsms;
        Ok(valves)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ControllerConfig {
        ControllerConfig::default()
    }

    fn pressure(p: f64) -> Measurement {
        Measurement {
            pressure: p,
            curvature: 0.0,
        }
    }

    fn seeking(value: f64) -> FsmState {
        let mut f = FsmState::default();
        f.set_target(cfg().target(TargetKind::Pressure, value).unwrap(), 0.0);
        f
    }

    #[test]
    fn within_deadband_holds() {
        let (f, v) = fsm_tick(&seeking(40_000.0), &pressure(40_500.0), 0.005, &cfg());
        assert_eq!(f.mode, FsmMode::Holding);
        assert_eq!(v, ValvePair::CLOSED);
    }

    #[test]
    fn below_target_inflates_above_vents() {
        let (f, v) = fsm_tick(&seeking(40_000.0), &pressure(10_000.0), 0.005, &cfg());
        assert_eq!(f.mode, FsmMode::Inflating);
        assert!(v.inlet && !v.vent);
        let (f, v) = fsm_tick(&seeking(40_000.0), &pressure(60_000.0), 0.005, &cfg());
        assert_eq!(f.mode, FsmMode::Venting);
        assert!(!v.inlet && v.vent);
    }

    #[test]
    fn holding_reengages_only_outside_wide_band() {
        let c = cfg();
        let (held, _) = fsm_tick(&seeking(40_000.0), &pressure(40_000.0), 0.0, &c);
        let (f, _) = fsm_tick(
            &held,
            &pressure(40_000.0 - 1.5 * c.pressure_deadband),
            0.1,
            &c,
        );
        assert_eq!(f.mode, FsmMode::Holding);
        let (f, v) = fsm_tick(
            &held,
            &pressure(40_000.0 - 2.5 * c.pressure_deadband),
            0.1,
            &c,
        );
        assert_eq!(f.mode, FsmMode::Inflating);
        assert!(v.inlet);
    }

    #[test]
    fn overpressure_faults_immediately() {
        let c = cfg();
        let (f, v) = fsm_tick(&FsmState::default(), &pressure(c.p_max + 1.0), 0.0, &c);
        assert_eq!(f.mode, FsmMode::Fault);
        assert!(v.vent && !v.inlet);
        // absorbing
        let (f, v) = fsm_tick(&f, &pressure(0.0), 1.0, &c);
        assert_eq!(f.mode, FsmMode::Fault);
        assert!(v.vent);
        let mut g = f;
        g.set_target(c.target(TargetKind::Pressure, 1000.0).unwrap(), 1.0);
        assert_eq!(g.mode, FsmMode::Fault);
        g.reset_fault(2.0);
        assert_eq!(g.mode, FsmMode::Idle);
    }

    #[test]
    fn timeout_faults() {
        let c = cfg();
        let f = seeking(50_000.0);
        let (f, _) = fsm_tick(&f, &pressure(0.0), 9.9, &c);
        assert_eq!(f.mode, FsmMode::Inflating);
        let (f, v) = fsm_tick(&f, &pressure(0.0), 10.01, &c);
        assert_eq!(f.mode, FsmMode::Fault);
        assert!(v.vent);
    }

    #[test]
    fn nan_measurement_faults() {
        let (f, _) = fsm_tick(&seeking(1.0), &pressure(f64::NAN), 0.0, &cfg());
        assert_eq!(f.mode, FsmMode::Fault);
    }

    #[test]
    fn replayed_target_is_idempotent() {
        let c = cfg();
        let target = c.target(TargetKind::Pressure, 40_000.0).unwrap();
        let mut f = FsmState::default();
        f.set_target(target, 0.0);
        let (mut f, _) = fsm_tick(&f, &pressure(40_000.0), 0.005, &c);
        let before = f;
        f.set_target(target, 3.0);
        assert_eq!(f, before);
    }

    #[test]
    fn all_idle_close_everything() {
        let fsms = vec![FsmState::default(); 6];
        let m = vec![Measurement::default(); 6];
        let (_, valves) = hand_controller_tick(&fsms, &m, 0.0, &cfg()).unwrap();
        assert!(valves.iter().all(|v| *v == ValvePair::CLOSED));
    }

    #[test]
    fn too_many_actuators() {
        let fsms = vec![FsmState::default(); 7];
        let m = vec![Measurement::default(); 7];
        assert!(matches!(
            hand_controller_tick(&fsms, &m, 0.0, &cfg()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn target_range_checked() {
        let c = cfg();
        assert!(c.target(TargetKind::Pressure, -1.0).is_err());
        assert!(c.target(TargetKind::Pressure, c.p_max * 1.01).is_err());
        assert!(c.target(TargetKind::Curvature, 500.0).is_err());
        assert!(c.target(TargetKind::Curvature, 20.0).is_ok());
    }

    #[test]
    fn mode_codes_round_trip() {
        for m in [
            FsmMode::Idle,
            FsmMode::Inflating,
            FsmMode::Venting,
            FsmMode::Holding,
            FsmMode::Fault,
        ] {
            assert_eq!(FsmMode::from_code(m.code()), Some(m));
        }
        assert_eq!(FsmMode::from_code(9), None);
    }
}
