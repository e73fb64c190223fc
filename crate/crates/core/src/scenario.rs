//! Scenario files: JSON with units in key names.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controller::{ControllerConfig, MAX_ACTUATORS};
use crate::error::{Error, Result};
use crate::physics::{ActuatorParams, PneumaticCircuit, RigidObject, MAX_DT};
use crate::protocol::{ActuatorId, BusConfig, Command, Request};
use crate::sensors::SensorSuite;
use crate::units::PSI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CircuitConfig {
    pub pump_pressure_pa: f64,
    pub supply_sharing: f64,
    pub atmosphere_offset_pa: f64,
}

impl Default for CircuitConfig {
    fn default() -> Self {
        let c = PneumaticCircuit::new(0);
        Self {
            pump_pressure_pa: c.pump_pressure,
            supply_sharing: c.supply_sharing,
            atmosphere_offset_pa: c.atmosphere_offset,
        }
    }
}

impl CircuitConfig {
    pub fn build(&self, actuators: usize) -> PneumaticCircuit {
        PneumaticCircuit {
            pump_pressure: self.pump_pressure_pa,
            supply_sharing: self.supply_sharing,
            atmosphere_offset: self.atmosphere_offset_pa,
            ..PneumaticCircuit::new(actuators)
        }
    }
}

fn default_friction() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub radius_m: f64,
    #[serde(default)]
    pub mass_kg: f64,
    #[serde(default)]
    pub position_m: f64,
    /// Used only for the holding-force check.
    #[serde(default = "default_friction")]
    pub friction_coefficient: f64,
    pub fingers: Vec<usize>,
}

impl ObjectSpec {
    pub fn object(&self) -> RigidObject {
        RigidObject {
            radius: self.radius_m,
            mass: self.mass_kg,
            position: self.position_m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandName {
    SetPressureTarget,
    SetCurvatureTarget,
    Stop,
    Vent,
    GetState,
    StreamStart,
    StreamStop,
    ResetFault,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedCommand {
    pub t_s: f64,
    pub command: CommandName,
    /// Omitted for broadcast.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actuator: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_pa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_psi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_per_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period_ms: Option<u8>,
}

impl ScriptedCommand {
    pub fn request(&self) -> std::result::Result<Request, String> {
        let actuator = match self.actuator {
            None => ActuatorId::Broadcast,
            Some(i) => ActuatorId::from_byte(i)
                .ok_or_else(|| format!("actuator {i} is not addressable"))?,
        };
        let pressure = || match (self.value_pa, self.value_psi) {
            (Some(p), None) => Ok(p),
            (None, Some(psi)) => Ok(psi * PSI),
            _ => Err("needs exactly one of value_pa, value_psi".to_string()),
        };
        let command = match self.command {
            CommandName::SetPressureTarget => Command::SetPressureTarget(pressure()?),
            CommandName::SetCurvatureTarget => {
                Command::SetCurvatureTarget(self.value_per_m.ok_or("needs value_per_m")?)
            }
            CommandName::Stop => Command::Stop,
            CommandName::Vent => Command::Vent,
            CommandName::GetState => Command::GetState,
            CommandName::StreamStart => {
                Command::StreamStart(self.period_ms.ok_or("needs period_ms")?)
            }
            CommandName::StreamStop => Command::StreamStop,
            CommandName::ResetFault => Command::ResetFault,
        };
        let req = Request::new(actuator, command);
        req.to_frame().map_err(|e| e.to_string())?;
        Ok(req)
    }
}

/// An abrupt change applied to the physical state, e.g. an object shifting
/// in the hand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disturbance {
    pub t_s: f64,
    pub finger: usize,
    #[serde(default)]
    pub pressure_step_pa: f64,
    #[serde(default)]
    pub curvature_step_per_m: f64,
    /// New wrap radius of the object under this finger.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contact_radius_m: Option<f64>,
}

fn default_dt() -> f64 {
    0.001
}

fn default_actuators() -> Vec<ActuatorParams> {
    vec![ActuatorParams::default(); 3]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub duration_s: f64,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_actuators")]
    pub actuators: Vec<ActuatorParams>,
    #[serde(default)]
    pub circuit: CircuitConfig,
    #[serde(default)]
    pub sensors: SensorSuite,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub commands: Vec<ScriptedCommand>,
    #[serde(default)]
    pub disturbances: Vec<Disturbance>,
    #[serde(default)]
    pub bus: BusConfig,
}

fn at(path: &str, e: Error) -> Error {
    let msg = match e {
        Error::Config(m) | Error::Domain(m) | Error::Schema(m) => m,
        other => other.to_string(),
    };
    Error::Schema(format!("{path}: {msg}"))
}

fn bad(path: impl Into<String>, msg: impl std::fmt::Display) -> Error {
    Error::Schema(format!("{}: {msg}", path.into()))
}

impl Scenario {
    /// Parse and validate; syntax errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Schema(m) => Error::Schema(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.actuators.len();
        if n == 0 || n > MAX_ACTUATORS {
            return Err(bad(
                "actuators",
                format!("need 1..={MAX_ACTUATORS} actuators, got {n}"),
            ));
        }
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return Err(bad("duration_s", "must be positive"));
        }
        if !(self.dt_s > 0.0 && self.dt_s <= MAX_DT) {
            return Err(bad("dt_s", format!("must be in (0, {MAX_DT}]")));
        }
        if self.duration_s < self.dt_s || self.duration_s / self.dt_s > 1e8 {
            return Err(bad("duration_s", "inconsistent with dt_s"));
        }
        for (i, a) in self.actuators.iter().enumerate() {
            a.validate()
                .map_err(|e| at(&format!("actuators[{i}]"), e))?;
        }
        self.sensors.validate().map_err(|e| at("sensors", e))?;
        self.controller
            .validate()
            .map_err(|e| at("controller", e))?;
        if self.controller.tick_period < self.dt_s {
            return Err(bad(
                "controller.tick_period_s",
                "must not be shorter than dt_s",
            ));
        }
        self.bus.validate().map_err(|e| at("bus", e))?;
        let c = &self.circuit;
        if !(c.pump_pressure_pa > 0.0)
            || !(c.supply_sharing >= 0.0)
            || !c.atmosphere_offset_pa.is_finite()
        {
            return Err(bad(
                "circuit",
                "needs pump_pressure_pa > 0, supply_sharing >= 0",
            ));
        }
        let mut owner = vec![None; n];
        for (i, o) in self.objects.iter().enumerate() {
            let path = format!("objects[{i}]");
            o.object().validate().map_err(|e| at(&path, e))?;
            if !(o.friction_coefficient > 0.0) {
                return Err(bad(
                    format!("{path}.friction_coefficient"),
                    "must be positive",
                ));
            }
            for (j, &f) in o.fingers.iter().enumerate() {
                if f >= n {
                    return Err(bad(
                        format!("{path}.fingers[{j}]"),
                        format!("finger {f} does not exist ({n} actuators)"),
                    ));
                }
                if let Some(prev) = owner[f].replace(i) {
                    return Err(bad(
                        format!("{path}.fingers[{j}]"),
                        format!("finger {f} already touches objects[{prev}]"),
                    ));
                }
            }
        }
        for (i, c) in self.commands.iter().enumerate() {
            let path = format!("commands[{i}]");
            if !(0.0..=self.duration_s).contains(&c.t_s) {
                return Err(bad(format!("{path}.t_s"), "outside the scenario duration"));
            }
            if let Some(a) = c.actuator {
                if a as usize >= n {
                    return Err(bad(
                        format!("{path}.actuator"),
                        format!("finger {a} does not exist ({n} actuators)"),
                    ));
                }
            }
            c.request().map_err(|m| bad(&path, m))?;
        }
        for (i, d) in self.disturbances.iter().enumerate() {
            let path = format!("disturbances[{i}]");
            if !(0.0..=self.duration_s).contains(&d.t_s) {
                return Err(bad(format!("{path}.t_s"), "outside the scenario duration"));
            }
            if d.finger >= n {
                return Err(bad(
                    format!("{path}.finger"),
                    format!("finger {} does not exist ({n} actuators)", d.finger),
                ));
            }
            if !d.pressure_step_pa.is_finite() || !d.curvature_step_per_m.is_finite() {
                return Err(bad(&path, "steps must be finite"));
            }
            if let Some(r) = d.contact_radius_m {
                if !(r > 0.0) {
                    return Err(bad(format!("{path}.contact_radius_m"), "must be positive"));
                }
            }
        }
        Ok(())
    }

    /// The object in the path of each finger.
    pub fn finger_objects(&self) -> Vec<Option<RigidObject>> {
        let mut out = vec![None; self.actuators.len()];
        for o in &self.objects {
            for &f in &o.fingers {
                out[f] = Some(o.object());
            }
        }
        out
    }

    /// The same script with nothing in the hand: the empty-grasp baseline.
    pub fn empty_baseline(&self) -> Self {
        Self {
            name: format!("{}-empty", self.name),
            objects: Vec::new(),
            disturbances: Vec::new(),
            ..self.clone()
        }
    }

    /// The standard grasp script: close to 8 PSI, hold, vent.
    pub fn standard_grasp(name: &str, objects: Vec<ObjectSpec>) -> Self {
        Self {
            name: name.to_string(),
            duration_s: 20.0,
            dt_s: default_dt(),
            seed: 1,
            actuators: default_actuators(),
            circuit: CircuitConfig::default(),
            sensors: SensorSuite::default(),
            controller: ControllerConfig::default(),
            objects,
            commands: vec![
                ScriptedCommand {
                    t_s: 0.5,
                    command: CommandName::SetPressureTarget,
                    actuator: None,
                    value_pa: None,
                    value_psi: Some(8.0),
                    value_per_m: None,
                    period_ms: None,
                },
                ScriptedCommand {
                    t_s: 14.0,
                    command: CommandName::Vent,
                    actuator: None,
                    value_pa: None,
                    value_psi: None,
                    value_per_m: None,
                    period_ms: None,
                },
            ],
            disturbances: Vec::new(),
            bus: BusConfig::default(),
        }
    }
}
