//! Python bindings: `import softgrip`.
//!
//! Structured results cross the boundary as plain dicts and lists with the
//! same field names as the JSON and CSV outputs of the command line tool.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;

use softgrip_core::calibration::{
    fit_pressure_curvature as core_fit_pc, fit_strain_resistance as core_fit_sr, CalibrationRecord,
    PressureCurvatureSample, StrainResistanceSample,
};
use softgrip_core::controller::{ControllerConfig, HandController, TargetKind};
use softgrip_core::grasp::{
    classify_grasp, detect_conformation_changes as core_detect, detect_settled, ClassifierConfig,
    EmptyGraspReference, JumpDetectorConfig, PhaseOrbit, PhaseSample,
};
use softgrip_core::physics::{self, ActuatorState, PneumaticCircuit, RigidObject, ValvePair};
use softgrip_core::protocol::{self, ActuatorId, Command, Decoder as CoreDecoder, Frame, Request};
use softgrip_core::runner::{
    self, Event, RunOutput, SETTLE_SIGMA, SETTLE_WINDOW_S, TOLERANCE_BAND,
};
use softgrip_core::scenario::{ObjectSpec, Scenario as CoreScenario};
use softgrip_core::sensors::{self, SensorFrame, SensorSuite};
use softgrip_core::telemetry::{write_csv, COLUMNS};
use softgrip_core::Error;

fn err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Deserialize `T` from its defaults overlaid with `overrides`.
fn with_overrides<T: Serialize + DeserializeOwned>(
    base: &T,
    overrides: Option<&Bound<'_, PyDict>>,
) -> PyResult<T> {
    let Some(overrides) = overrides else {
        return serde_json::from_value(serde_json::to_value(base).unwrap())
            .map_err(|e| PyValueError::new_err(e.to_string()));
    };
    let mut value = serde_json::to_value(base).unwrap();
    let text: String = overrides
        .py()
        .import("json")?
        .call_method1("dumps", (overrides,))?
        .extract()?;
    let patch: serde_json::Map<String, serde_json::Value> =
        serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let map = value
        .as_object_mut()
        .expect("struct serializes to an object");
    for (k, v) in patch {
        map.insert(k, v);
    }
    serde_json::from_value(value).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Physical constants of one finger. Keyword arguments override defaults
/// by their serialized names, e.g. `ActuatorParams(slope_per_m_per_pa=3e-3)`.
#[pyclass(name = "ActuatorParams", module = "softgrip")]
struct PyActuatorParams {
    inner: physics::ActuatorParams,
}

#[pymethods]
impl PyActuatorParams {
    #[new]
    #[pyo3(signature = (**overrides))]
    fn new(overrides: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let inner: physics::ActuatorParams =
            with_overrides(&physics::ActuatorParams::default(), overrides)?;
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    /// Steady-state curvature at a gauge pressure, 1/m.
    fn steady_state_curvature(&self, pressure_pa: f64) -> PyResult<f64> {
        physics::steady_state_curvature(pressure_pa, &self.inner).map_err(err)
    }

    #[getter]
    fn p_threshold_pa(&self) -> f64 {
        self.inner.p_threshold
    }

    #[getter]
    fn slope_per_m_per_pa(&self) -> f64 {
        self.inner.slope
    }

    #[getter]
    fn p_max_pa(&self) -> f64 {
        self.inner.p_max
    }

    #[getter]
    fn kappa_max_per_m(&self) -> f64 {
        self.inner.kappa_max()
    }

    fn __repr__(&self) -> String {
        format!("ActuatorParams({:?})", self.inner)
    }
}

/// One finger on its own pump, optionally blocked by a cylinder.
#[pyclass(name = "Actuator", module = "softgrip")]
struct PyActuator {
    params: physics::ActuatorParams,
    object: Option<RigidObject>,
    circuit: PneumaticCircuit,
    state: ActuatorState,
    t: f64,
}

#[pymethods]
impl PyActuator {
    #[new]
    #[pyo3(signature = (params=None, object_radius_m=None))]
    fn new(
        params: Option<PyRef<'_, PyActuatorParams>>,
        object_radius_m: Option<f64>,
    ) -> PyResult<Self> {
        let object = object_radius_m.map(RigidObject::cylinder);
        if let Some(o) = &object {
            o.validate().map_err(err)?;
        }
        Ok(Self {
            params: params.map_or_else(Default::default, |p| p.inner),
            object,
            circuit: PneumaticCircuit::new(1),
            state: ActuatorState::default(),
            t: 0.0,
        })
    }

    /// Advance by `dt` seconds with the given valve settings.
    #[pyo3(signature = (inlet, vent, dt=0.001))]
    fn step(&mut self, inlet: bool, vent: bool, dt: f64) -> PyResult<()> {
        self.circuit.valves[0] = ValvePair { inlet, vent };
        self.state = physics::step(
            &self.params,
            &self.state,
            &self.circuit,
            0,
            self.object.as_ref(),
            dt,
        )
        .map_err(err)?;
        self.t += dt;
        Ok(())
    }

    #[getter]
    fn t_s(&self) -> f64 {
        self.t
    }

    #[getter]
    fn pressure_pa(&self) -> f64 {
        self.state.pressure
    }

    #[getter]
    fn curvature_per_m(&self) -> f64 {
        self.state.curvature
    }

    #[getter]
    fn normal_force_n(&self) -> f64 {
        self.state.normal_force()
    }

    #[getter]
    fn in_contact(&self) -> bool {
        self.state.contact.is_some()
    }
}

/// Strain gauge, pressure sensor and ADC with a seeded noise source.
#[pyclass(name = "Sensors", module = "softgrip")]
struct PySensors {
    suite: SensorSuite,
    params: physics::ActuatorParams,
    cal: CalibrationRecord,
    rng: ChaCha8Rng,
}

#[pymethods]
impl PySensors {
    #[new]
    #[pyo3(signature = (seed=0, params=None))]
    fn new(seed: u64, params: Option<PyRef<'_, PyActuatorParams>>) -> Self {
        let params = params.map_or_else(Default::default, |p| p.inner);
        let suite = SensorSuite::default();
        Self {
            cal: CalibrationRecord::nominal(&params, &suite),
            suite,
            params,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Sample a physical state; returns `(pressure_counts, strain_counts)`.
    fn sample(&mut self, pressure_pa: f64, curvature_per_m: f64) -> PyResult<(u16, u16)> {
        let state = ActuatorState {
            pressure: pressure_pa,
            curvature: curvature_per_m,
            contact: None,
        };
        let f = self
            .suite
            .sample(0.0, &state, &self.params, 0.0, &mut self.rng)
            .map_err(err)?;
        Ok((f.pressure_counts, f.strain_counts))
    }

    /// Convert counts back with the nominal calibration.
    fn to_physical<'py>(
        &self,
        py: Python<'py>,
        pressure_counts: u16,
        strain_counts: u16,
    ) -> PyResult<Bound<'py, PyDict>> {
        let frame = SensorFrame {
            t: 0.0,
            pressure_counts,
            strain_counts,
            reference_pressure: 0.0,
        };
        let r = sensors::counts_to_physical(&frame, &self.cal);
        let d = PyDict::new(py);
        d.set_item("pressure_pa", r.pressure)?;
        d.set_item("strain", r.strain)?;
        d.set_item("curvature_per_m", r.curvature)?;
        d.set_item("saturated", r.saturated())?;
        Ok(d)
    }

    fn calibration<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.cal)
    }
}

/// Resistance of the liquid-metal gauge at a strain, ohm.
#[pyfunction]
fn strain_to_resistance(strain: f64) -> PyResult<f64> {
    sensors::strain_to_resistance(strain, &SensorSuite::default().strain).map_err(err)
}

/// Valve state machines of one hand with the nominal calibration.
#[pyclass(name = "Controller", module = "softgrip")]
struct PyController {
    inner: HandController,
}

#[pymethods]
impl PyController {
    #[new]
    #[pyo3(signature = (actuators=3))]
    fn new(actuators: usize) -> PyResult<Self> {
        let cal = CalibrationRecord::nominal(&Default::default(), &SensorSuite::default());
        Ok(Self {
            inner: HandController::new(ControllerConfig::default(), vec![cal; actuators])
                .map_err(err)?,
        })
    }

    fn set_pressure_target(&mut self, finger: usize, pressure_pa: f64, t: f64) -> PyResult<()> {
        self.set(finger, TargetKind::Pressure, pressure_pa, t)
    }

    fn set_curvature_target(
        &mut self,
        finger: usize,
        curvature_per_m: f64,
        t: f64,
    ) -> PyResult<()> {
        self.set(finger, TargetKind::Curvature, curvature_per_m, t)
    }

    fn stop(&mut self, finger: usize, t: f64) -> PyResult<()> {
        self.fsm(finger)?.stop(t);
        Ok(())
    }

    fn reset_fault(&mut self, finger: usize, t: f64) -> PyResult<()> {
        self.fsm(finger)?.reset_fault(t);
        Ok(())
    }

    /// One tick from raw counts `[(pressure_counts, strain_counts), ...]`;
    /// returns `[(inlet, vent), ...]`.
    fn tick(&mut self, counts: Vec<(u16, u16)>, t: f64) -> PyResult<Vec<(bool, bool)>> {
        let frames: Vec<SensorFrame> = counts
            .into_iter()
            .map(|(p, s)| SensorFrame {
                t,
                pressure_counts: p,
                strain_counts: s,
                reference_pressure: 0.0,
            })
            .collect();
        let valves = self.inner.tick(&frames, t).map_err(err)?;
        Ok(valves.into_iter().map(|v| (v.inlet, v.vent)).collect())
    }

    #[getter]
    fn modes(&self) -> Vec<&'static str> {
        self.inner.fsms.iter().map(|f| f.mode.as_str()).collect()
    }
}

impl PyController {
    fn fsm(&mut self, finger: usize) -> PyResult<&mut softgrip_core::controller::FsmState> {
        let n = self.inner.fsms.len();
        self.inner
            .fsms
            .get_mut(finger)
            .ok_or_else(|| PyValueError::new_err(format!("finger {finger} out of range 0..{n}")))
    }

    fn set(&mut self, finger: usize, kind: TargetKind, value: f64, t: f64) -> PyResult<()> {
        let target = self.inner.config.target(kind, value).map_err(err)?;
        self.fsm(finger)?.set_target(target, t);
        Ok(())
    }
}

#[pyfunction]
fn crc8(data: &[u8]) -> u8 {
    protocol::crc8(data)
}

/// Encode a host command as wire bytes. `actuator=None` broadcasts.
#[pyfunction]
#[pyo3(signature = (command, actuator=None, value=None))]
fn encode_command<'py>(
    py: Python<'py>,
    command: &str,
    actuator: Option<u8>,
    value: Option<f64>,
) -> PyResult<Bound<'py, PyBytes>> {
    let need = || value.ok_or_else(|| PyValueError::new_err(format!("{command} needs a value")));
    let command = match command {
        "set_pressure_target" => Command::SetPressureTarget(need()?),
        "set_curvature_target" => Command::SetCurvatureTarget(need()?),
        "stop" => Command::Stop,
        "vent" => Command::Vent,
        "get_state" => Command::GetState,
        "stream_start" => Command::StreamStart(need()? as u8),
        "stream_stop" => Command::StreamStop,
        "reset_fault" => Command::ResetFault,
        other => return Err(PyValueError::new_err(format!("unknown command {other:?}"))),
    };
    let id = actuator.map_or(ActuatorId::Broadcast, ActuatorId::One);
    let frame = Request::new(id, command).to_frame().map_err(err)?;
    Ok(PyBytes::new(
        py,
        &protocol::encode_frame(&frame).map_err(err)?,
    ))
}

/// Streaming frame decoder; `push` returns `(cmd, actuator, payload)` tuples.
#[pyclass(name = "Decoder", module = "softgrip")]
struct PyDecoder {
    inner: CoreDecoder,
}

#[pymethods]
impl PyDecoder {
    #[new]
    fn new() -> Self {
        Self {
            inner: CoreDecoder::new(),
        }
    }

    fn push<'py>(&mut self, py: Python<'py>, data: &[u8]) -> Vec<(u8, u8, Bound<'py, PyBytes>)> {
        self.inner
            .push(data)
            .into_iter()
            .map(|f: Frame| (f.cmd, f.actuator, PyBytes::new(py, &f.payload)))
            .collect()
    }

    #[getter]
    fn crc_errors(&self) -> u64 {
        self.inner.stats().crc_errors
    }
}

/// Least-squares line through the points at or above `p_min_fit_pa`.
#[pyfunction]
#[pyo3(signature = (pressures_pa, curvatures_per_m, p_min_fit_pa=0.0))]
fn fit_pressure_curvature<'py>(
    py: Python<'py>,
    pressures_pa: Vec<f64>,
    curvatures_per_m: Vec<f64>,
    p_min_fit_pa: f64,
) -> PyResult<Bound<'py, PyDict>> {
    if pressures_pa.len() != curvatures_per_m.len() {
        return Err(PyValueError::new_err(
            "pressure and curvature lengths differ",
        ));
    }
    let samples: Vec<_> = pressures_pa
        .into_iter()
        .zip(curvatures_per_m)
        .map(|(pressure, curvature)| PressureCurvatureSample {
            pressure,
            curvature,
        })
        .collect();
    let fit = core_fit_pc(&samples, p_min_fit_pa).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("slope_per_m_per_pa", fit.slope)?;
    d.set_item("intercept_per_m", fit.intercept)?;
    d.set_item("rms_per_m", fit.rms)?;
    d.set_item("n", fit.n)?;
    Ok(d)
}

#[pyfunction]
fn fit_strain_resistance<'py>(
    py: Python<'py>,
    strains: Vec<f64>,
    resistances_ohm: Vec<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    if strains.len() != resistances_ohm.len() {
        return Err(PyValueError::new_err(
            "strain and resistance lengths differ",
        ));
    }
    let samples: Vec<_> = strains
        .into_iter()
        .zip(resistances_ohm)
        .map(|(strain, resistance)| StrainResistanceSample { strain, resistance })
        .collect();
    to_py(py, &core_fit_sr(&samples).map_err(err)?)
}

fn orbit(t: Vec<f64>, pressure: Vec<f64>, strain: Vec<f64>) -> PyResult<PhaseOrbit> {
    if t.len() != pressure.len() || t.len() != strain.len() {
        return Err(PyValueError::new_err(
            "t, pressure and strain lengths differ",
        ));
    }
    let samples = t
        .into_iter()
        .zip(pressure)
        .zip(strain)
        .map(|((t, pressure), strain)| PhaseSample {
            t,
            pressure,
            strain,
        })
        .collect();
    PhaseOrbit::new(samples, true).map_err(err)
}

/// Classify one finger's orbit against an empty grasp of the same finger.
#[pyfunction]
#[pyo3(signature = (t_s, pressure_pa, strain, ref_t_s, ref_pressure_pa, ref_strain, tolerance=TOLERANCE_BAND))]
#[allow(clippy::too_many_arguments)]
fn classify<'py>(
    py: Python<'py>,
    t_s: Vec<f64>,
    pressure_pa: Vec<f64>,
    strain: Vec<f64>,
    ref_t_s: Vec<f64>,
    ref_pressure_pa: Vec<f64>,
    ref_strain: Vec<f64>,
    tolerance: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let run = orbit(t_s, pressure_pa, strain)?;
    let reference =
        EmptyGraspReference::from_orbit(&orbit(ref_t_s, ref_pressure_pa, ref_strain)?, tolerance)
            .map_err(err)?;
    let cal = CalibrationRecord::nominal(&Default::default(), &SensorSuite::default());
    let verdict =
        classify_grasp(&run, &reference, &cal, &ClassifierConfig::default()).map_err(err)?;
    to_py(py, &verdict)
}

#[pyfunction]
fn detect_conformation_changes<'py>(
    py: Python<'py>,
    t_s: Vec<f64>,
    pressure_pa: Vec<f64>,
    strain: Vec<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let events = core_detect(
        &orbit(t_s, pressure_pa, strain)?,
        &JumpDetectorConfig::default(),
    )
    .map_err(err)?;
    to_py(py, &events)
}

/// Earliest time the strain has been quiet for a full window, or None.
#[pyfunction]
#[pyo3(signature = (t_s, pressure_pa, strain, window_s=SETTLE_WINDOW_S, sigma_max=SETTLE_SIGMA))]
fn settle_time(
    t_s: Vec<f64>,
    pressure_pa: Vec<f64>,
    strain: Vec<f64>,
    window_s: f64,
    sigma_max: f64,
) -> PyResult<Option<f64>> {
    Ok(detect_settled(
        &orbit(t_s, pressure_pa, strain)?,
        window_s,
        sigma_max,
    ))
}

#[pyclass(name = "Scenario", module = "softgrip")]
struct PyScenario {
    inner: CoreScenario,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: CoreScenario::from_json(text).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: CoreScenario::load(&path).map_err(err)?,
        })
    }

    /// Inflate all fingers to 8 PSI, hold, vent; one cylinder per radius
    /// touching every finger.
    #[staticmethod]
    #[pyo3(signature = (name, radii_m=Vec::new()))]
    fn standard_grasp(name: &str, radii_m: Vec<f64>) -> Self {
        let objects = radii_m
            .into_iter()
            .map(|radius_m| ObjectSpec {
                radius_m,
                mass_kg: 0.0,
                position_m: 0.0,
                friction_coefficient: 1.0,
                fingers: vec![0, 1, 2],
            })
            .collect();
        Self {
            inner: CoreScenario::standard_grasp(name, objects),
        }
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn empty_baseline(&self) -> Self {
        Self {
            inner: self.inner.empty_baseline(),
        }
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn duration_s(&self) -> f64 {
        self.inner.duration_s
    }

    #[setter]
    fn set_duration_s(&mut self, value: f64) {
        self.inner.duration_s = value;
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, value: u64) {
        self.inner.seed = value;
    }

    #[getter]
    fn dt_s(&self) -> f64 {
        self.inner.dt_s
    }

    #[setter]
    fn set_dt_s(&mut self, value: f64) {
        self.inner.dt_s = value;
    }

    /// Simulate the scenario and its empty baseline and analyze the grasp.
    fn run(&self, py: Python<'_>) -> PyResult<PyRunResult> {
        let scenario = self.inner.clone();
        let out = py
            .detach(move || runner::run_scenario(&scenario))
            .map_err(err)?;
        Ok(PyRunResult { inner: out })
    }
}

#[pyclass(name = "RunResult", module = "softgrip")]
struct PyRunResult {
    inner: RunOutput,
}

#[pymethods]
impl PyRunResult {
    #[getter]
    fn faulted(&self) -> bool {
        self.inner.faulted()
    }

    fn events<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.events)
    }

    fn verdicts<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let v: Vec<&Event> = self.inner.verdicts().collect();
        to_py(py, &v)
    }

    /// Telemetry as a dict of columns; `baseline=True` for the empty grasp.
    #[pyo3(signature = (baseline=false))]
    fn telemetry<'py>(&self, py: Python<'py>, baseline: bool) -> PyResult<Bound<'py, PyDict>> {
        let rows = if baseline {
            &self.inner.baseline.telemetry
        } else {
            &self.inner.run.telemetry
        };
        let d = PyDict::new(py);
        d.set_item("t_s", rows.iter().map(|r| r.t).collect::<Vec<_>>())?;
        d.set_item("finger", rows.iter().map(|r| r.finger).collect::<Vec<_>>())?;
        d.set_item(
            "pressure_pa",
            rows.iter().map(|r| r.pressure).collect::<Vec<_>>(),
        )?;
        d.set_item(
            "curvature_per_m",
            rows.iter().map(|r| r.curvature).collect::<Vec<_>>(),
        )?;
        d.set_item("strain", rows.iter().map(|r| r.strain).collect::<Vec<_>>())?;
        d.set_item(
            "strain_counts",
            rows.iter().map(|r| r.strain_counts).collect::<Vec<_>>(),
        )?;
        d.set_item(
            "pressure_counts",
            rows.iter().map(|r| r.pressure_counts).collect::<Vec<_>>(),
        )?;
        d.set_item(
            "fsm_mode",
            rows.iter().map(|r| r.mode.as_str()).collect::<Vec<_>>(),
        )?;
        d.set_item("inlet", rows.iter().map(|r| r.inlet).collect::<Vec<_>>())?;
        d.set_item("vent", rows.iter().map(|r| r.vent).collect::<Vec<_>>())?;
        d.set_item(
            "contact_force_n",
            rows.iter().map(|r| r.contact_force).collect::<Vec<_>>(),
        )?;
        debug_assert_eq!(d.len(), COLUMNS.len());
        Ok(d)
    }

    /// Telemetry in the CSV format of the command line tool.
    #[pyo3(signature = (baseline=false))]
    fn telemetry_csv(&self, baseline: bool) -> PyResult<String> {
        let rows = if baseline {
            &self.inner.baseline.telemetry
        } else {
            &self.inner.run.telemetry
        };
        let mut buf = Vec::new();
        write_csv(rows, &mut buf).map_err(err)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// Write telemetry.csv, empty_reference.csv and events.jsonl.
    fn write(&self, dir: PathBuf) -> PyResult<()> {
        runner::write_outputs(&self.inner, &dir).map_err(err)
    }
}

#[pymodule]
fn softgrip(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyActuatorParams>()?;
    m.add_class::<PyActuator>()?;
    m.add_class::<PySensors>()?;
    m.add_class::<PyController>()?;
    m.add_class::<PyDecoder>()?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(strain_to_resistance, m)?)?;
    m.add_function(wrap_pyfunction!(crc8, m)?)?;
    m.add_function(wrap_pyfunction!(encode_command, m)?)?;
    m.add_function(wrap_pyfunction!(fit_pressure_curvature, m)?)?;
    m.add_function(wrap_pyfunction!(fit_strain_resistance, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(detect_conformation_changes, m)?)?;
    m.add_function(wrap_pyfunction!(settle_time, m)?)?;
    m.add("TOLERANCE_BAND", TOLERANCE_BAND)?;
    m.add("PSI", softgrip_core::units::PSI)?;
    Ok(())
}
