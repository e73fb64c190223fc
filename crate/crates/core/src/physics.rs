//! Lumped model of a fiber-reinforced bending actuator.
//!
//! Chamber pressure follows first-order fill/vent dynamics through a pair of
//! on/off valves. Curvature follows a piecewise-linear steady-state law in
//! pressure through a first-order viscoelastic lag with separate inflate and
//! deflate time constants. A rigid cylinder in the finger's path caps the
//! curvature at `1 / radius` and converts the remaining pressure-driven
//! curvature into normal force.
//!
//! Integration is explicit Euler with a fixed step no larger than
//! [`MAX_DT`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::PSI;

/// Largest admissible integration step, s.
pub const MAX_DT: f64 = 0.010;

/// Calibrated physical constants of one finger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActuatorParams {
    /// Onset of bending, Pa.
    #[serde(rename = "p_threshold_pa")]
    pub p_threshold: f64,
    /// Curvature reached at the threshold pressure, 1/m.
    #[serde(rename = "kappa_at_threshold_per_m")]
    pub kappa_at_threshold: f64,
    /// Slope of curvature above the threshold, 1/(m·Pa).
    #[serde(rename = "slope_per_m_per_pa")]
    pub slope: f64,
    /// Maximum admissible chamber pressure, Pa.
    #[serde(rename = "p_max_pa")]
    pub p_max: f64,
    #[serde(rename = "tau_inflate_s")]
    pub tau_inflate: f64,
    #[serde(rename = "tau_deflate_s")]
    pub tau_deflate: f64,
    /// Relaxation rate toward the supply pressure with the inlet open, 1/s.
    #[serde(rename = "k_fill_per_s")]
    pub k_fill: f64,
    /// Relaxation rate toward atmosphere with the vent open, 1/s.
    #[serde(rename = "k_vent_per_s")]
    pub k_vent: f64,
    /// Distance from the bending neutral axis to the strain sensor plane, m.
    #[serde(rename = "d_neutral_m")]
    pub d_neutral: f64,
    /// Contact force per unit of blocked curvature, N·m.
    #[serde(rename = "force_gain_n_m")]
    pub force_gain: f64,
}

impl Default for ActuatorParams {
    fn default() -> Self {
        Self {
            p_threshold: 30_000.0,
            kappa_at_threshold: 1.0,
            slope: 2.8e-3,
            p_max: 15.0 * PSI,
            tau_inflate: 0.4,
            tau_deflate: 0.6,
            k_fill: 0.3,
            k_vent: 0.8,
            d_neutral: 0.0025,
            force_gain: 0.04,
        }
    }
}

impl ActuatorParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.p_threshold,
            self.kappa_at_threshold,
            self.slope,
            self.p_max,
            self.tau_inflate,
            self.tau_deflate,
            self.k_fill,
            self.k_vent,
            self.d_neutral,
            self.force_gain,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("actuator parameters must be finite".into()));
        }
        if self.p_threshold <= 0.0 {
            return Err(Error::Config("p_threshold must be positive".into()));
        }
        if self.p_max <= self.p_threshold {
            return Err(Error::Config("p_max must exceed p_threshold".into()));
        }
        if self.slope <= 0.0 {
            return Err(Error::Config("slope must be positive".into()));
        }
        if self.kappa_at_threshold < 0.0 {
            return Err(Error::Config(
                "kappa_at_threshold must be non-negative".into(),
            ));
        }
        if self.tau_inflate <= 0.0 || self.tau_deflate <= 0.0 {
            return Err(Error::Config("time constants must be positive".into()));
        }
        if self.k_fill <= 0.0 || self.k_vent <= 0.0 {
            return Err(Error::Config("fill and vent rates must be positive".into()));
        }
        if self.d_neutral <= 0.0 {
            return Err(Error::Config("d_neutral must be positive".into()));
        }
        if self.force_gain < 0.0 {
            return Err(Error::Config("force_gain must be non-negative".into()));
        }
        Ok(())
    }

    /// Steady-state curvature at the maximum admissible pressure.
    pub fn kappa_max(&self) -> f64 {
        self.kappa_at_threshold + self.slope * (self.p_max - self.p_threshold)
    }
}

/// Contact between a finger and a rigid object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    /// Curvature at which the finger wraps the object, 1/m.
    pub curvature_limit: f64,
    pub normal_force: f64,
}

/// Instantaneous physical state of one actuator.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActuatorState {
    /// Gauge pressure, Pa.
    pub pressure: f64,
    /// Uniform curvature, 1/m.
    pub curvature: f64,
    pub contact: Option<Contact>,
}

impl ActuatorState {
    pub fn normal_force(&self) -> f64 {
        self.contact.map_or(0.0, |c| c.normal_force)
    }
}

/// Inlet/vent valve pair of one actuator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ValvePair {
    pub inlet: bool,
    pub vent: bool,
}

impl ValvePair {
    pub const CLOSED: ValvePair = ValvePair {
        inlet: false,
        vent: false,
    };
}

/// Shared pump and the per-actuator valves.
#[derive(Debug, Clone, PartialEq)]
pub struct PneumaticCircuit {
    /// Supply pressure of the pump, Pa.
    pub pump_pressure: f64,
    /// Fractional loss of fill rate per additional simultaneously open inlet.
    pub supply_sharing: f64,
    /// Ambient pressure drift seen by absolute-referenced sensors, Pa.
    /// Gauge dynamics are unaffected.
    pub atmosphere_offset: f64,
    pub valves: Vec<ValvePair>,
}

impl PneumaticCircuit {
    /// Default supply: a small aquarium pump delivering about 10 PSI.
    pub fn new(actuators: usize) -> Self {
        Self {
            pump_pressure: 10.0 * PSI,
            supply_sharing: 0.1,
            atmosphere_offset: 0.0,
            valves: vec![ValvePair::CLOSED; actuators],
        }
    }

    pub fn open_inlets(&self) -> usize {
        self.valves.iter().filter(|v| v.inlet).count()
    }

    /// Fill rate of one actuator once the pump is shared among all open inlets.
    pub fn effective_fill_rate(&self, k_fill: f64) -> f64 {
        let open = self.open_inlets().max(1);
        k_fill / (1.0 + self.supply_sharing * (open - 1) as f64)
    }
}

/// A rigid cylinder in the path of a finger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigidObject {
    #[serde(rename = "radius_m")]
    pub radius: f64,
    #[serde(rename = "mass_kg", default)]
    pub mass: f64,
    /// Standoff between the finger and the object surface, m. The finger
    /// wraps the object at curvature `1 / (radius + position)`.
    #[serde(rename = "position_m", default)]
    pub position: f64,
}

impl RigidObject {
    pub fn cylinder(radius: f64) -> Self {
        Self {
            radius,
            mass: 0.0,
            position: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::Config("object radius must be positive".into()));
        }
        if !(self.mass >= 0.0) {
            return Err(Error::Config("object mass must be non-negative".into()));
        }
        if !(self.radius + self.position > 0.0) {
            return Err(Error::Config(
                "object standoff must leave a positive wrap radius".into(),
            ));
        }
        Ok(())
    }

    pub fn curvature_limit(&self) -> f64 {
        1.0 / (self.radius + self.position)
    }
}

/// Piecewise-linear pressure to curvature law: zero below the threshold,
/// `kappa_at_threshold + slope * (p - p_threshold)` at and above it.
pub fn steady_state_curvature(pressure: f64, params: &ActuatorParams) -> Result<f64> {
    if !(0.0..=params.p_max).contains(&pressure) {
        return Err(Error::domain(format!(
            "pressure {pressure} Pa outside [0, {}] Pa",
            params.p_max
        )));
    }
    if pressure < params.p_threshold {
        Ok(0.0)
    } else {
        Ok(params.kappa_at_threshold + params.slope * (pressure - params.p_threshold))
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0) || dt > MAX_DT {
        return Err(Error::domain(format!(
            "time step {dt} s outside (0, {MAX_DT}] s"
        )));
    }
    Ok(())
}

/// Advance one actuator by `dt` seconds.
pub fn step(
    params: &ActuatorParams,
    state: &ActuatorState,
    circuit: &PneumaticCircuit,
    finger: usize,
    object: Option<&RigidObject>,
    dt: f64,
) -> Result<ActuatorState> {
    check_dt(dt)?;
    let valves = circuit
        .valves
        .get(finger)
        .copied()
        .ok_or_else(|| Error::Config(format!("circuit has no valves for actuator {finger}")))?;
    if valves.inlet && valves.vent {
        return Err(Error::InvalidCircuit { finger });
    }
    if !state.pressure.is_finite() || !state.curvature.is_finite() || state.curvature < 0.0 {
        return Err(Error::domain(
            "actuator state is not finite and non-negative",
        ));
    }

    let dp = if valves.inlet {
        circuit.effective_fill_rate(params.k_fill) * (circuit.pump_pressure - state.pressure)
    } else if valves.vent {
        -params.k_vent * state.pressure
    } else {
        0.0
    };
    let pressure = (state.pressure + dt * dp).clamp(0.0, params.p_max);

    let free_curvature = steady_state_curvature(pressure, params)?;
    let limit = object.map(RigidObject::curvature_limit);
    // a free finger bends toward the free curvature; once it touches the
    // object the object caps its target
    let target = match limit {
        Some(limit) if state.curvature >= limit => free_curvature.min(limit),
        _ => free_curvature,
    };
    let tau = if target > state.curvature {
        params.tau_inflate
    } else {
        params.tau_deflate
    };
    let mut curvature = (state.curvature + dt * (target - state.curvature) / tau).max(0.0);

    let mut contact = None;
    if let Some(limit) = limit {
        if curvature >= limit {
            curvature = limit;
            if free_curvature > limit {
                contact = Some(Contact {
                    curvature_limit: limit,
                    normal_force: params.force_gain * (free_curvature - limit),
                });
            }
        }
    }

    Ok(ActuatorState {
        pressure,
        curvature,
        contact,
    })
}

/// Advance every finger of a hand by one step. `objects[i]` is the object
/// (if any) in the path of finger `i`.
pub fn hand_step(
    params: &[ActuatorParams],
    states: &[ActuatorState],
    circuit: &PneumaticCircuit,
    objects: &[Option<RigidObject>],
    dt: f64,
) -> Result<Vec<ActuatorState>> {
    let n = states.len();
    if params.len() != n || objects.len() != n || circuit.valves.len() != n {
        return Err(Error::Config(format!(
            "hand has {n} states but {} parameter sets, {} object slots and {} valve pairs",
            params.len(),
            objects.len(),
            circuit.valves.len()
        )));
    }
    states
        .iter()
        .enumerate()
        .map(|(i, s)| {
            step(&params[i], s, circuit, i, objects[i].as_ref(), dt).map_err(|e| Error::Finger {
                index: i,
                source: Box::new(e),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sealed(n: usize) -> PneumaticCircuit {
        PneumaticCircuit::new(n)
    }

    fn with_valves(inlet: bool, vent: bool) -> PneumaticCircuit {
        let mut c = PneumaticCircuit::new(1);
        c.valves[0] = ValvePair { inlet, vent };
        c
    }

    #[test]
    fn threshold_anchor_and_rest() {
        let p = ActuatorParams::default();
        assert_eq!(steady_state_curvature(30_000.0, &p).unwrap(), 1.0);
        assert_eq!(steady_state_curvature(0.0, &p).unwrap(), 0.0);
        assert_eq!(steady_state_curvature(29_999.0, &p).unwrap(), 0.0);
    }

    #[test]
    fn eight_psi_with_reference_slope() {
        // 1 + 0.754 * (55.2 - 30) = 20.0008
        let p = ActuatorParams {
            slope: 0.754e-3,
            ..Default::default()
        };
        let k = steady_state_curvature(55_200.0, &p).unwrap();
        assert!((k - 20.0).abs() < 1e-2, "{k}");
    }

    #[test]
    fn out_of_range_pressure_is_domain_error() {
        let p = ActuatorParams::default();
        assert!(matches!(
            steady_state_curvature(-1.0, &p),
            Err(Error::Domain(_))
        ));
        assert!(steady_state_curvature(p.p_max + 1.0, &p).is_err());
        assert!(steady_state_curvature(f64::NAN, &p).is_err());
    }

    #[test]
    fn sealed_equilibrium_is_fixed_point() {
        let p = ActuatorParams::default();
        let pressure = 40_000.0;
        let s = ActuatorState {
            pressure,
            curvature: steady_state_curvature(pressure, &p).unwrap(),
            contact: None,
        };
        let next = step(&p, &s, &sealed(1), 0, None, 1e-3).unwrap();
        assert_eq!(next, s);
    }

    #[test]
    fn both_valves_open_is_rejected() {
        let p = ActuatorParams::default();
        let err = step(
            &p,
            &ActuatorState::default(),
            &with_valves(true, true),
            0,
            None,
            1e-3,
        );
        assert!(matches!(err, Err(Error::InvalidCircuit { finger: 0 })));
    }

    #[test]
    fn bad_dt_is_rejected() {
        let p = ActuatorParams::default();
        let s = ActuatorState::default();
        for dt in [0.0, -1e-3, f64::NAN, 0.02] {
            assert!(matches!(
                step(&p, &s, &sealed(1), 0, None, dt),
                Err(Error::Domain(_))
            ));
        }
    }

    #[test]
    fn venting_returns_to_rest() {
        let p = ActuatorParams::default();
        let mut s = ActuatorState {
            pressure: 8.0 * PSI,
            curvature: steady_state_curvature(8.0 * PSI, &p).unwrap(),
            contact: None,
        };
        let c = with_valves(false, true);
        for _ in 0..40_000 {
            s = step(&p, &s, &c, 0, None, 1e-3).unwrap();
        }
        assert!(s.pressure < 1.0, "{}", s.pressure);
        assert!(s.curvature < 1e-6, "{}", s.curvature);
    }

    #[test]
    fn blocked_finger_converges_to_object_curvature() {
        let p = ActuatorParams::default();
        let obj = RigidObject::cylinder(0.074);
        let c = with_valves(true, false);
        let mut s = ActuatorState::default();
        let mut held = false;
        for _ in 0..30_000 {
            let mut circuit = c.clone();
            if s.pressure >= 8.0 * PSI || held {
                held = true;
                circuit.valves[0] = ValvePair::CLOSED;
            }
            s = step(&p, &s, &circuit, 0, Some(&obj), 1e-3).unwrap();
        }
        assert!((s.curvature - 1.0 / 0.074).abs() < 1e-6, "{}", s.curvature);
        assert!(s.normal_force() > 0.0);
        assert!((1.0_f64 / 0.074 - 13.5135).abs() < 1e-4);
    }

    #[test]
    fn params_validation() {
        assert!(ActuatorParams::default().validate().is_ok());
        let bad = ActuatorParams {
            p_max: 10_000.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ActuatorParams {
            tau_inflate: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn hand_step_tags_failing_finger() {
        let p = vec![ActuatorParams::default(); 3];
        let s = vec![ActuatorState::default(); 3];
        let mut c = sealed(3);
        c.valves[2] = ValvePair {
            inlet: true,
            vent: true,
        };
        let err = hand_step(&p, &s, &c, &[None, None, None], 1e-3).unwrap_err();
        assert!(matches!(err, Error::Finger { index: 2, .. }));
    }

    #[test]
    fn shared_pump_slows_filling() {
        let mut c = sealed(3);
        c.valves[0].inlet = true;
        let single = c.effective_fill_rate(0.3);
        c.valves[1].inlet = true;
        c.valves[2].inlet = true;
        let shared = c.effective_fill_rate(0.3);
        assert_eq!(single, 0.3);
        assert!(shared < single && shared > 0.0);
    }
}
