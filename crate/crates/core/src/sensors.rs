//! Analog measurement pipelines for strain and chamber pressure.
//!
//! Strain: dorsal elongation of the actuator stretches a liquid-metal
//! channel, whose resistance sits in series with two current-limiting
//! resistors. An instrument amplifier reads the voltage across the channel
//! and feeds the ADC.
//!
//! Pressure: a bridge sensor maps its full-scale pressure to a small
//! full-scale voltage, amplified into the ADC. Its zero drifts with ambient
//! pressure; the main board's differential sensor reports that drift in
//! each frame as `reference_pressure`.
//!
//! Noise is input-referred (added before the amplifier), so its
//! contribution at the ADC is `amp_gain * noise_sigma`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationRecord;
use crate::error::{Error, Result};
use crate::physics::{ActuatorParams, ActuatorState};
use crate::units::PSI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrainGaugeParams {
    /// Unstrained channel resistance.
    #[serde(rename = "r0_ohm")]
    pub r0: f64,
    /// Series resistance of the copper leads.
    #[serde(rename = "r_lead_ohm")]
    pub r_lead: f64,
    /// Each of the two current-limiting resistors.
    #[serde(rename = "r_limit_ohm")]
    pub r_limit: f64,
    #[serde(rename = "v_excitation_v")]
    pub v_excitation: f64,
    pub amp_gain: f64,
    /// Input-referred noise, V.
    #[serde(rename = "noise_sigma_v")]
    pub noise_sigma: f64,
}

impl Default for StrainGaugeParams {
    fn default() -> Self {
        Self {
            r0: 2.0,
            r_lead: 0.2,
            r_limit: 100.0,
            v_excitation: 3.3,
            amp_gain: 50.0,
            noise_sigma: 10e-6,
        }
    }
}

impl StrainGaugeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r0 > 0.0) || !(self.r_lead >= 0.0) || !(self.amp_gain > 0.0) {
            return Err(Error::Config(
                "strain gauge needs r0 > 0, r_lead >= 0 and amp_gain > 0".into(),
            ));
        }
        if !(self.r_limit > 0.0) || !(self.v_excitation > 0.0) || !(self.noise_sigma >= 0.0) {
            return Err(Error::Config(
                "strain gauge needs r_limit > 0, v_excitation > 0 and noise_sigma >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Voltage across the channel for resistance `r`.
    pub fn divider_voltage(&self, r: f64) -> f64 {
        self.v_excitation * r / (r + 2.0 * self.r_limit)
    }

    /// Inverse of [`divider_voltage`](Self::divider_voltage).
    pub fn resistance_from_voltage(&self, v: f64) -> f64 {
        2.0 * self.r_limit * v / (self.v_excitation - v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PressureSensorParams {
    #[serde(rename = "full_scale_pressure_pa")]
    pub full_scale_pressure: f64,
    #[serde(rename = "full_scale_voltage_v")]
    pub full_scale_voltage: f64,
    pub amp_gain: f64,
    /// Zero offset caused by ambient pressure drift, Pa.
    #[serde(rename = "offset_drift_pa")]
    pub offset_drift: f64,
    #[serde(rename = "noise_sigma_v")]
    pub noise_sigma: f64,
}

impl Default for PressureSensorParams {
    fn default() -> Self {
        Self {
            full_scale_pressure: 15.0 * PSI,
            full_scale_voltage: 0.100,
            amp_gain: 20.0,
            offset_drift: 0.0,
            noise_sigma: 10e-6,
        }
    }
}

impl PressureSensorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.full_scale_pressure > 0.0) || !(self.full_scale_voltage > 0.0) {
            return Err(Error::Config(
                "pressure sensor full scale must be positive".into(),
            ));
        }
        if !(self.amp_gain > 0.0) || !(self.noise_sigma >= 0.0) || !self.offset_drift.is_finite() {
            return Err(Error::Config(
                "pressure sensor needs amp_gain > 0, noise_sigma >= 0 and finite drift".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdcParams {
    pub bits: u32,
    #[serde(rename = "v_ref_v")]
    pub v_ref: f64,
}

impl Default for AdcParams {
    fn default() -> Self {
        Self {
            bits: 12,
            v_ref: 2.5,
        }
    }
}

impl AdcParams {
    pub fn validate(&self) -> Result<()> {
        if !(8..=16).contains(&self.bits) {
            return Err(Error::Config(format!(
                "ADC resolution {} bits outside [8, 16]",
                self.bits
            )));
        }
        if !(self.v_ref > 0.0) {
            return Err(Error::Config("ADC reference must be positive".into()));
        }
        Ok(())
    }

    pub fn max_count(&self) -> u16 {
        ((1u32 << self.bits) - 1) as u16
    }

    /// Volts per count.
    pub fn lsb(&self) -> f64 {
        self.v_ref / f64::from(self.max_count())
    }

    pub fn quantize(&self, v: f64) -> u16 {
        let v = v.clamp(0.0, self.v_ref);
        (v / self.v_ref * f64::from(self.max_count())).round() as u16
    }

    pub fn is_saturated(&self, counts: u16) -> bool {
        counts == 0 || counts >= self.max_count()
    }
}

/// One digitized sample of an actuator's sensors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SensorFrame {
    pub t: f64,
    pub strain_counts: u16,
    pub pressure_counts: u16,
    /// Reading of the main board's differential reference sensor, Pa.
    pub reference_pressure: f64,
}

/// A frame converted back to physical units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalReading {
    pub pressure: f64,
    pub strain: f64,
    pub curvature: f64,
    pub pressure_saturated: bool,
    pub strain_saturated: bool,
}

impl PhysicalReading {
    pub fn saturated(&self) -> bool {
        self.pressure_saturated || self.strain_saturated
    }
}

/// Dorsal-surface strain of a thin beam bent to curvature `kappa`.
pub fn curvature_to_strain(kappa: f64, d_neutral: f64) -> Result<f64> {
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(Error::domain(format!(
            "curvature {kappa} must be non-negative"
        )));
    }
    Ok(d_neutral * kappa)
}

/// Constant-volume liquid conductor: `R = r0 (1 + eps)^2 + r_lead`.
pub fn strain_to_resistance(eps: f64, g: &StrainGaugeParams) -> Result<f64> {
    if !(eps > -1.0) || !eps.is_finite() {
        return Err(Error::domain(format!("strain {eps} must exceed -1")));
    }
    Ok(g.r0 * (1.0 + eps).powi(2) + g.r_lead)
}

fn noise<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> f64 {
    if sigma > 0.0 {
        sigma * rng.sample::<f64, _>(StandardNormal)
    } else {
        0.0
    }
}

pub fn resistance_to_counts<R: Rng + ?Sized>(
    r: f64,
    g: &StrainGaugeParams,
    adc: &AdcParams,
    rng: &mut R,
) -> Result<u16> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::domain(format!("resistance {r} must be positive")));
    }
    let v_sensor = g.divider_voltage(r);
    let v_adc = g.amp_gain * (v_sensor + noise(g.noise_sigma, rng));
    Ok(adc.quantize(v_adc))
}

/// Digitize gauge pressure `p`. The sensor's ambient drift is added before
/// conversion; readings beyond full scale clip.
pub fn pressure_to_counts<R: Rng + ?Sized>(
    p: f64,
    s: &PressureSensorParams,
    adc: &AdcParams,
    rng: &mut R,
) -> Result<u16> {
    if !(p >= 0.0) || !p.is_finite() {
        return Err(Error::domain(format!(
            "pressure {p} Pa must be non-negative"
        )));
    }
    let sensed = (p + s.offset_drift).clamp(0.0, s.full_scale_pressure);
    let v = sensed * (s.full_scale_voltage / s.full_scale_pressure);
    let v_adc = s.amp_gain * (v + noise(s.noise_sigma, rng));
    Ok(adc.quantize(v_adc))
}

/// Invert both pipelines with a calibration record, removing the ambient
/// drift reported by the reference sensor. Saturation is flagged rather
/// than treated as an error.
pub fn counts_to_physical(frame: &SensorFrame, cal: &CalibrationRecord) -> PhysicalReading {
    let pressure = cal.pressure_channel.apply(frame.pressure_counts) - frame.reference_pressure;
    let strain = cal.strain_from_counts(frame.strain_counts);
    PhysicalReading {
        pressure,
        strain,
        curvature: strain / cal.d_neutral,
        pressure_saturated: cal.adc.is_saturated(frame.pressure_counts),
        strain_saturated: cal.adc.is_saturated(frame.strain_counts),
    }
}

/// The full sensor set of one actuator board.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorSuite {
    pub strain: StrainGaugeParams,
    pub pressure: PressureSensorParams,
    pub adc: AdcParams,
}

impl SensorSuite {
    pub fn validate(&self) -> Result<()> {
        self.strain.validate()?;
        self.pressure.validate()?;
        self.adc.validate()
    }

    /// Sample an actuator's physical state. `atmosphere_offset` is added to
    /// the pressure sensor's own drift and reported as the reference reading.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        t: f64,
        state: &ActuatorState,
        params: &ActuatorParams,
        atmosphere_offset: f64,
        rng: &mut R,
    ) -> Result<SensorFrame> {
        let eps = curvature_to_strain(state.curvature, params.d_neutral)?;
        let r = strain_to_resistance(eps, &self.strain)?;
        let strain_counts = resistance_to_counts(r, &self.strain, &self.adc, rng)?;
        let mut pressure_sensor = self.pressure;
        pressure_sensor.offset_drift += atmosphere_offset;
        let pressure_counts = pressure_to_counts(state.pressure, &pressure_sensor, &self.adc, rng)?;
        Ok(SensorFrame {
            t,
            strain_counts,
            pressure_counts,
            reference_pressure: pressure_sensor.offset_drift,
        })
    }
}
