//! Least-squares calibration of the actuator and sensor models.
//!
//! Three fits feed a [`CalibrationRecord`]:
//! - pressure to curvature: a line above a minimum pressure, converted to a
//!   threshold pressure by anchoring the curvature at threshold;
//! - strain to resistance: `R = r0 (1 + eps)^2 + r_lead`, linear in
//!   `(1 + eps)^2` with the intercept reported as lead resistance;
//! - pressure channel: counts to reference pressure.
//!
//! Fits over data from actuators with fewer than [`MIN_WARMUP_CYCLES`]
//! full inflations are rejected: the elastomer softens over its first load
//! cycles and earlier data does not describe the settled material.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{self, ActuatorParams, ActuatorState, PneumaticCircuit, ValvePair};
use crate::sensors::{AdcParams, PressureSensorParams, SensorFrame, SensorSuite};

pub const MIN_WARMUP_CYCLES: u32 = 10;

/// Linear map from ADC counts to a physical quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelCalibration {
    pub gain: f64,
    pub offset: f64,
}

impl ChannelCalibration {
    pub fn apply(&self, counts: u16) -> f64 {
        self.gain * f64::from(counts) + self.offset
    }
}

/// Strain channel constants: counts to sensor voltage, plus the divider
/// needed to recover resistance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrainChannel {
    /// Counts to voltage across the gauge, V per count and V.
    pub volts: ChannelCalibration,
    #[serde(rename = "v_excitation_v")]
    pub v_excitation: f64,
    #[serde(rename = "r_limit_ohm")]
    pub r_limit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitResiduals {
    #[serde(rename = "pressure_curvature_rms_per_m")]
    pub pressure_curvature: f64,
    #[serde(rename = "strain_resistance_rms_ohm")]
    pub strain_resistance: f64,
    #[serde(rename = "pressure_channel_rms_pa")]
    pub pressure_channel: f64,
}

/// Fitted constants of one actuator and its sensor board.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationRecord {
    #[serde(rename = "p_threshold_pa")]
    pub p_threshold_hat: f64,
    #[serde(rename = "slope_per_m_per_pa")]
    pub slope_hat: f64,
    #[serde(rename = "kappa0_per_m")]
    pub kappa0_hat: f64,
    #[serde(rename = "r0_ohm")]
    pub r0_hat: f64,
    #[serde(rename = "r_lead_ohm")]
    pub r_lead_hat: f64,
    #[serde(rename = "d_neutral_m")]
    pub d_neutral: f64,
    /// Counts to pressure, Pa per count and Pa.
    pub pressure_channel: ChannelCalibration,
    pub strain_channel: StrainChannel,
    pub adc: AdcParams,
    pub residuals: FitResiduals,
    pub warmup_cycles: u32,
}

impl CalibrationRecord {
    /// The record a perfect calibration of known hardware would produce.
    pub fn nominal(params: &ActuatorParams, suite: &SensorSuite) -> Self {
        let volts_per_count = suite.adc.lsb();
        let p = &suite.pressure;
        Self {
            p_threshold_hat: params.p_threshold,
            slope_hat: params.slope,
            kappa0_hat: params.kappa_at_threshold,
            r0_hat: suite.strain.r0,
            r_lead_hat: suite.strain.r_lead,
            d_neutral: params.d_neutral,
            pressure_channel: nominal_pressure_channel(p, &suite.adc),
            strain_channel: StrainChannel {
                volts: ChannelCalibration {
                    gain: volts_per_count / suite.strain.amp_gain,
                    offset: 0.0,
                },
                v_excitation: suite.strain.v_excitation,
                r_limit: suite.strain.r_limit,
            },
            adc: suite.adc,
            residuals: FitResiduals::default(),
            warmup_cycles: MIN_WARMUP_CYCLES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_warmup(self.warmup_cycles)?;
        let r = &self.residuals;
        let values = [
            self.p_threshold_hat,
            self.slope_hat,
            self.kappa0_hat,
            self.r0_hat,
            self.r_lead_hat,
            self.d_neutral,
            self.pressure_channel.gain,
            self.pressure_channel.offset,
            self.strain_channel.volts.gain,
            self.strain_channel.volts.offset,
            r.pressure_curvature,
            r.strain_resistance,
            r.pressure_channel,
        ];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(
                "calibration record contains non-finite values".into(),
            ));
        }
        if !(self.r0_hat > 0.0) || !(self.d_neutral > 0.0) || !(self.slope_hat > 0.0) {
            return Err(Error::Config(
                "calibration record needs positive r0, d_neutral and slope".into(),
            ));
        }
        self.adc.validate()
    }

    /// Strain recovered from raw strain-channel counts.
    pub fn strain_from_counts(&self, counts: u16) -> f64 {
        let sc = &self.strain_channel;
        let v = sc.volts.apply(counts);
        let r = 2.0 * sc.r_limit * v / (sc.v_excitation - v);
        let stretch = ((r - self.r_lead_hat) / self.r0_hat).max(0.0);
        stretch.sqrt() - 1.0
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let rec: Self = serde_json::from_str(&text)?;
        rec.validate()?;
        Ok(rec)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Counts to gauge pressure from the sensor and ADC datasheet values.
pub fn nominal_pressure_channel(s: &PressureSensorParams, adc: &AdcParams) -> ChannelCalibration {
    ChannelCalibration {
        gain: adc.lsb() / s.amp_gain * s.full_scale_pressure / s.full_scale_voltage,
        offset: 0.0,
    }
}

pub fn check_warmup(cycles: u32) -> Result<()> {
    if cycles < MIN_WARMUP_CYCLES {
        return Err(Error::Warmup {
            cycles,
            required: MIN_WARMUP_CYCLES,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressureCurvatureSample {
    #[serde(rename = "pressure_pa")]
    pub pressure: f64,
    #[serde(rename = "curvature_per_m")]
    pub curvature: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrainResistanceSample {
    pub strain: f64,
    #[serde(rename = "resistance_ohm")]
    pub resistance: f64,
}

/// Ordinary least-squares line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub rms: f64,
    pub n: usize,
}

impl LineFit {
    /// Pressure at which the fitted line reaches `kappa0`.
    pub fn threshold_at(&self, kappa0: f64) -> Result<f64> {
        if !(self.slope > 0.0) {
            return Err(Error::Fit(format!(
                "non-positive slope {} cannot locate a threshold",
                self.slope
            )));
        }
        Ok((kappa0 - self.intercept) / self.slope)
    }
}

fn ols(points: &[(f64, f64)]) -> Result<LineFit> {
    let n = points.len();
    if n < 3 {
        return Err(Error::Fit(format!("need at least 3 samples, got {n}")));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::Fit("samples must be finite".into()));
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let (sxx, sxy) = points.iter().fold((0.0, 0.0), |(sxx, sxy), (x, y)| {
        let dx = x - mx;
        (sxx + dx * dx, sxy + dx * (y - my))
    });
    let scale = points
        .iter()
        .map(|p| p.0.abs())
        .fold(0.0, f64::max)
        .max(1.0);
    if sxx <= (1e-12 * scale).powi(2) * nf {
        return Err(Error::Fit("design matrix is rank deficient".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points
        .iter()
        .map(|(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum();
    Ok(LineFit {
        slope,
        intercept,
        rms: (sse / nf).sqrt(),
        n,
    })
}

/// Fit `curvature = slope * pressure + intercept` over samples with
/// `pressure >= p_min_fit`.
pub fn fit_pressure_curvature(
    samples: &[PressureCurvatureSample],
    p_min_fit: f64,
) -> Result<LineFit> {
    let points: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.pressure >= p_min_fit)
        .map(|s| (s.pressure, s.curvature))
        .collect();
    ols(&points)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResistanceFit {
    #[serde(rename = "r0_ohm")]
    pub r0: f64,
    #[serde(rename = "r_lead_ohm")]
    pub r_lead: f64,
    #[serde(rename = "rms_ohm")]
    pub rms: f64,
}

pub fn fit_strain_resistance(samples: &[StrainResistanceSample]) -> Result<ResistanceFit> {
    if samples.iter().any(|s| !(s.strain > -1.0)) {
        return Err(Error::Fit("strain samples must exceed -1".into()));
    }
    let mut distinct: Vec<f64> = samples.iter().map(|s| s.strain).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 distinct strain values, got {}",
            distinct.len()
        )));
    }
    let points: Vec<(f64, f64)> = samples
        .iter()
        .map(|s| ((1.0 + s.strain).powi(2), s.resistance))
        .collect();
    let line = ols(&points)?;
    Ok(ResistanceFit {
        r0: line.slope,
        r_lead: line.intercept,
        rms: line.rms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelFit {
    pub calibration: ChannelCalibration,
    #[serde(rename = "rms_pa")]
    pub rms: f64,
}

/// Fit the actuator pressure channel against the reference sensor, which
/// is plumbed to the same line during calibration. Frames with saturated
/// counts are ignored; the unsaturated frames must span at least half of
/// the sensor's range.
pub fn calibrate_channel_against_reference(
    frames: &[SensorFrame],
    sensor: &PressureSensorParams,
    adc: &AdcParams,
) -> Result<ChannelFit> {
    let points: Vec<(f64, f64)> = frames
        .iter()
        .filter(|f| !adc.is_saturated(f.pressure_counts))
        .map(|f| (f64::from(f.pressure_counts), f.reference_pressure))
        .collect();
    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.1), hi.max(p.1))
        });
    if points.is_empty() || hi - lo < 0.5 * sensor.full_scale_pressure {
        return Err(Error::Fit(format!(
            "reference pressures span {:.0} Pa, need at least half of {:.0} Pa",
            (hi - lo).max(0.0),
            sensor.full_scale_pressure
        )));
    }
    let line = ols(&points)?;
    Ok(ChannelFit {
        calibration: ChannelCalibration {
            gain: line.slope,
            offset: line.intercept,
        },
        rms: line.rms,
    })
}

/// Logged data from one calibration session of one actuator.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRun {
    pub warmup_cycles: u32,
    pub pressure_curvature: Vec<PressureCurvatureSample>,
    pub strain_resistance: Vec<StrainResistanceSample>,
    pub channel_frames: Vec<SensorFrame>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Lower pressure bound of the curvature line fit, Pa.
    pub p_min_fit: f64,
    /// Curvature assigned to the threshold pressure, 1/m.
    pub kappa0: f64,
    pub d_neutral: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            p_min_fit: 30_000.0,
            kappa0: 1.0,
            d_neutral: ActuatorParams::default().d_neutral,
        }
    }
}

/// Run all fits over a calibration session.
pub fn calibrate(
    run: &CalibrationRun,
    suite: &SensorSuite,
    opts: &FitOptions,
) -> Result<CalibrationRecord> {
    check_warmup(run.warmup_cycles)?;
    let line = fit_pressure_curvature(&run.pressure_curvature, opts.p_min_fit)?;
    let gauge = fit_strain_resistance(&run.strain_resistance)?;
    let channel =
        calibrate_channel_against_reference(&run.channel_frames, &suite.pressure, &suite.adc)?;
    let nominal_params = ActuatorParams {
        d_neutral: opts.d_neutral,
        ..Default::default()
    };
    let mut rec = CalibrationRecord::nominal(&nominal_params, suite);
    rec.p_threshold_hat = line.threshold_at(opts.kappa0)?;
    rec.slope_hat = line.slope;
    rec.kappa0_hat = opts.kappa0;
    rec.r0_hat = gauge.r0;
    rec.r_lead_hat = gauge.r_lead;
    rec.pressure_channel = channel.calibration;
    rec.residuals = FitResiduals {
        pressure_curvature: line.rms,
        strain_resistance: gauge.rms,
        pressure_channel: channel.rms,
    };
    rec.warmup_cycles = run.warmup_cycles;
    Ok(rec)
}

/// Bench setup for a simulated calibration session.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchConfig {
    pub warmup_cycles: u32,
    pub dt: f64,
    /// Pressure staircase: first level, step and last level, Pa.
    pub first_level: f64,
    pub level_step: f64,
    pub last_level: f64,
    /// Wait at each level before sampling, s.
    pub settle: f64,
    pub samples_per_level: usize,
    /// Noise of the image-based curvature measurement, 1/m.
    pub curvature_sigma: f64,
    /// Noise of the bench ohmmeter.
    pub resistance_sigma: f64,
    /// Noise of the reference pressure sensor, Pa.
    pub reference_sigma: f64,
    /// Ambient drift during the session, Pa.
    pub atmosphere_offset: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            warmup_cycles: MIN_WARMUP_CYCLES,
            dt: 0.002,
            first_level: 1_000.0,
            level_step: 2_000.0,
            last_level: 63_000.0,
            settle: 2.5,
            samples_per_level: 5,
            curvature_sigma: 0.2,
            resistance_sigma: 0.01,
            reference_sigma: 20.0,
            atmosphere_offset: 0.0,
        }
    }
}

/// Simulate a calibration session: warm-up inflations followed by a slow
/// pressure staircase, logging imaged curvature, gauge resistance and
/// channel frames against the reference sensor.
pub fn simulate_calibration_run(
    params: &ActuatorParams,
    suite: &SensorSuite,
    bench: &BenchConfig,
    seed: u64,
) -> Result<CalibrationRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut circuit = PneumaticCircuit::new(1);
    circuit.atmosphere_offset = bench.atmosphere_offset;
    let mut state = ActuatorState::default();
    let dt = bench.dt;

    let advance =
        |state: &mut ActuatorState, circuit: &PneumaticCircuit, secs: f64| -> Result<()> {
            let n = (secs / dt).round() as usize;
            for _ in 0..n {
                *state = physics::step(params, state, circuit, 0, None, dt)?;
            }
            Ok(())
        };

    let full = 0.95 * circuit.pump_pressure.min(params.p_max);
    let mut warmup_cycles = 0;
    for _ in 0..bench.warmup_cycles {
        circuit.valves[0] = ValvePair {
            inlet: true,
            vent: false,
        };
        while state.pressure < full {
            advance(&mut state, &circuit, dt)?;
        }
        circuit.valves[0] = ValvePair {
            inlet: false,
            vent: true,
        };
        while state.pressure > 200.0 {
            advance(&mut state, &circuit, dt)?;
        }
        warmup_cycles += 1;
    }
    circuit.valves[0] = ValvePair::CLOSED;
    advance(&mut state, &circuit, 5.0 * params.tau_deflate)?;

    let mut run = CalibrationRun {
        warmup_cycles,
        pressure_curvature: Vec::new(),
        strain_resistance: Vec::new(),
        channel_frames: Vec::new(),
    };
    let mut level = bench.first_level;
    let mut t = 0.0;
    while level <= bench.last_level + 1e-9 {
        circuit.valves[0] = ValvePair {
            inlet: true,
            vent: false,
        };
        while state.pressure < level {
            advance(&mut state, &circuit, dt)?;
            t += dt;
        }
        circuit.valves[0] = ValvePair::CLOSED;
        advance(&mut state, &circuit, bench.settle)?;
        t += bench.settle;
        for _ in 0..bench.samples_per_level {
            advance(&mut state, &circuit, 0.1)?;
            t += 0.1;
            let normal = |rng: &mut ChaCha8Rng| rng.sample::<f64, _>(StandardNormal);
            let reference =
                state.pressure + bench.atmosphere_offset + bench.reference_sigma * normal(&mut rng);
            run.pressure_curvature.push(PressureCurvatureSample {
                pressure: state.pressure + bench.reference_sigma * normal(&mut rng),
                curvature: state.curvature + bench.curvature_sigma * normal(&mut rng),
            });
            let strain = state.curvature * params.d_neutral;
            let resistance = crate::sensors::strain_to_resistance(strain, &suite.strain)?
                + bench.resistance_sigma * normal(&mut rng);
            run.strain_resistance
                .push(StrainResistanceSample { strain, resistance });
            let mut frame = suite.sample(t, &state, params, bench.atmosphere_offset, &mut rng)?;
            frame.reference_pressure = reference;
            run.channel_frames.push(frame);
        }
        level += bench.level_step;
    }
    Ok(run)
}
