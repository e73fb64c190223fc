//! Grasp analysis on (pressure, strain) telemetry.
//!
//! An unobstructed finger traces a fixed orbit in the pressure/strain
//! plane. An object in its path stops the curvature at the object's
//! radius, so strain flattens while the controller keeps raising pressure.
//! [`classify_grasp`] compares a grasp against a recorded empty grasp and
//! looks for that flat-strain, rising-pressure signature.
//!
//! [`detect_conformation_changes`] flags abrupt steps with a robust
//! statistic: the difference of adjacent short block means, normalized by
//! the median absolute deviation of the same statistic over a trailing
//! window. Slow inflation trends cancel in the median.

use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationRecord;
use crate::error::{Error, Result};
use crate::units::PSI;

/// Minimum number of samples for any orbit analysis.
pub const MIN_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSample {
    #[serde(rename = "t_s")]
    pub t: f64,
    #[serde(rename = "pressure_pa")]
    pub pressure: f64,
    pub strain: f64,
}

/// Time-ordered (pressure, strain) trajectory of one finger.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOrbit {
    samples: Vec<PhaseSample>,
    /// Covers both inflation and deflation.
    pub complete: bool,
}

impl PhaseOrbit {
    pub fn new(samples: Vec<PhaseSample>, complete: bool) -> Result<Self> {
        if samples
            .iter()
            .any(|s| !s.t.is_finite() || !s.pressure.is_finite() || !s.strain.is_finite())
        {
            return Err(Error::domain("orbit samples must be finite"));
        }
        if let Some(w) = samples.windows(2).find(|w| w[1].t <= w[0].t) {
            return Err(Error::domain(format!(
                "orbit time not strictly increasing at t = {} s",
                w[1].t
            )));
        }
        Ok(Self { samples, complete })
    }

    pub fn samples(&self) -> &[PhaseSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn require_samples(&self, n: usize) -> Result<()> {
        if self.samples.len() < n {
            return Err(Error::InsufficientData(format!(
                "orbit has {} samples, need at least {n}",
                self.samples.len()
            )));
        }
        Ok(())
    }

    fn median_dt(&self) -> f64 {
        let mut dts: Vec<f64> = self.samples.windows(2).map(|w| w[1].t - w[0].t).collect();
        median(&mut dts)
    }

    fn is_uniform(&self) -> bool {
        let dt = self.median_dt();
        self.samples
            .windows(2)
            .all(|w| ((w[1].t - w[0].t) - dt).abs() <= 0.01 * dt)
    }

    /// Linear resampling onto a uniform grid starting at the first sample.
    pub fn resample(&self, dt: f64) -> Result<Self> {
        self.require_samples(2)?;
        if !(dt > 0.0) {
            return Err(Error::domain("resampling period must be positive"));
        }
        let t0 = self.samples[0].t;
        let t_end = self.samples[self.samples.len() - 1].t;
        let n = ((t_end - t0) / dt).floor() as usize + 1;
        let mut out = Vec::with_capacity(n);
        let mut j = 0;
        for i in 0..n {
            let t = t0 + i as f64 * dt;
            while j + 2 < self.samples.len() && self.samples[j + 1].t < t {
                j += 1;
            }
            let (a, b) = (self.samples[j], self.samples[j + 1]);
            let w = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
            out.push(PhaseSample {
                t,
                pressure: a.pressure + w * (b.pressure - a.pressure),
                strain: a.strain + w * (b.strain - a.strain),
            });
        }
        Self::new(out, self.complete)
    }
}

/// Shoelace area of the closed (pressure, strain) polygon. Positive for
/// counterclockwise traversal.
pub fn signed_area(orbit: &PhaseOrbit) -> f64 {
    let s = orbit.samples();
    if s.len() < 3 {
        return 0.0;
    }
    let (x0, y0) = (s[0].pressure, s[0].strain);
    let twice: f64 = s
        .iter()
        .zip(s.iter().cycle().skip(1))
        .map(|(a, b)| (a.pressure - x0) * (b.strain - y0) - (b.pressure - x0) * (a.strain - y0))
        .sum();
    0.5 * twice
}

/// Expected strain of an unobstructed finger as a function of pressure,
/// taken from the upper envelope of a recorded empty grasp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmptyGraspReference {
    pressures: Vec<f64>,
    strains: Vec<f64>,
    pub tolerance_band: f64,
}

impl EmptyGraspReference {
    pub fn from_orbit(orbit: &PhaseOrbit, tolerance_band: f64) -> Result<Self> {
        orbit.require_samples(MIN_SAMPLES)?;
        if !(tolerance_band >= 0.0) {
            return Err(Error::domain("tolerance band must be non-negative"));
        }
        let mut pts: Vec<(f64, f64)> = orbit
            .samples()
            .iter()
            .map(|s| (s.pressure, s.strain))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut pressures: Vec<f64> = Vec::with_capacity(pts.len() + 1);
        let mut strains: Vec<f64> = Vec::with_capacity(pts.len() + 1);
        let mut running = f64::NEG_INFINITY;
        for (p, e) in pts {
            running = running.max(e);
            if pressures.last() == Some(&p) {
                *strains.last_mut().unwrap() = running;
            } else {
                pressures.push(p);
                strains.push(running);
            }
        }
        if pressures[0] > 0.0 {
            pressures.insert(0, 0.0);
            strains.insert(0, strains[0]);
        }
        Ok(Self {
            pressures,
            strains,
            tolerance_band,
        })
    }

    /// Highest pressure covered by the recording.
    pub fn p_hold(&self) -> f64 {
        *self.pressures.last().unwrap()
    }

    /// Interpolated empty-grasp strain, clamped at the ends of the domain.
    pub fn expected_strain(&self, p: f64) -> f64 {
        let n = self.pressures.len();
        if p <= self.pressures[0] {
            return self.strains[0];
        }
        if p >= self.pressures[n - 1] {
            return self.strains[n - 1];
        }
        let i = self.pressures.partition_point(|&x| x <= p);
        let (p0, p1) = (self.pressures[i - 1], self.pressures[i]);
        let (e0, e1) = (self.strains[i - 1], self.strains[i]);
        e0 + (e1 - e0) * (p - p0) / (p1 - p0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraspOutcome {
    Empty,
    ObjectGrasped,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspVerdict {
    pub outcome: GraspOutcome,
    /// Present iff the outcome is `ObjectGrasped`, m.
    #[serde(rename = "estimated_radius_m")]
    pub estimated_radius: Option<f64>,
    pub strain_deficit: f64,
    #[serde(rename = "hold_pressure_pa")]
    pub hold_pressure: f64,
    pub hold_strain: f64,
    /// Pressure gained while strain stayed flat, Pa.
    #[serde(rename = "flat_strain_pressure_rise_pa")]
    pub flat_strain_pressure_rise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierConfig {
    /// Controller pressure deadband, Pa; the orbit must reach
    /// `p_threshold + 2 * deadband`.
    pub deadband: f64,
    /// Samples within this distance of the peak pressure belong to the hold, Pa.
    pub hold_band: f64,
    /// Trailing part of the hold used for the hold strain, s.
    pub hold_window: f64,
    /// Strain excursion still counted as flat.
    pub flat_band: f64,
    /// Pressure rise under flat strain required for the grasp signature, Pa.
    pub min_pressure_rise: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            deadband: 0.15 * PSI,
            hold_band: 2_000.0,
            hold_window: 0.5,
            flat_band: 1.5e-3,
            min_pressure_rise: 0.5 * PSI,
        }
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn classify_grasp(
    orbit: &PhaseOrbit,
    reference: &EmptyGraspReference,
    cal: &CalibrationRecord,
    cfg: &ClassifierConfig,
) -> Result<GraspVerdict> {
    orbit.require_samples(MIN_SAMPLES)?;
    let s = orbit.samples();
    let peak = s
        .iter()
        .map(|x| x.pressure)
        .fold(f64::NEG_INFINITY, f64::max);
    let required = cal.p_threshold_hat + 2.0 * cfg.deadband;
    if peak < required {
        return Err(Error::InsufficientData(format!(
            "orbit peaks at {peak:.0} Pa, below the hold pressure {required:.0} Pa"
        )));
    }

    // the final hold: the last contiguous run near the peak pressure
    let in_hold = |x: &PhaseSample| x.pressure >= peak - cfg.hold_band;
    let end = s.iter().rposition(in_hold).unwrap();
    let mut start = end;
    while start > 0 && in_hold(&s[start - 1]) {
        start -= 1;
    }
    let t_end = s[end].t;
    let window: Vec<&PhaseSample> = s[start..=end]
        .iter()
        .filter(|x| x.t >= t_end - cfg.hold_window)
        .collect();
    let hold_strain = median(&mut window.iter().map(|x| x.strain).collect::<Vec<_>>());
    let hold_pressure = median(&mut window.iter().map(|x| x.pressure).collect::<Vec<_>>());

    let mut flat_start = end;
    while flat_start > 0 && (s[flat_start - 1].strain - hold_strain).abs() <= cfg.flat_band {
        flat_start -= 1;
    }
    let flat_min_pressure = s[flat_start..=end]
        .iter()
        .map(|x| x.pressure)
        .fold(f64::INFINITY, f64::min);
    let flat_strain_pressure_rise = (hold_pressure - flat_min_pressure).max(0.0);

    let strain_deficit = reference.expected_strain(hold_pressure) - hold_strain;
    let signature = flat_strain_pressure_rise >= cfg.min_pressure_rise;
    let (outcome, estimated_radius) = if strain_deficit <= reference.tolerance_band {
        (GraspOutcome::Empty, None)
    } else if signature && hold_strain > 0.0 {
        let curvature = hold_strain / cal.d_neutral;
        (GraspOutcome::ObjectGrasped, Some(1.0 / curvature))
    } else {
        (GraspOutcome::Indeterminate, None)
    };
    Ok(GraspVerdict {
        outcome,
        estimated_radius,
        strain_deficit,
        hold_pressure,
        hold_strain,
        flat_strain_pressure_rise,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpKind {
    PressureJump,
    CurvatureJump,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformationEvent {
    #[serde(rename = "t_s")]
    pub t: f64,
    pub kind: JumpKind,
    /// Peak normalized jump statistic.
    pub statistic: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpDetectorConfig {
    /// Statistic threshold.
    pub k_jump: f64,
    /// Trailing window for the robust scale, s.
    pub window: f64,
    /// Events closer than this merge, s.
    pub merge: f64,
    /// Samples per block mean; 1 gives the plain first difference.
    pub block: usize,
    /// Scale floors so quantized flat signals do not divide by zero.
    pub pressure_floor: f64,
    pub strain_floor: f64,
}

impl Default for JumpDetectorConfig {
    fn default() -> Self {
        Self {
            k_jump: 6.0,
            window: 1.0,
            merge: 0.05,
            block: 4,
            pressure_floor: 30.0,
            strain_floor: 2e-4,
        }
    }
}

/// Candidate (index, statistic) pairs of one channel.
fn channel_jumps(x: &[f64], w: usize, cfg: &JumpDetectorConfig, floor: f64) -> Vec<(usize, f64)> {
    let m = cfg.block.max(1);
    let n = x.len();
    let mut prefix = vec![0.0; n + 1];
    for (i, v) in x.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    let mean = |a: usize, b: usize| (prefix[b] - prefix[a]) / (b - a) as f64;
    // d[i] compares the block ending at i with the block starting at i
    let mut d = vec![0.0; n + 1];
    for (i, di) in d.iter_mut().enumerate().take(n - m + 1).skip(m) {
        *di = mean(i, i + m) - mean(i - m, i);
    }
    let mut out = Vec::new();
    let mut hist = Vec::with_capacity(w + 1);
    for i in (2 * m + w)..=(n - m) {
        hist.clear();
        hist.extend_from_slice(&d[i - m - w..=i - m]);
        let med = median(&mut hist);
        for h in hist.iter_mut() {
            *h = (*h - med).abs();
        }
        let mad = median(&mut hist);
        let scale = (1.4826 * mad).max(floor);
        let stat = (d[i] - med).abs() / scale;
        if stat > cfg.k_jump {
            out.push((i, stat));
        }
    }
    out
}

/// Abrupt steps in pressure or strain.
pub fn detect_conformation_changes(
    stream: &PhaseOrbit,
    cfg: &JumpDetectorConfig,
) -> Result<Vec<ConformationEvent>> {
    stream.require_samples(MIN_SAMPLES)?;
    let uniform;
    let stream = if stream.is_uniform() {
        stream
    } else {
        uniform = stream.resample(stream.median_dt())?;
        &uniform
    };
    let dt = stream.median_dt();
    let w = (cfg.window / dt).round().max(1.0) as usize;
    let m = cfg.block.max(1);
    let s = stream.samples();
    if s.len() < w + 3 * m {
        return Err(Error::InsufficientData(format!(
            "stream of {} samples is shorter than the {:.3} s window",
            s.len(),
            cfg.window
        )));
    }
    let pressure: Vec<f64> = s.iter().map(|x| x.pressure).collect();
    let strain: Vec<f64> = s.iter().map(|x| x.strain).collect();
    let mut candidates: Vec<(usize, f64, JumpKind)> =
        channel_jumps(&pressure, w, cfg, cfg.pressure_floor)
            .into_iter()
            .map(|(i, st)| (i, st, JumpKind::PressureJump))
            .chain(
                channel_jumps(&strain, w, cfg, cfg.strain_floor)
                    .into_iter()
                    .map(|(i, st)| (i, st, JumpKind::CurvatureJump)),
            )
            .collect();
    candidates.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.total_cmp(&a.1)));

    let mut events: Vec<ConformationEvent> = Vec::new();
    let mut last_t = f64::NEG_INFINITY;
    for (i, stat, kind) in candidates {
        let t = s[i].t;
        match events.last_mut() {
            Some(ev) if t - last_t <= cfg.merge => {
                if stat > ev.statistic {
                    *ev = ConformationEvent {
                        t,
                        kind,
                        statistic: stat,
                    };
                }
            }
            _ => events.push(ConformationEvent {
                t,
                kind,
                statistic: stat,
            }),
        }
        last_t = t;
    }
    Ok(events)
}

/// Earliest time at which the strain's rolling standard deviation over the
/// preceding `window` seconds is at most `sigma_max` with no conformation
/// event inside that window.
pub fn detect_settled(stream: &PhaseOrbit, window: f64, sigma_max: f64) -> Option<f64> {
    let s = stream.samples();
    if !(window > 0.0) || s.len() < 2 {
        return None;
    }
    let events =
        detect_conformation_changes(stream, &JumpDetectorConfig::default()).unwrap_or_default();
    let t0 = s[0].t;
    let shift = s[0].strain;
    let mut sum = vec![0.0; s.len() + 1];
    let mut sq = vec![0.0; s.len() + 1];
    for (i, x) in s.iter().enumerate() {
        let v = x.strain - shift;
        sum[i + 1] = sum[i] + v;
        sq[i + 1] = sq[i] + v * v;
    }
    let eps = 1e-9 * window;
    let mut lo = 0;
    for (i, x) in s.iter().enumerate() {
        if x.t - t0 < window - eps {
            continue;
        }
        while s[lo].t < x.t - window - eps {
            lo += 1;
        }
        let n = (i + 1 - lo) as f64;
        let mean = (sum[i + 1] - sum[lo]) / n;
        let var = ((sq[i + 1] - sq[lo]) / n - mean * mean).max(0.0);
        if var.sqrt() <= sigma_max
            && !events
                .iter()
                .any(|e| e.t >= x.t - window - eps && e.t <= x.t + eps)
        {
            return Some(x.t);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn stream(n: usize, dt: f64, f: impl Fn(f64) -> (f64, f64)) -> PhaseOrbit {
        let samples = (0..n)
            .map(|i| {
                let t = i as f64 * dt;
                let (pressure, strain) = f(t);
                PhaseSample {
                    t,
                    pressure,
                    strain,
                }
            })
            .collect();
        PhaseOrbit::new(samples, false).unwrap()
    }

    #[test]
    fn rejects_non_increasing_time() {
        let s = vec![
            PhaseSample {
                t: 0.0,
                pressure: 0.0,
                strain: 0.0,
            },
            PhaseSample {
                t: 0.0,
                pressure: 1.0,
                strain: 0.0,
            },
        ];
        assert!(PhaseOrbit::new(s, false).is_err());
    }

    #[test]
    fn square_orbit_area_sign() {
        let pts = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        let samples: Vec<_> = pts
            .iter()
            .enumerate()
            .map(|(i, &(p, e))| PhaseSample {
                t: i as f64,
                pressure: p,
                strain: e,
            })
            .collect();
        let ccw = PhaseOrbit::new(samples.clone(), true).unwrap();
        assert!((signed_area(&ccw) - 1.0).abs() < 1e-12);
        let cw_samples: Vec<_> = samples
            .iter()
            .rev()
            .enumerate()
            .map(|(i, s)| PhaseSample { t: i as f64, ..*s })
            .collect();
        let cw = PhaseOrbit::new(cw_samples, true).unwrap();
        assert!((signed_area(&cw) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn reference_is_monotone_envelope() {
        let o = stream(200, 0.01, |t| {
            let p = 50_000.0 * (1.0 - (t - 1.0).abs());
            (p, p * 1e-5 + if t > 1.0 { 0.01 } else { 0.0 })
        });
        let r = EmptyGraspReference::from_orbit(&o, 0.01).unwrap();
        let mut last = f64::NEG_INFINITY;
        for i in 0..100 {
            let e = r.expected_strain(i as f64 * 600.0);
            assert!(e >= last);
            last = e;
        }
        assert_eq!(r.expected_strain(-5.0), r.expected_strain(0.0));
    }

    #[test]
    fn constant_stream_has_no_events() {
        let o = stream(2000, 0.005, |_| (40_000.0, 0.05));
        let ev = detect_conformation_changes(&o, &JumpDetectorConfig::default()).unwrap();
        assert!(ev.is_empty());
    }

    #[test]
    fn short_stream_is_insufficient() {
        let o = stream(50, 0.005, |_| (40_000.0, 0.05));
        assert!(matches!(
            detect_conformation_changes(&o, &JumpDetectorConfig::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn two_steps_two_events_in_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sigma = 1e-3;
        let noise: Vec<f64> = (0..4000)
            .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let o = stream(4000, 0.005, |t| {
            let i = (t / 0.005).round() as usize;
            let step = if t >= 8.0 { 10.0 * sigma } else { 0.0 }
                + if t >= 15.0 { -10.0 * sigma } else { 0.0 };
            (40_000.0, 0.05 + step + noise[i])
        });
        let ev = detect_conformation_changes(&o, &JumpDetectorConfig::default()).unwrap();
        assert_eq!(ev.len(), 2, "{ev:?}");
        assert!((ev[0].t - 8.0).abs() <= 1.0);
        assert!((ev[1].t - 15.0).abs() <= 1.0);
        assert!(ev.iter().all(|e| e.kind == JumpKind::CurvatureJump));
    }

    #[test]
    fn settle_examples() {
        let o = stream(1000, 0.01, |_| (40_000.0, 0.05));
        assert_eq!(detect_settled(&o, 1.0, 1e-4), Some(1.0));
        let osc = stream(1000, 0.01, |t| (40_000.0, 0.05 + 0.01 * (6.0 * t).sin()));
        assert_eq!(detect_settled(&osc, 1.0, 1e-4), None);
        assert_eq!(detect_settled(&o, 0.0, 1e-4), None);
    }

    #[test]
    fn resample_is_uniform() {
        let samples: Vec<_> = [0.0, 0.1, 0.25, 0.3, 0.5]
            .iter()
            .map(|&t| PhaseSample {
                t,
                pressure: t * 10.0,
                strain: t,
            })
            .collect();
        let o = PhaseOrbit::new(samples, false).unwrap();
        let r = o.resample(0.05).unwrap();
        assert_eq!(r.len(), 11);
        assert!((r.samples()[3].pressure - 1.5).abs() < 1e-12);
    }
}
