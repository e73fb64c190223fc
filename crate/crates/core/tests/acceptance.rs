//! Acceptance suite: one PASS/FAIL line per criterion.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use softgrip_core::calibration::{
    calibrate, simulate_calibration_run, BenchConfig, CalibrationRecord, FitOptions,
};
use softgrip_core::controller::{
    fsm_tick, ControllerConfig, FsmMode, FsmState, HandController, Measurement, TargetKind,
};
use softgrip_core::grasp::{
    detect_conformation_changes, detect_settled, signed_area, GraspOutcome, JumpDetectorConfig,
    PhaseOrbit, PhaseSample,
};
use softgrip_core::physics::{
    self, steady_state_curvature, ActuatorParams, ActuatorState, PneumaticCircuit, ValvePair,
};
use softgrip_core::protocol::{
    encode_frame, ActuatorId, BusConfig, Command, Decoder, DuplexBus, Frame, HandFirmware,
    HostClient, Request, RetryPolicy, MAX_PAYLOAD,
};
use softgrip_core::runner::{run_scenario, simulate, write_outputs, Event, Simulation};
use softgrip_core::scenario::Scenario;
use softgrip_core::sensors::{
    pressure_to_counts, resistance_to_counts, strain_to_resistance, SensorSuite,
};
use softgrip_core::telemetry::TelemetryRow;
use softgrip_core::units::PSI;

// Pinned tolerances.
const CAL_SEEDS: u64 = 100;
const CAL_REQUIRED_PASSES: usize = 95;
const CAL_REL_TOL: f64 = 0.05;
const CAL_MAX_RUNTIME_S: f64 = 30.0;
const FLAT_SLOPE_FRACTION: f64 = 0.01;
const SIGNATURE_RISE_PA: f64 = 0.5 * PSI;
const RADIUS_REL_TOL: f64 = 0.10;
const ORBIT_DRAWS: u64 = 20;
const FSM_TICKS: usize = 1_000_000;
const SERVO_TIMEOUT_S: f64 = 10.0;
const ROUND_TRIP_POINTS: usize = 1000;
const FUZZ_BYTES: usize = 10_000_000;
const ROUND_TRIP_FRAMES: usize = 100_000;
const RETRY_TRIALS: u64 = 100;
const RETRY_LOSS: f64 = 0.10;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn scenario(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.json"));
    Scenario::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn finger_rows(sim: &Simulation, finger: usize) -> Vec<TelemetryRow> {
    sim.telemetry
        .iter()
        .filter(|r| r.finger == finger)
        .copied()
        .collect()
}

fn vent_time(s: &Scenario) -> f64 {
    s.commands
        .iter()
        .find(|c| c.command == softgrip_core::scenario::CommandName::Vent)
        .map(|c| c.t_s)
        .unwrap_or(s.duration_s)
}

fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Pressure gained over the longest run of 1 s windows, ending at the vent,
/// in which strain stays flat.
fn flat_strain_pressure_rise(rows: &[TelemetryRow], vent: f64, peak_strain: f64) -> f64 {
    let hold: Vec<&TelemetryRow> = rows.iter().filter(|r| r.t < vent).collect();
    let per_window = hold.iter().filter(|r| r.t < 1.0).count().max(2);
    let flat_limit = FLAT_SLOPE_FRACTION * peak_strain;
    let mut first_flat = None;
    let mut end = hold.len();
    while end >= per_window {
        let w = &hold[end - per_window..end];
        let t: Vec<f64> = w.iter().map(|r| r.t).collect();
        let e: Vec<f64> = w.iter().map(|r| r.strain).collect();
        if ols_slope(&t, &e).abs() >= flat_limit {
            break;
        }
        first_flat = Some(end - per_window);
        end -= per_window / 4;
    }
    match first_flat {
        None => 0.0,
        Some(start) => {
            let mean_p =
                |w: &[&TelemetryRow]| w.iter().map(|r| r.pressure).sum::<f64>() / w.len() as f64;
            let last = &hold[hold.len() - per_window..];
            let first = &hold[start..start + per_window];
            mean_p(last) - mean_p(first)
        }
    }
}

fn c1_threshold_anchor() -> Outcome {
    let p = ActuatorParams::default();
    let at = steady_state_curvature(30_000.0, &p).map_err(|e| e.to_string())?;
    if at != 1.0 {
        return Err(format!("kappa(30 kPa) = {at}"));
    }
    for i in 0..3000 {
        let pr = i as f64 * 10.0;
        let k = steady_state_curvature(pr, &p).map_err(|e| e.to_string())?;
        if k != 0.0 {
            return Err(format!("kappa({pr} Pa) = {k}, expected 0"));
        }
    }
    Ok("kappa(30 kPa) = 1.0 exactly; 0 on 3000 sub-threshold points".into())
}

fn c2_calibration_identifiability() -> Outcome {
    let start = Instant::now();
    let params = ActuatorParams::default();
    let suite = SensorSuite::default();
    let mut passes = 0;
    let mut worst = (0.0f64, 0.0f64);
    for seed in 0..CAL_SEEDS {
        let run = simulate_calibration_run(&params, &suite, &BenchConfig::default(), seed)
            .map_err(|e| e.to_string())?;
        let rec = calibrate(&run, &suite, &FitOptions::default()).map_err(|e| e.to_string())?;
        let ds = (rec.slope_hat / params.slope - 1.0).abs();
        let dp = (rec.p_threshold_hat / params.p_threshold - 1.0).abs();
        worst = (worst.0.max(ds), worst.1.max(dp));
        if ds <= CAL_REL_TOL && dp <= CAL_REL_TOL {
            passes += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!(
        "{passes}/{CAL_SEEDS} seeds within {:.0}% (worst slope {:.2}%, threshold {:.2}%), {secs:.1} s",
        CAL_REL_TOL * 100.0,
        worst.0 * 100.0,
        worst.1 * 100.0
    );
    if passes >= CAL_REQUIRED_PASSES && secs < CAL_MAX_RUNTIME_S {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c3_grasp_signature() -> Outcome {
    let mut lines = Vec::new();
    for (name, expect) in [("cylinder_r074", true), ("empty_grasp", false)] {
        let s = scenario(name);
        let sim = simulate(&s).map_err(|e| e.to_string())?;
        for f in 0..s.actuators.len() {
            let rows = finger_rows(&sim, f);
            let peak = rows.iter().map(|r| r.strain).fold(0.0, f64::max);
            let rise = flat_strain_pressure_rise(&rows, vent_time(&s), peak);
            let present = rise >= SIGNATURE_RISE_PA;
            if present != expect {
                return Err(format!(
                    "{name} finger {f}: flat-strain pressure rise {rise:.0} Pa"
                ));
            }
            if f == 0 {
                lines.push(format!(
                    "{name}: flat-strain pressure rise {:.2} PSI",
                    rise / PSI
                ));
            }
        }
    }
    Ok(lines.join("; "))
}

fn hold_strain(sim: &Simulation, finger: usize, vent: f64) -> f64 {
    median(
        finger_rows(sim, finger)
            .iter()
            .filter(|r| r.t >= vent - 0.5 && r.t < vent)
            .map(|r| r.strain)
            .collect(),
    )
}

fn c4_monotone_attenuation() -> Outcome {
    let mut holds = Vec::new();
    for name in [
        "empty_grasp",
        "cylinder_r020",
        "cylinder_r040",
        "cylinder_r074",
    ] {
        let s = scenario(name);
        let sim = simulate(&s).map_err(|e| e.to_string())?;
        holds.push((name, hold_strain(&sim, 0, vent_time(&s))));
    }
    let detail = holds
        .iter()
        .map(|(n, h)| format!("{n} {h:.4}"))
        .collect::<Vec<_>>()
        .join(", ");
    if holds.windows(2).all(|w| w[1].1 < w[0].1) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c5_radius_estimation() -> Outcome {
    let mut parts = Vec::new();
    for (name, radius) in [
        ("cylinder_r020", 0.02),
        ("cylinder_r040", 0.04),
        ("cylinder_r074", 0.074),
    ] {
        let out = run_scenario(&scenario(name)).map_err(|e| e.to_string())?;
        for v in out.verdicts() {
            let Event::Verdict {
                finger,
                outcome,
                estimated_radius_m,
                ..
            } = v
            else {
                unreachable!()
            };
            let est = estimated_radius_m.unwrap_or(f64::NAN);
            if *outcome != Some(GraspOutcome::ObjectGrasped)
                || !((est / radius - 1.0).abs() <= RADIUS_REL_TOL)
            {
                return Err(format!("{name} finger {finger}: {outcome:?}, radius {est}"));
            }
            if *finger == 0 {
                parts.push(format!("{radius} m -> {est:.4} m"));
            }
        }
    }
    Ok(parts.join(", "))
}

fn c6_orbit_orientation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let suite = SensorSuite::default();
    let dt = 0.001;
    let mut min_area = f64::INFINITY;
    for draw in 0..ORBIT_DRAWS {
        let mut p = ActuatorParams {
            tau_inflate: rng.random_range(0.1..1.0),
            tau_deflate: rng.random_range(0.1..1.0),
            slope: rng.random_range(1.0e-3..4.0e-3),
            p_threshold: rng.random_range(20_000.0..40_000.0),
            k_fill: rng.random_range(0.2..0.5),
            k_vent: rng.random_range(0.5..1.2),
            ..Default::default()
        };
        let target = 8.0 * PSI;
        let kappa_peak = steady_state_curvature(target, &p).map_err(|e| e.to_string())?;
        // keep the strain channel unsaturated
        p.d_neutral = p.d_neutral.min(0.15 / kappa_peak);
        let cal = CalibrationRecord::nominal(&p, &suite);
        let mut circuit = PneumaticCircuit::new(1);
        let mut state = ActuatorState::default();
        let mut samples = Vec::new();
        let steps = 30_000;
        for k in 0..steps {
            let t = k as f64 * dt;
            circuit.valves[0] = if t < 15.0 && state.pressure < target {
                ValvePair {
                    inlet: true,
                    vent: false,
                }
            } else if t < 15.0 {
                ValvePair::CLOSED
            } else {
                ValvePair {
                    inlet: false,
                    vent: true,
                }
            };
            if k % 5 == 0 {
                let frame = suite
                    .sample(t, &state, &p, 0.0, &mut rng)
                    .map_err(|e| e.to_string())?;
                let r = softgrip_core::sensors::counts_to_physical(&frame, &cal);
                samples.push(PhaseSample {
                    t,
                    pressure: r.pressure,
                    strain: r.strain,
                });
            }
            state = physics::step(&p, &state, &circuit, 0, None, dt).map_err(|e| e.to_string())?;
        }
        let orbit = PhaseOrbit::new(samples, true).map_err(|e| e.to_string())?;
        let area = signed_area(&orbit);
        if !(area > 0.0) {
            return Err(format!("draw {draw}: signed area {area} with {p:?}"));
        }
        min_area = min_area.min(area);
    }
    Ok(format!(
        "{ORBIT_DRAWS} draws, smallest signed area {min_area:.3} Pa"
    ))
}

fn c7_controller_safety() -> Outcome {
    let cfg = ControllerConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let modes = [
        FsmMode::Idle,
        FsmMode::Inflating,
        FsmMode::Venting,
        FsmMode::Holding,
        FsmMode::Fault,
    ];
    let (mut co_open, mut missed, mut overpressure) = (0usize, 0usize, 0usize);
    let mut fsm = FsmState::default();
    let mut t = 0.0;
    for i in 0..FSM_TICKS {
        if i % 97 == 0 {
            fsm.mode = modes[rng.random_range(0..modes.len())];
            fsm.target = if rng.random_bool(0.8) {
                let kind = if rng.random_bool(0.5) {
                    TargetKind::Pressure
                } else {
                    TargetKind::Curvature
                };
                let max = if kind == TargetKind::Pressure {
                    cfg.p_max
                } else {
                    cfg.kappa_max
                };
                Some(cfg.target(kind, rng.random_range(0.0..=max)).unwrap())
            } else {
                None
            };
            fsm.seek_started_t = t - rng.random_range(0.0..20.0);
        }
        t += rng.random_range(0.0..0.01);
        let m = Measurement {
            pressure: if rng.random_bool(0.005) {
                f64::NAN
            } else {
                rng.random_range(-0.2 * cfg.p_max..1.5 * cfg.p_max)
            },
            curvature: rng.random_range(0.0..250.0),
        };
        let (next, valves) = fsm_tick(&fsm, &m, t, &cfg);
        if valves.inlet && valves.vent {
            co_open += 1;
        }
        if m.pressure > cfg.p_max {
            overpressure += 1;
            if next.mode != FsmMode::Fault || !valves.vent || valves.inlet {
                missed += 1;
            }
        }
        fsm = next;
    }
    if co_open > 0 || missed > 0 {
        return Err(format!(
            "{co_open} co-open ticks, {missed} missed overpressure faults"
        ));
    }

    let s = Scenario::standard_grasp("servo", Vec::new());
    let sim = simulate(&s).map_err(|e| e.to_string())?;
    let target = 5516.0 * 10.0;
    let mut worst_time: f64 = 0.0;
    let mut worst_err: f64 = 0.0;
    for f in 0..s.actuators.len() {
        let hold = sim
            .telemetry
            .iter()
            .find(|r| r.finger == f && r.mode == FsmMode::Holding)
            .ok_or(format!("finger {f} never held"))?;
        worst_time = worst_time.max(hold.t - 0.5);
        worst_err = worst_err.max((hold.pressure - target).abs());
    }
    let detail = format!(
        "{FSM_TICKS} random ticks, 0 co-open, {overpressure} overpressure ticks all faulted; \
         8 PSI hold after {worst_time:.2} s with |error| {worst_err:.0} Pa"
    );
    if worst_time <= SERVO_TIMEOUT_S && worst_err <= cfg.pressure_deadband {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c8_sensor_round_trip() -> Outcome {
    let mut suite = SensorSuite::default();
    suite.strain.noise_sigma = 0.0;
    suite.pressure.noise_sigma = 0.0;
    let params = ActuatorParams::default();
    let cal = CalibrationRecord::nominal(&params, &suite);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let max = suite.adc.max_count();
    let (mut strain_n, mut pressure_n) = (0, 0);
    let mut worst = (0.0f64, 0.0f64);
    while strain_n < ROUND_TRIP_POINTS {
        let eps = rng.random_range(0.0..0.25);
        let r = strain_to_resistance(eps, &suite.strain).unwrap();
        let c = resistance_to_counts(r, &suite.strain, &suite.adc, &mut rng).unwrap();
        if c == 0 || c >= max {
            continue;
        }
        let lsb = cal.strain_from_counts(c + 1) - cal.strain_from_counts(c);
        let err = (cal.strain_from_counts(c) - eps).abs() / lsb;
        worst.0 = worst.0.max(err);
        strain_n += 1;
    }
    while pressure_n < ROUND_TRIP_POINTS {
        let p = rng.random_range(0.0..suite.pressure.full_scale_pressure);
        let c = pressure_to_counts(p, &suite.pressure, &suite.adc, &mut rng).unwrap();
        if c == 0 || c >= max {
            continue;
        }
        let err = (cal.pressure_channel.apply(c) - p).abs() / cal.pressure_channel.gain;
        worst.1 = worst.1.max(err);
        pressure_n += 1;
    }
    let detail = format!(
        "worst error {:.3} LSB strain, {:.3} LSB pressure over {ROUND_TRIP_POINTS} points each",
        worst.0, worst.1
    );
    if worst.0 <= 1.0 && worst.1 <= 1.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c9_protocol_robustness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut dec = Decoder::new();
    let mut fed = 0;
    let mut max_buffered = 0;
    let mut chunk = vec![0u8; 4096];
    while fed < FUZZ_BYTES {
        let n = rng.random_range(1..=chunk.len()).min(FUZZ_BYTES - fed);
        rng.fill(&mut chunk[..n]);
        dec.push_with(&chunk[..n], |_| {});
        max_buffered = max_buffered.max(dec.buffered());
        fed += n;
    }
    if max_buffered > MAX_PAYLOAD + 5 {
        return Err(format!("decoder held {max_buffered} bytes"));
    }

    for i in 0..ROUND_TRIP_FRAMES {
        let len = rng.random_range(0..=MAX_PAYLOAD);
        let mut payload = vec![0u8; len];
        rng.fill(&mut payload[..]);
        let id = if rng.random_bool(0.1) {
            0xFF
        } else {
            rng.random_range(0..=5)
        };
        let f = Frame::new(rng.random(), id, payload);
        let bytes = encode_frame(&f).map_err(|e| e.to_string())?;
        let got = Decoder::new().push(&bytes);
        if got != vec![f.clone()] {
            return Err(format!("frame {i} did not round-trip: {f:?}"));
        }
    }

    let cal = CalibrationRecord::nominal(&ActuatorParams::default(), &SensorSuite::default());
    let mut max_retries = 0;
    for trial in 0..RETRY_TRIALS {
        let bus_cfg = BusConfig {
            loss_rate: RETRY_LOSS,
            seed: trial,
            ..Default::default()
        };
        let mut bus = DuplexBus::new(bus_cfg).map_err(|e| e.to_string())?;
        let ctrl = HandController::new(ControllerConfig::default(), vec![cal; 3])
            .map_err(|e| e.to_string())?;
        let mut fw = HandFirmware::new(ctrl);
        let mut host = HostClient::new(RetryPolicy::default());
        let finger = rng.random_range(0..3u8);
        let value = rng.random_range(0..=10_000u16) as f64 * 10.0;
        host.send(
            Request::new(ActuatorId::One(finger), Command::SetPressureTarget(value)),
            &mut bus,
            0.0,
        )
        .map_err(|e| e.to_string())?;
        let mut t = 0.0;
        while host.outstanding() > 0 && t < 10.0 {
            t += 0.005;
            let inbound = bus.to_device.read(t);
            let out = fw.receive(&inbound, t);
            bus.to_host.write(&out, t);
            host.poll(&mut bus, t);
        }
        let applied = fw.controller.fsms[finger as usize].target.map(|x| x.value);
        if host.outstanding() > 0 || host.stats.failed > 0 || applied != Some(value) {
            return Err(format!(
                "trial {trial}: outstanding {}, target {applied:?}",
                host.outstanding()
            ));
        }
        max_retries = max_retries.max(host.stats.retries);
    }
    Ok(format!(
        "{FUZZ_BYTES} fuzz bytes (peak buffer {max_buffered} B), {ROUND_TRIP_FRAMES} round trips, \
         {RETRY_TRIALS}/{RETRY_TRIALS} retry trials converged (max {max_retries} retries)"
    ))
}

fn c10_conformation_and_settle() -> Outcome {
    let dt = 0.005;
    // about the default strain channel noise, quantization included
    let sigma = 2e-4;
    let (t_step, t_quiet, window) = (23.0, 15.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let samples: Vec<PhaseSample> = (0..8000)
        .map(|i| {
            let t = i as f64 * dt;
            let z: f64 = rng.sample(StandardNormal);
            let zp: f64 = rng.sample(StandardNormal);
            // wiggling before the quiet point, a strain step at t_step
            let noise = if t < t_quiet { 20.0 * sigma } else { sigma };
            let step = if t >= t_step { 10.0 * sigma } else { 0.0 };
            PhaseSample {
                t,
                pressure: 50_000.0 + 5.0 * zp,
                strain: 0.05 + step + noise * z,
            }
        })
        .collect();
    let stream = PhaseOrbit::new(samples, false).map_err(|e| e.to_string())?;
    let events = detect_conformation_changes(&stream, &JumpDetectorConfig::default())
        .map_err(|e| e.to_string())?;
    if events.len() != 1 || (events[0].t - t_step).abs() > window {
        return Err(format!("events {events:?}"));
    }
    let settled = detect_settled(&stream, window, 3.0 * sigma);
    match settled {
        Some(ts) if (t_quiet..=t_quiet + window).contains(&ts) => Ok(format!(
            "one event at {:.3} s (injected {t_step} s), settled at {ts:.3} s (quiet from {t_quiet} s)",
            events[0].t
        )),
        other => Err(format!("settle time {other:?}")),
    }
}

fn c11_determinism() -> Outcome {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut names: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    names.sort();
    for path in &names {
        let s = Scenario::load(path).map_err(|e| e.to_string())?;
        let mut outputs = Vec::new();
        for _ in 0..2 {
            let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
            write_outputs(&run_scenario(&s).map_err(|e| e.to_string())?, tmp.path())
                .map_err(|e| e.to_string())?;
            let files: Vec<Vec<u8>> = ["telemetry.csv", "events.jsonl", "empty_reference.csv"]
                .iter()
                .map(|f| std::fs::read(tmp.path().join(f)).unwrap())
                .collect();
            outputs.push(files);
        }
        if outputs[0] != outputs[1] {
            return Err(format!("{} differs between runs", path.display()));
        }
    }
    Ok(format!(
        "{} scenarios byte-identical across re-runs",
        names.len()
    ))
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("threshold anchor", c1_threshold_anchor),
        (
            "calibration identifiability",
            c2_calibration_identifiability,
        ),
        ("grasp signature reproduction", c3_grasp_signature),
        ("monotone attenuation", c4_monotone_attenuation),
        ("radius estimation", c5_radius_estimation),
        ("orbit orientation", c6_orbit_orientation),
        ("controller safety", c7_controller_safety),
        ("sensor round-trip", c8_sensor_round_trip),
        ("protocol robustness", c9_protocol_robustness),
        (
            "conformation and settle detection",
            c10_conformation_and_settle,
        ),
        ("determinism", c11_determinism),
    ];
    let results: Vec<Outcome> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria
            .iter()
            .map(|(_, f)| {
                let f = *f;
                s.spawn(move || {
                    std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut failed = 0;
    println!();
    for (i, ((name, _), r)) in criteria.iter().zip(&results).enumerate() {
        match r {
            Ok(d) => println!("acceptance {:>2} {name}: PASS ({d})", i + 1),
            Err(d) => {
                failed += 1;
                println!("acceptance {:>2} {name}: FAIL ({d})", i + 1);
            }
        }
    }
    println!(
        "\nacceptance: {} passed, {failed} failed\n",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
