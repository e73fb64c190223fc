//! Closed-loop scenario execution: physics every `dt`, and at every control
//! tick the sensors, the host's scripted commands over the simulated bus,
//! and the firmware's state machines.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::calibration::CalibrationRecord;
use crate::controller::{FsmMode, HandController};
use crate::error::{Error, Result};
use crate::grasp::{
    classify_grasp, detect_conformation_changes, detect_settled, ClassifierConfig,
    EmptyGraspReference, GraspOutcome, JumpDetectorConfig, JumpKind, PhaseOrbit,
};
use crate::physics::{hand_step, ActuatorState};
use crate::protocol::{DuplexBus, HandFirmware, HostClient, HostStats, RetryPolicy};
use crate::scenario::Scenario;
use crate::sensors::counts_to_physical;
use crate::telemetry::{orbits_from_rows, write_csv, TelemetryRow};
use crate::units::GRAVITY;

/// Strain tolerance between a grasp and the empty reference.
pub const TOLERANCE_BAND: f64 = 0.02;
pub const SETTLE_WINDOW_S: f64 = 1.0;
/// Rolling strain standard deviation below which a grasp counts as settled.
pub const SETTLE_SIGMA: f64 = 5e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    FsmTransition {
        t_s: f64,
        finger: usize,
        from: FsmMode,
        to: FsmMode,
    },
    Fault {
        t_s: f64,
        finger: usize,
    },
    Nak {
        t_s: f64,
        actuator: u8,
        command: u8,
        reason: String,
    },
    Link {
        sent: u64,
        retries: u64,
        acked: u64,
        naked: u64,
        failed: u64,
        telemetry: u64,
    },
    Verdict {
        finger: usize,
        outcome: Option<GraspOutcome>,
        estimated_radius_m: Option<f64>,
        strain_deficit: Option<f64>,
        hold_pressure_pa: Option<f64>,
        hold_strain: Option<f64>,
        flat_strain_pressure_rise_pa: Option<f64>,
        error: Option<String>,
    },
    ConformationChange {
        t_s: f64,
        finger: usize,
        jump: JumpKind,
        statistic: f64,
    },
    Settled {
        finger: usize,
        t_s: Option<f64>,
    },
    ForceCheck {
        object: usize,
        mass_kg: f64,
        friction_coefficient: f64,
        required_normal_force_n: f64,
        peak_normal_force_n: f64,
        sufficient: bool,
    },
}

/// Output of one closed-loop simulation, without analysis.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub telemetry: Vec<TelemetryRow>,
    pub events: Vec<Event>,
    pub final_modes: Vec<FsmMode>,
    pub final_states: Vec<ActuatorState>,
    pub link: HostStats,
}

impl Simulation {
    pub fn faulted(&self) -> bool {
        self.final_modes.contains(&FsmMode::Fault)
    }

    /// Per-finger (pressure, strain) orbits.
    pub fn orbits(&self) -> Result<Vec<PhaseOrbit>> {
        Ok(orbits_from_rows(&self.telemetry)?.into_values().collect())
    }
}

pub fn calibrations(scenario: &Scenario) -> Vec<CalibrationRecord> {
    scenario
        .actuators
        .iter()
        .map(|a| CalibrationRecord::nominal(a, &scenario.sensors))
        .collect()
}

/// Run the closed loop and record telemetry.
pub fn simulate(scenario: &Scenario) -> Result<Simulation> {
    scenario.validate()?;
    let n = scenario.actuators.len();
    let dt = scenario.dt_s;
    let steps = (scenario.duration_s / dt).round() as u64;
    let tick_every = ((scenario.controller.tick_period / dt).round() as u64).max(1);

    let cals = calibrations(scenario);
    let mut firmware = HandFirmware::new(HandController::new(scenario.controller, cals.clone())?);
    let mut host = HostClient::new(RetryPolicy::default());
    let mut bus = DuplexBus::new(crate::protocol::BusConfig {
        seed: scenario.bus.seed ^ scenario.seed.rotate_left(17),
        ..scenario.bus
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);

    let mut circuit = scenario.circuit.build(n);
    let mut objects = scenario.finger_objects();
    let mut states = vec![ActuatorState::default(); n];

    let mut commands = scenario.commands.clone();
    commands.sort_by(|a, b| a.t_s.total_cmp(&b.t_s));
    let mut disturbances = scenario.disturbances.clone();
    disturbances.sort_by(|a, b| a.t_s.total_cmp(&b.t_s));
    let (mut next_cmd, mut next_dist) = (0, 0);

    let mut telemetry = Vec::with_capacity((steps / tick_every + 1) as usize * n);
    let mut events = Vec::new();
    let mut modes = vec![FsmMode::Idle; n];
    let eps = 1e-9;

    for k in 0..=steps {
        let t = k as f64 * dt;
        if k % tick_every == 0 {
            while next_cmd < commands.len() && commands[next_cmd].t_s <= t + eps {
                let req = commands[next_cmd].request().map_err(Error::Schema)?;
                host.send(req, &mut bus, t)?;
                next_cmd += 1;
            }
            let inbound = bus.to_device.read(t);
            let replies = firmware.receive(&inbound, t);
            bus.to_host.write(&replies, t);

            let frames = states
                .iter()
                .zip(&scenario.actuators)
                .map(|(s, p)| {
                    scenario
                        .sensors
                        .sample(t, s, p, circuit.atmosphere_offset, &mut rng)
                })
                .collect::<Result<Vec<_>>>()?;
            let (valves, stream) = firmware.tick(&frames, t)?;
            bus.to_host.write(&stream, t);
            for r in host.poll(&mut bus, t) {
                if let crate::protocol::Response::Nak {
                    actuator,
                    cmd,
                    reason,
                } = r
                {
                    events.push(Event::Nak {
                        t_s: t,
                        actuator,
                        command: cmd,
                        reason: format!("{reason:?}"),
                    });
                }
            }

            for i in 0..n {
                let mode = firmware.controller.fsms[i].mode;
                if mode != modes[i] {
                    events.push(Event::FsmTransition {
                        t_s: t,
                        finger: i,
                        from: modes[i],
                        to: mode,
                    });
                    if mode == FsmMode::Fault {
                        events.push(Event::Fault { t_s: t, finger: i });
                    }
                    modes[i] = mode;
                }
                let reading = counts_to_physical(&frames[i], &cals[i]);
                telemetry.push(TelemetryRow {
                    t,
                    finger: i,
                    pressure: reading.pressure,
                    curvature: reading.curvature,
                    strain: reading.strain,
                    strain_counts: frames[i].strain_counts,
                    pressure_counts: frames[i].pressure_counts,
                    mode,
                    inlet: valves[i].inlet,
                    vent: valves[i].vent,
                    contact_force: states[i].normal_force(),
                });
            }
            circuit.valves = valves;
        }

        while next_dist < disturbances.len() && disturbances[next_dist].t_s <= t + eps {
            let d = disturbances[next_dist];
            let s = &mut states[d.finger];
            s.pressure = (s.pressure + d.pressure_step_pa).max(0.0);
            s.curvature = (s.curvature + d.curvature_step_per_m).max(0.0);
            if let Some(r) = d.contact_radius_m {
                let mass = objects[d.finger].map_or(0.0, |o| o.mass);
                objects[d.finger] = Some(crate::physics::RigidObject {
                    radius: r,
                    mass,
                    position: 0.0,
                });
            }
            next_dist += 1;
        }

        if k < steps {
            states = hand_step(&scenario.actuators, &states, &circuit, &objects, dt)?;
        }
    }

    let link = host.stats;
    events.push(Event::Link {
        sent: link.sent,
        retries: link.retries,
        acked: link.acked,
        naked: link.naked,
        failed: link.failed,
        telemetry: link.telemetry,
    });
    Ok(Simulation {
        telemetry,
        events,
        final_modes: modes,
        final_states: states,
        link,
    })
}

/// A scenario run with its empty-grasp baseline and grasp analysis.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub run: Simulation,
    pub baseline: Simulation,
    pub events: Vec<Event>,
}

impl RunOutput {
    pub fn faulted(&self) -> bool {
        self.run.faulted()
    }

    pub fn verdicts(&self) -> impl Iterator<Item = &Event> {
        self.events
            .iter()
            .filter(|e| matches!(e, Event::Verdict { .. }))
    }
}

fn first_hold(sim: &Simulation, finger: usize) -> Option<f64> {
    sim.events.iter().find_map(|e| match *e {
        Event::FsmTransition {
            t_s,
            finger: f,
            to: FsmMode::Holding,
            ..
        } if f == finger => Some(t_s),
        _ => None,
    })
}

fn release_after(sim: &Simulation, finger: usize, after: f64) -> f64 {
    sim.events
        .iter()
        .find_map(|e| match *e {
            Event::FsmTransition {
                t_s,
                finger: f,
                to: FsmMode::Venting | FsmMode::Idle | FsmMode::Fault,
                ..
            } if f == finger && t_s > after => Some(t_s),
            _ => None,
        })
        .unwrap_or(f64::INFINITY)
}

pub fn run_scenario(scenario: &Scenario) -> Result<RunOutput> {
    let run = simulate(scenario)?;
    let baseline = simulate(&scenario.empty_baseline())?;
    let mut events = run.events.clone();

    let cals = calibrations(scenario);
    let orbits = run.orbits()?;
    let empty = baseline.orbits()?;
    let classifier = ClassifierConfig {
        deadband: scenario.controller.pressure_deadband,
        ..Default::default()
    };
    for (f, orbit) in orbits.iter().enumerate() {
        let verdict = EmptyGraspReference::from_orbit(&empty[f], TOLERANCE_BAND)
            .and_then(|r| classify_grasp(orbit, &r, &cals[f], &classifier));
        events.push(match verdict {
            Ok(v) => Event::Verdict {
                finger: f,
                outcome: Some(v.outcome),
                estimated_radius_m: v.estimated_radius,
                strain_deficit: Some(v.strain_deficit),
                hold_pressure_pa: Some(v.hold_pressure),
                hold_strain: Some(v.hold_strain),
                flat_strain_pressure_rise_pa: Some(v.flat_strain_pressure_rise),
                error: None,
            },
            Err(e) => Event::Verdict {
                finger: f,
                outcome: None,
                estimated_radius_m: None,
                strain_deficit: None,
                hold_pressure_pa: None,
                hold_strain: None,
                flat_strain_pressure_rise_pa: None,
                error: Some(e.to_string()),
            },
        });
    }
    for (f, orbit) in orbits.iter().enumerate() {
        let changes =
            detect_conformation_changes(orbit, &JumpDetectorConfig::default()).unwrap_or_default();
        events.extend(changes.iter().map(|c| Event::ConformationChange {
            t_s: c.t,
            finger: f,
            jump: c.kind,
            statistic: c.statistic,
        }));
        // settling is judged after the last conformation change of the hold
        let settled = first_hold(&run, f).and_then(|hold| {
            let release = release_after(&run, f, hold);
            let t0 = changes
                .iter()
                .map(|c| c.t)
                .filter(|&t| t > hold && t < release)
                .fold(hold, f64::max);
            let tail: Vec<_> = orbit
                .samples()
                .iter()
                .copied()
                .filter(|s| s.t >= t0)
                .collect();
            PhaseOrbit::new(tail, false)
                .ok()
                .and_then(|o| detect_settled(&o, SETTLE_WINDOW_S, SETTLE_SIGMA))
        });
        events.push(Event::Settled {
            finger: f,
            t_s: settled,
        });
    }
    for (i, o) in scenario.objects.iter().enumerate() {
        let mut peak: f64 = 0.0;
        for rows in run.telemetry.chunks(scenario.actuators.len()) {
            let total: f64 = rows
                .iter()
                .filter(|r| o.fingers.contains(&r.finger))
                .map(|r| r.contact_force)
                .sum();
            peak = peak.max(total);
        }
        let required = o.mass_kg * GRAVITY / o.friction_coefficient;
        events.push(Event::ForceCheck {
            object: i,
            mass_kg: o.mass_kg,
            friction_coefficient: o.friction_coefficient,
            required_normal_force_n: required,
            peak_normal_force_n: peak,
            sufficient: peak >= required,
        });
    }
    Ok(RunOutput {
        run,
        baseline,
        events,
    })
}

pub fn write_events<W: Write>(events: &[Event], mut out: W) -> Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Write `telemetry.csv`, `events.jsonl` and `empty_reference.csv` to `dir`.
pub fn write_outputs(output: &RunOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let create = |name: &str| -> Result<std::io::BufWriter<std::fs::File>> {
        Ok(std::io::BufWriter::new(std::fs::File::create(
            dir.join(name),
        )?))
    };
    write_csv(&output.run.telemetry, create("telemetry.csv")?)?;
    write_csv(&output.baseline.telemetry, create("empty_reference.csv")?)?;
    let mut events = create("events.jsonl")?;
    write_events(&output.events, &mut events)?;
    events.flush()?;
    Ok(())
}
