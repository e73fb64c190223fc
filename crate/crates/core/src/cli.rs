//! Command-line front end. Exit codes: 0 success, 1 an actuator ended in
//! fault, 2 invalid input.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::calibration::{
    check_warmup, fit_pressure_curvature, fit_strain_resistance, CalibrationRecord,
    PressureCurvatureSample, StrainResistanceSample,
};
use crate::error::{Error, Result};
use crate::figure::{emit_figure_data, FigureKind};
use crate::grasp::{classify_grasp, ClassifierConfig, EmptyGraspReference};
use crate::physics::ActuatorParams;
use crate::runner::{run_scenario, write_outputs, TOLERANCE_BAND};
use crate::scenario::Scenario;
use crate::sensors::SensorSuite;
use crate::telemetry::Table;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAULT: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "softgrip",
    version,
    about = "Soft gripper simulator and grasp analysis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Verb,
}

#[derive(Debug, Subcommand)]
pub enum Verb {
    /// Run a scenario and write telemetry.csv, events.jsonl and empty_reference.csv.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the physics step, s.
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Fit sensor and actuator models from logged samples.
    Calibrate {
        #[command(subcommand)]
        fit: CalibrateVerb,
    },
    /// Grasp analysis.
    Grasp {
        #[command(subcommand)]
        action: GraspVerb,
    },
    /// Emit plot-ready long-format CSV.
    Figure {
        #[arg(required = true)]
        telemetry: Vec<PathBuf>,
        /// pressure_curvature, phase_orbit or grasp_timeline.
        #[arg(long)]
        kind: String,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum CalibrateVerb {
    /// Line fit of curvature against pressure. CSV columns: pressure_pa,
    /// curvature_per_m and optionally actuator.
    PressureCurvature {
        csv: PathBuf,
        /// Inflations performed before the session.
        #[arg(long)]
        warmup_cycles: u32,
        /// Lower pressure bound of the fit, Pa.
        #[arg(long, default_value_t = 30_000.0)]
        p_min_fit: f64,
        /// Curvature assigned to the threshold, 1/m.
        #[arg(long, default_value_t = 1.0)]
        kappa0: f64,
        /// One fit over all actuators instead of one per actuator.
        #[arg(long)]
        pooled: bool,
    },
    /// Resistance against strain. CSV columns: strain, resistance_ohm.
    StrainResistance {
        csv: PathBuf,
        #[arg(long)]
        warmup_cycles: u32,
    },
}

#[derive(Debug, Subcommand)]
pub enum GraspVerb {
    /// Classify each finger of a telemetry file against an empty grasp.
    Classify {
        telemetry: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        /// Calibration record JSON; defaults to the nominal hardware.
        #[arg(long)]
        calibration: Option<PathBuf>,
        #[arg(long, default_value_t = TOLERANCE_BAND)]
        tolerance: f64,
    },
}

#[derive(Debug, Deserialize)]
struct PressureCurvatureRow {
    #[serde(default)]
    actuator: Option<String>,
    pressure_pa: f64,
    curvature_per_m: f64,
}

#[derive(Debug, Serialize)]
struct LineReport {
    actuator: String,
    slope_per_m_per_pa: f64,
    intercept_per_m: f64,
    p_threshold_pa: f64,
    rms_per_m: f64,
    n: usize,
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

fn cmd_run(scenario: &Path, out: &Path, seed: Option<u64>, dt: Option<f64>) -> Result<i32> {
    let mut s = Scenario::load(scenario)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    if let Some(dt) = dt {
        s.dt_s = dt;
        s.validate()?;
    }
    let output = run_scenario(&s)?;
    write_outputs(&output, out)?;
    for v in output.verdicts() {
        print_json(v)?;
    }
    Ok(if output.faulted() {
        EXIT_FAULT
    } else {
        EXIT_OK
    })
}

fn cmd_pressure_curvature(
    csv: &Path,
    warmup: u32,
    p_min_fit: f64,
    kappa0: f64,
    pooled: bool,
) -> Result<i32> {
    check_warmup(warmup)?;
    let rows: Vec<PressureCurvatureRow> = read_rows(csv)?;
    let mut groups: BTreeMap<String, Vec<PressureCurvatureSample>> = BTreeMap::new();
    for r in rows {
        let key = if pooled {
            "pooled".to_string()
        } else {
            r.actuator.unwrap_or_else(|| "0".into())
        };
        groups
            .entry(key)
            .or_default()
            .push(PressureCurvatureSample {
                pressure: r.pressure_pa,
                curvature: r.curvature_per_m,
            });
    }
    if groups.is_empty() {
        return Err(Error::Fit("no samples".into()));
    }
    for (actuator, samples) in groups {
        let fit = fit_pressure_curvature(&samples, p_min_fit)
            .map_err(|e| Error::Fit(format!("actuator {actuator}: {e}")))?;
        print_json(&LineReport {
            p_threshold_pa: fit.threshold_at(kappa0)?,
            actuator,
            slope_per_m_per_pa: fit.slope,
            intercept_per_m: fit.intercept,
            rms_per_m: fit.rms,
            n: fit.n,
        })?;
    }
    Ok(EXIT_OK)
}

fn cmd_strain_resistance(csv: &Path, warmup: u32) -> Result<i32> {
    check_warmup(warmup)?;
    let samples: Vec<StrainResistanceSample> = read_rows(csv)?;
    print_json(&fit_strain_resistance(&samples)?)?;
    Ok(EXIT_OK)
}

fn cmd_classify(
    telemetry: &Path,
    reference: &Path,
    calibration: Option<&Path>,
    tolerance: f64,
) -> Result<i32> {
    let cal = match calibration {
        Some(p) => CalibrationRecord::load(p)?,
        None => CalibrationRecord::nominal(&ActuatorParams::default(), &SensorSuite::default()),
    };
    let orbits = Table::load(telemetry)?.orbits()?;
    let refs = Table::load(reference)?.orbits()?;
    for (finger, orbit) in &orbits {
        let empty = refs
            .get(finger)
            .ok_or_else(|| Error::Schema(format!("reference has no finger {finger}")))?;
        let r = EmptyGraspReference::from_orbit(empty, tolerance)?;
        let v = classify_grasp(orbit, &r, &cal, &ClassifierConfig::default())?;
        print_json(&serde_json::json!({ "finger": finger, "verdict": v }))?;
    }
    Ok(EXIT_OK)
}

fn cmd_figure(telemetry: &[PathBuf], kind: &str, out: Option<&Path>) -> Result<i32> {
    let kind: FigureKind = kind.parse()?;
    let runs = telemetry
        .iter()
        .map(|p| Ok((p.display().to_string(), Table::load(p)?)))
        .collect::<Result<Vec<_>>>()?;
    match out {
        Some(path) => emit_figure_data(
            &runs,
            kind,
            std::io::BufWriter::new(std::fs::File::create(path)?),
        )?,
        None => emit_figure_data(&runs, kind, std::io::stdout().lock())?,
    }
    Ok(EXIT_OK)
}

pub fn execute(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Verb::Run {
            scenario,
            out,
            seed,
            dt,
        } => cmd_run(scenario, out, *seed, *dt),
        Verb::Calibrate { fit } => match fit {
            CalibrateVerb::PressureCurvature {
                csv,
                warmup_cycles,
                p_min_fit,
                kappa0,
                pooled,
            } => cmd_pressure_curvature(csv, *warmup_cycles, *p_min_fit, *kappa0, *pooled),
            CalibrateVerb::StrainResistance { csv, warmup_cycles } => {
                cmd_strain_resistance(csv, *warmup_cycles)
            }
        },
        Verb::Grasp {
            action:
                GraspVerb::Classify {
                    telemetry,
                    reference,
                    calibration,
                    tolerance,
                },
        } => cmd_classify(telemetry, reference, calibration.as_deref(), *tolerance),
        Verb::Figure {
            telemetry,
            kind,
            out,
        } => cmd_figure(telemetry, kind, out.as_deref()),
    }
}

/// Parse arguments, run, and map errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INVALID
        }
    }
}
