//! Telemetry CSV: one row per finger per control tick.
//!
//! | column | meaning |
//! |---|---|
//! | `t_s` | time, s |
//! | `finger` | actuator index |
//! | `pressure_pa` | measured gauge pressure, Pa |
//! | `curvature_per_m` | measured curvature, 1/m |
//! | `strain` | measured dorsal strain |
//! | `strain_counts` | raw ADC counts of the strain channel |
//! | `pressure_counts` | raw ADC counts of the pressure channel |
//! | `fsm_mode` | idle, inflating, venting, holding or fault |
//! | `inlet`, `vent` | valve commands, 0 or 1 |
//! | `contact_force_n` | simulated normal force on the object, N |

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::controller::FsmMode;
use crate::error::{Error, Result};
use crate::grasp::{PhaseOrbit, PhaseSample};

pub const COLUMNS: [&str; 11] = [
    "t_s",
    "finger",
    "pressure_pa",
    "curvature_per_m",
    "strain",
    "strain_counts",
    "pressure_counts",
    "fsm_mode",
    "inlet",
    "vent",
    "contact_force_n",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelemetryRow {
    pub t: f64,
    pub finger: usize,
    pub pressure: f64,
    pub curvature: f64,
    pub strain: f64,
    pub strain_counts: u16,
    pub pressure_counts: u16,
    pub mode: FsmMode,
    pub inlet: bool,
    pub vent: bool,
    pub contact_force: f64,
}

pub fn write_csv<W: Write>(rows: &[TelemetryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    for r in rows {
        w.write_record([
            format!("{:.4}", r.t),
            r.finger.to_string(),
            format!("{:.1}", r.pressure),
            format!("{:.4}", r.curvature),
            format!("{:.6}", r.strain),
            r.strain_counts.to_string(),
            r.pressure_counts.to_string(),
            r.mode.as_str().to_string(),
            u8::from(r.inlet).to_string(),
            u8::from(r.vent).to_string(),
            format!("{:.5}", r.contact_force),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// A telemetry file with arbitrary column subset, kept as named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { headers, rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            ))
        })?;
        Self::read(f)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn require(&self, columns: &[&str]) -> Result<()> {
        let missing: Vec<&str> = columns
            .iter()
            .copied()
            .filter(|c| !self.headers.iter().any(|h| h == c))
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Schema(format!(
                "telemetry is missing column(s) {}; found {}",
                missing.join(", "),
                self.headers.join(", ")
            )))
        }
    }

    fn index(&self, column: &str) -> Result<usize> {
        self.require(&[column])?;
        Ok(self.headers.iter().position(|h| h == column).unwrap())
    }

    pub fn column_str(&self, column: &str) -> Result<Vec<&str>> {
        let i = self.index(column)?;
        Ok(self.rows.iter().map(|r| r[i].as_str()).collect())
    }

    pub fn column_f64(&self, column: &str) -> Result<Vec<f64>> {
        let i = self.index(column)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(n, r)| {
                r[i].parse::<f64>().map_err(|_| {
                    Error::Schema(format!(
                        "row {}: column {column}: {:?} is not a number",
                        n + 2,
                        r[i]
                    ))
                })
            })
            .collect()
    }

    /// Per-finger (pressure, strain) orbits, keyed by finger index.
    pub fn orbits(&self) -> Result<BTreeMap<usize, PhaseOrbit>> {
        self.require(&["t_s", "finger", "pressure_pa", "strain"])?;
        let t = self.column_f64("t_s")?;
        let finger = self.column_f64("finger")?;
        let p = self.column_f64("pressure_pa")?;
        let e = self.column_f64("strain")?;
        let mut by_finger: BTreeMap<usize, Vec<PhaseSample>> = BTreeMap::new();
        for i in 0..t.len() {
            by_finger
                .entry(finger[i] as usize)
                .or_default()
                .push(PhaseSample {
                    t: t[i],
                    pressure: p[i],
                    strain: e[i],
                });
        }
        by_finger
            .into_iter()
            .map(|(f, s)| {
                PhaseOrbit::new(s, true)
                    .map(|o| (f, o))
                    .map_err(|e| Error::Schema(format!("finger {f}: {e}")))
            })
            .collect()
    }
}

pub fn orbits_from_rows(rows: &[TelemetryRow]) -> Result<BTreeMap<usize, PhaseOrbit>> {
    let mut by_finger: BTreeMap<usize, Vec<PhaseSample>> = BTreeMap::new();
    for r in rows {
        by_finger.entry(r.finger).or_default().push(PhaseSample {
            t: r.t,
            pressure: r.pressure,
            strain: r.strain,
        });
    }
    by_finger
        .into_iter()
        .map(|(f, s)| PhaseOrbit::new(s, true).map(|o| (f, o)))
        .collect()
}
