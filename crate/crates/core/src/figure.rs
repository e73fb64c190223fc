//! Plot-ready projections of telemetry. Output is long format: one row per
//! sample, keyed by run and finger, so each (run, finger) pair is a series.

use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::telemetry::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureKind {
    /// Curvature against pressure.
    PressureCurvature,
    /// Strain against pressure, in time order.
    PhaseOrbit,
    /// Pressure and strain against time.
    GraspTimeline,
}

impl FigureKind {
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            FigureKind::PressureCurvature => &["t_s", "pressure_pa", "curvature_per_m"],
            FigureKind::PhaseOrbit => &["t_s", "pressure_pa", "strain"],
            FigureKind::GraspTimeline => &["t_s", "pressure_pa", "strain"],
        }
    }
}

impl FromStr for FigureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pressure_curvature" => Ok(FigureKind::PressureCurvature),
            "phase_orbit" => Ok(FigureKind::PhaseOrbit),
            "grasp_timeline" => Ok(FigureKind::GraspTimeline),
            other => Err(Error::Config(format!(
                "unknown figure kind {other:?}; expected pressure_curvature, phase_orbit or grasp_timeline"
            ))),
        }
    }
}

/// Write the figure data for several named telemetry tables.
pub fn emit_figure_data<W: Write>(
    runs: &[(String, Table)],
    kind: FigureKind,
    out: W,
) -> Result<()> {
    let cols = kind.columns();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["run", "finger"];
    header.extend_from_slice(cols);
    w.write_record(&header)?;
    for (name, table) in runs {
        let mut need = vec!["finger"];
        need.extend_from_slice(cols);
        table
            .require(&need)
            .map_err(|e| Error::Schema(format!("run {name}: {e}")))?;
        let finger = table.column_str("finger")?;
        let data: Vec<Vec<&str>> = cols
            .iter()
            .map(|c| table.column_str(c))
            .collect::<Result<_>>()?;
        let mut fingers: Vec<&str> = finger.clone();
        fingers.sort_by_key(|f| f.parse::<usize>().unwrap_or(usize::MAX));
        fingers.dedup();
        for f in fingers {
            for i in (0..table.len()).filter(|&i| finger[i] == f) {
                let mut rec = vec![name.as_str(), f];
                rec.extend(data.iter().map(|col| col[i]));
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
