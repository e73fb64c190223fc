//! Simulation, sensing, control and grasp analysis for a three-fingered
//! pneumatic soft hand with strain and pressure proprioception.
//!
//! - [`physics`]: actuator pressure and curvature dynamics, contact with rigid objects.
//! - [`sensors`]: liquid-metal strain gauge, pressure sensor and ADC models.
//! - [`controller`]: per-actuator bang-bang valve state machines.
//! - [`grasp`]: phase-orbit grasp classification and conformation-change detection.
//! - [`calibration`]: model fits from logged data.
//! - [`protocol`]: framed serial protocol and a lossy simulated bus.
//! - [`scenario`], [`runner`], [`telemetry`], [`figure`], [`cli`]: the scenario runner and front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod calibration;
pub mod cli;
pub mod controller;
pub mod error;
pub mod figure;
pub mod grasp;
pub mod physics;
pub mod protocol;
pub mod runner;
pub mod scenario;
pub mod sensors;
pub mod telemetry;
pub mod units;

pub use error::{Error, Result};
