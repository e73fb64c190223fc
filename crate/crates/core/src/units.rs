//! Unit constants. All pressures in the crate are gauge pressures in pascals.

/// One pound per square inch in pascals.
pub const PSI: f64 = 6_894.757_293_168;

/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.806_65;

pub fn psi_to_pa(psi: f64) -> f64 {
    psi * PSI
}

pub fn pa_to_psi(pa: f64) -> f64 {
    pa / PSI
}
