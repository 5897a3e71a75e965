//! Unit conversions between configuration units and internal angular units.

use std::f64::consts::TAU;

/// kHz (plain frequency) to rad/ns.
#[inline]
pub fn khz_to_rad_per_ns(f_khz: f64) -> f64 {
    TAU * f_khz * 1e-6
}

/// Phase accumulated by a plain frequency in kHz over a time in μs.
#[inline]
pub fn khz_us_phase(f_khz: f64, t_us: f64) -> f64 {
    TAU * f_khz * t_us * 1e-3
}

/// Exponent of a rate in s⁻¹ acting for a time in ms.
#[inline]
pub fn rate_ms(rate_per_s: f64, t_ms: f64) -> f64 {
    rate_per_s * t_ms * 1e-3
}
