//! Conversions between ordinary and angular frequency.

use core::f64::consts::TAU;

/// Angular frequency (rad/s) of an ordinary frequency in Hz.
#[inline]
pub fn hz(f: f64) -> f64 {
    TAU * f
}

#[inline]
pub fn mhz(f: f64) -> f64 {
    TAU * f * 1e6
}

#[inline]
pub fn ghz(f: f64) -> f64 {
    TAU * f * 1e9
}

/// Ordinary frequency in Hz of an angular frequency.
#[inline]
pub fn to_hz(omega: f64) -> f64 {
    omega / TAU
}

pub const NS: f64 = 1e-9;
pub const US: f64 = 1e-6;
