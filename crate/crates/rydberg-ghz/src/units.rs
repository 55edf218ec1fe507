//! Unit conversions. Frequencies are angular [rad/s] and times are seconds internally.

use std::f64::consts::PI;

/// Reference rate `γ = 2π × 1 MHz`.
pub const GAMMA: f64 = 2.0 * PI * 1e6;

/// `X/2π` in MHz to rad/s.
pub fn mhz(x_over_2pi: f64) -> f64 {
    2.0 * PI * 1e6 * x_over_2pi
}

/// rad/s to `X/2π` in MHz.
pub fn to_mhz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1e6)
}

/// `C₆/2π` in GHz·μm⁶ to rad/s·μm⁶.
pub fn c6_from_ghz(c6_over_2pi: f64) -> f64 {
    2.0 * PI * 1e9 * c6_over_2pi
}

pub fn ns(x: f64) -> f64 {
    x * 1e-9
}

pub fn to_ns(t: f64) -> f64 {
    t * 1e9
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        assert!((to_mhz(mhz(20.0)) - 20.0).abs() < 1e-12);
        assert!((to_ns(ns(50.0)) - 50.0).abs() < 1e-12);
        assert_eq!(mhz(1.0), GAMMA);
    }
}
