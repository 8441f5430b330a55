//! Single-cable noise model: a thermal source behind an impedance, driving a
//! lossless line that ends in an arbitrary termination.
//!
//! The voltage at the source end is the superposition of the direct wave and
//! every wave that has bounced between the load and the source. The infinite
//! sum has the closed form
//!
//! ```text
//! v_s = v_0 (exp(2ikL) + Gl) / (exp(2ikL) - Gl Gb)
//! ```
//!
//! and [`bounce_series_oracle`] sums the same series term by term so the two
//! can be compared.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{FrequencyGrid, PowerSpectrum};
use crate::wave::{
    reflection_coefficient, thermal_source_power, wavenumber, CableSegment, Termination,
    DEFAULT_TEMPERATURE,
};

/// Distance from the closed-form pole below which a point is rejected.
pub const POLE_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CableSetup {
    pub cable: CableSegment,
    pub load: Termination,
    pub source_impedance: Termination,
    /// Source voltage density `v_b^2`, V^2/Hz.
    pub source_power: f64,
}

impl CableSetup {
    /// Matched 50 ohm source at room temperature driving `length` metres of
    /// cable into `load`.
    pub fn new(length: f64, load: Termination) -> Self {
        let cable = CableSegment::new(length);
        CableSetup {
            cable,
            load,
            source_impedance: Termination::Matched,
            source_power: thermal_source_power(DEFAULT_TEMPERATURE, cable.z0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cable.validate()?;
        self.load.validate()?;
        self.source_impedance.validate()?;
        if !(self.source_power.is_finite() && self.source_power >= 0.0) {
            return Err(Error::Validation(format!(
                "source power {} violates source_power >= 0",
                self.source_power
            )));
        }
        Ok(())
    }

    pub fn load_reflection(&self) -> Complex64 {
        reflection_coefficient(self.load, self.cable.z0)
    }

    pub fn source_reflection(&self) -> Complex64 {
        reflection_coefficient(self.source_impedance, self.cable.z0)
    }

    /// Same setup with the load replaced by a matched termination.
    pub fn matched_reference(&self) -> Self {
        CableSetup {
            load: Termination::Matched,
            ..*self
        }
    }
}

/// `v_0 / v_b = Z0 / (Zb + Z0)`; an open source impedance passes nothing.
pub fn source_divided_voltage(setup: &CableSetup) -> Complex64 {
    let z0 = setup.cable.z0;
    match setup.source_impedance.canonical(z0) {
        Termination::Open => Complex64::new(0.0, 0.0),
        Termination::Matched => Complex64::new(0.5, 0.0),
        Termination::Short => Complex64::new(1.0, 0.0),
        Termination::Finite(zb) => Complex64::new(z0, 0.0) / (zb + z0),
    }
}

/// Amplitude of the `index`-th arrival at the source end, relative to `v_b`.
///
/// Index 0 is the direct wave. Index `m >= 1` is the wave that returns after
/// its m-th load reflection together with its own reflection off the source
/// impedance: `v_0 Gl^m Gb^(m-1) exp(-2imkL) (1 + Gb)`.
pub fn bounce_term(setup: &CableSetup, f: f64, index: u32) -> Complex64 {
    let v0 = source_divided_voltage(setup);
    if index == 0 {
        return v0;
    }
    let gl = setup.load_reflection();
    let gb = setup.source_reflection();
    let m = index as i32;
    let round_trip = round_trip_phase(setup, f);
    v0 * gl.powi(m) * gb.powi(m - 1) * round_trip.powi(m) * (1.0 + gb)
}

/// Closed-form sum of all bounces, relative to `v_b`.
pub fn total_voltage_closed_form(setup: &CableSetup, f: f64) -> Result<Complex64> {
    let v0 = source_divided_voltage(setup);
    let gl = setup.load_reflection();
    let gb = setup.source_reflection();
    let forward = round_trip_phase(setup, f).conj();
    let den = forward - gl * gb;
    let distance = den.norm();
    if distance < POLE_EPSILON {
        return Err(Error::ResonancePole {
            frequency: f,
            distance,
        });
    }
    Ok(v0 * (forward + gl) / den)
}

/// Truncated bounce series with `terms` arrivals (`terms = 1` is the direct
/// wave alone).
pub fn bounce_series_oracle(setup: &CableSetup, f: f64, terms: usize) -> Complex64 {
    let v0 = source_divided_voltage(setup);
    let gl = setup.load_reflection();
    let gb = setup.source_reflection();
    let round_trip = round_trip_phase(setup, f);
    let mut sum = v0;
    // incident wave arriving at the source end after each load reflection
    let mut arriving = v0 * gl * round_trip;
    for _ in 1..terms {
        let reflected = arriving * gb;
        sum += arriving + reflected;
        arriving = reflected * gl * round_trip;
    }
    sum
}

/// Power at a matched source, `v_b^2 (Zl^2 cos^2 kL + Z0^2 sin^2 kL) / (Z0 + Zl)^2`.
///
/// Short and open loads use the exact limits `sin^2 kL` and `cos^2 kL`.
pub fn matched_source_power(setup: &CableSetup, f: f64) -> Result<f64> {
    let z0 = setup.cable.z0;
    if !setup.source_impedance.is_matched(z0) {
        return Err(Error::UnmatchedSource);
    }
    let kl = wavenumber(f, setup.cable.n) * setup.cable.length;
    let (s, c) = kl.sin_cos();
    let vb2 = setup.source_power;
    let ratio = match setup.load.canonical(z0) {
        Termination::Short => s * s,
        Termination::Open => c * c,
        Termination::Matched => 0.25,
        Termination::Finite(zl) if zl.im == 0.0 => {
            let zl = zl.re;
            (zl * zl * c * c + z0 * z0 * s * s) / ((z0 + zl) * (z0 + zl))
        }
        Termination::Finite(_) => {
            let gl = setup.load_reflection();
            let v = 0.5 * (1.0 + gl * round_trip_phase(setup, f));
            v.norm_sqr()
        }
    };
    Ok(vb2 * ratio)
}

/// Power at the source end over a grid, V^2/Hz.
///
/// A matched source uses [`matched_source_power`]; any other source uses
/// `v_b^2 |v_s / v_b|^2` from the closed form, with pole-adjacent points
/// excluded.
pub fn cable_noise_spectrum(setup: &CableSetup, grid: &FrequencyGrid) -> PowerSpectrum {
    let matched = setup.source_impedance.is_matched(setup.cable.z0);
    PowerSpectrum::evaluate(grid, |f| {
        if matched {
            matched_source_power(setup, f)
        } else {
            total_voltage_closed_form(setup, f).map(|v| setup.source_power * v.norm_sqr())
        }
    })
}

/// `exp(-2ikL)`.
fn round_trip_phase(setup: &CableSetup, f: f64) -> Complex64 {
    let (s, c) = (2.0 * wavenumber(f, setup.cable.n) * setup.cable.length).sin_cos();
    Complex64::new(c, -s)
}
