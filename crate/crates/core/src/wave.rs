//! Complex-phasor primitives shared by the line and splitter models.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Characteristic impedance of the BNC cables, ohms.
pub const DEFAULT_Z0: f64 = 50.0;
/// Refractive index of the cable dielectric.
pub const DEFAULT_INDEX: f64 = 1.60;
/// Room temperature, kelvin.
pub const DEFAULT_TEMPERATURE: f64 = 290.0;

/// Load seen at the end of a line or at a port.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    Short,
    Open,
    Matched,
    /// Finite complex impedance in ohms.
    Finite(Complex64),
}

impl Termination {
    pub fn resistor(ohms: f64) -> Self {
        Termination::Finite(Complex64::new(ohms, 0.0))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Termination::Finite(z) if !(z.re.is_finite() && z.im.is_finite()) => Err(
                Error::Validation(format!("termination impedance {z} is not finite")),
            ),
            Termination::Finite(z) if z.re < 0.0 => Err(Error::Validation(format!(
                "termination impedance {z} has negative real part"
            ))),
            _ => Ok(()),
        }
    }

    /// Impedance in ohms, `None` for an open circuit.
    pub fn impedance(&self, z0: f64) -> Option<Complex64> {
        match *self {
            Termination::Short => Some(Complex64::new(0.0, 0.0)),
            Termination::Open => None,
            Termination::Matched => Some(Complex64::new(z0, 0.0)),
            Termination::Finite(z) => Some(z),
        }
    }

    /// Resolves `Finite` values that coincide with a symbolic kind.
    pub fn canonical(&self, z0: f64) -> Termination {
        match *self {
            Termination::Finite(z) if z == Complex64::new(0.0, 0.0) => Termination::Short,
            Termination::Finite(z) if z == Complex64::new(z0, 0.0) => Termination::Matched,
            t => t,
        }
    }

    pub fn is_matched(&self, z0: f64) -> bool {
        self.canonical(z0) == Termination::Matched
    }

    /// Voltage-divider weights `(Z0/(Z0+Z), Z/(Z0+Z))` for a real load.
    ///
    /// Open maps to `(0, 1)` and short to `(1, 0)` exactly. The two weights
    /// always sum to one.
    pub fn divider_weights(&self, z0: f64) -> Result<(f64, f64)> {
        match *self {
            Termination::Short => Ok((1.0, 0.0)),
            Termination::Open => Ok((0.0, 1.0)),
            Termination::Matched => Ok((0.5, 0.5)),
            Termination::Finite(z) => {
                if z.im != 0.0 {
                    return Err(Error::Validation(format!(
                        "reactive termination {z} is not supported by the power-sum expression"
                    )));
                }
                let den = z0 + z.re;
                Ok((z0 / den, z.re / den))
            }
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::Short => write!(f, "short"),
            Termination::Open => write!(f, "open"),
            Termination::Matched => write!(f, "matched"),
            Termination::Finite(z) if z.im == 0.0 => write!(f, "{}", z.re),
            Termination::Finite(z) => write!(f, "{z}"),
        }
    }
}

/// One lossless coaxial run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CableSegment {
    pub length: f64,
    pub z0: f64,
    pub n: f64,
}

impl CableSegment {
    pub fn new(length: f64) -> Self {
        CableSegment {
            length,
            z0: DEFAULT_Z0,
            n: DEFAULT_INDEX,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length.is_finite() && self.length >= 0.0) {
            return Err(Error::Validation(format!(
                "cable length {} violates length >= 0",
                self.length
            )));
        }
        if !(self.z0.is_finite() && self.z0 > 0.0) {
            return Err(Error::Validation(format!("z0 {} violates z0 > 0", self.z0)));
        }
        if !(self.n.is_finite() && self.n >= 1.0) {
            return Err(Error::Validation(format!(
                "index {} violates n >= 1",
                self.n
            )));
        }
        Ok(())
    }

    pub fn phase(&self, f: f64) -> Complex64 {
        propagation_phase(f, self.n, self.length)
    }

    /// Free spectral range `c / (2 n L)` in Hz.
    pub fn free_spectral_range(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.n * self.length)
    }
}

/// Reflection coefficient `(Z - Z0) / (Z + Z0)`.
///
/// Short, open and matched loads give exactly -1, +1 and 0.
pub fn reflection_coefficient(load: Termination, z0: f64) -> Complex64 {
    match load.canonical(z0) {
        Termination::Short => Complex64::new(-1.0, 0.0),
        Termination::Open => Complex64::new(1.0, 0.0),
        Termination::Matched => Complex64::new(0.0, 0.0),
        Termination::Finite(z) => (z - z0) / (z + z0),
    }
}

/// Wavenumber `2 pi f n / c` in rad/m.
pub fn wavenumber(f: f64, n: f64) -> f64 {
    2.0 * PI * f * n / SPEED_OF_LIGHT
}

/// One-way phase factor `exp(-i k L)`.
pub fn propagation_phase(f: f64, n: f64, length: f64) -> Complex64 {
    let (s, c) = (wavenumber(f, n) * length).sin_cos();
    Complex64::new(c, -s)
}

/// Johnson-Nyquist open-circuit voltage density `4 kB T Z`, V^2/Hz.
pub fn thermal_source_power(temperature: f64, resistance: f64) -> f64 {
    4.0 * BOLTZMANN * temperature * resistance
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn symbolic_reflections_are_exact() {
        assert_eq!(
            reflection_coefficient(Termination::Short, 50.0),
            c(-1.0, 0.0)
        );
        assert_eq!(reflection_coefficient(Termination::Open, 50.0), c(1.0, 0.0));
        assert_eq!(
            reflection_coefficient(Termination::Matched, 50.0),
            c(0.0, 0.0)
        );
        assert_eq!(
            reflection_coefficient(Termination::resistor(0.0), 50.0),
            c(-1.0, 0.0)
        );
        assert_eq!(
            reflection_coefficient(Termination::resistor(50.0), 50.0),
            c(0.0, 0.0)
        );
        let g = reflection_coefficient(Termination::resistor(100.0), 50.0);
        assert!((g - c(1.0 / 3.0, 0.0)).norm() < 1e-16);
    }

    #[test]
    fn wavenumber_values() {
        assert_eq!(wavenumber(0.0, 1.6), 0.0);
        let f = SPEED_OF_LIGHT / (2.0 * 1.6 * 4.08);
        let kl = wavenumber(f, 1.6) * 4.08;
        assert!((kl - PI).abs() < 4.0 * f64::EPSILON * PI);
        // 2*pi*1e6/c evaluated independently
        assert!((wavenumber(1e6, 1.0) - 2.095_845_021_951_681_8e-2).abs() < 1e-17);
    }

    #[test]
    fn phase_special_values() {
        assert_eq!(propagation_phase(123e6, 1.6, 0.0), c(1.0, 0.0));
        let quarter = SPEED_OF_LIGHT / (4.0 * 1.6 * 2.0);
        assert!((propagation_phase(quarter, 1.6, 2.0) - c(0.0, -1.0)).norm() < 1e-15);
        assert!((propagation_phase(2.0 * quarter, 1.6, 2.0) - c(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn thermal_power() {
        assert_eq!(thermal_source_power(0.0, 50.0), 0.0);
        assert_eq!(thermal_source_power(290.0, 0.0), 0.0);
        let p = thermal_source_power(290.0, 50.0);
        assert!((p - 8.007_764_2e-19).abs() < 1e-26);
    }

    #[test]
    fn validation() {
        assert!(Termination::resistor(-1.0).validate().is_err());
        assert!(Termination::Finite(c(10.0, -30.0)).validate().is_ok());
        assert!(CableSegment::new(-0.1).validate().is_err());
        assert!(CableSegment {
            n: 0.9,
            ..CableSegment::new(1.0)
        }
        .validate()
        .is_err());
        assert!(CableSegment {
            z0: 0.0,
            ..CableSegment::new(1.0)
        }
        .validate()
        .is_err());
    }

    #[test]
    fn divider_weights_limits() {
        assert_eq!(Termination::Open.divider_weights(50.0).unwrap(), (0.0, 1.0));
        assert_eq!(
            Termination::Short.divider_weights(50.0).unwrap(),
            (1.0, 0.0)
        );
        assert_eq!(
            Termination::resistor(50.0).divider_weights(50.0).unwrap(),
            (0.5, 0.5)
        );
        assert!(Termination::Finite(c(1.0, 1.0))
            .divider_weights(50.0)
            .is_err());
    }

    proptest! {
        #[test]
        fn passive_loads_reflect_at_most_unity(re in 0.0..1e6f64, im in -1e6..1e6f64, z0 in 1.0..500.0f64) {
            let g = reflection_coefficient(Termination::Finite(c(re, im)), z0);
            prop_assert!(g.norm() <= 1.0 + 1e-15);
        }

        #[test]
        fn inversion_antisymmetry(z in 1e-3..1e5f64, z0 in 1.0..500.0f64) {
            let g = reflection_coefficient(Termination::resistor(z), z0);
            let h = reflection_coefficient(Termination::resistor(z0 * z0 / z), z0);
            prop_assert!((g + h).norm() < 1e-12);
        }

        #[test]
        fn phase_is_additive_and_unimodular(f in 0.0..1e9f64, n in 1.0..3.0f64, l1 in 0.0..20.0f64, l2 in 0.0..20.0f64) {
            let a = propagation_phase(f, n, l1);
            let b = propagation_phase(f, n, l2);
            let ab = propagation_phase(f, n, l1 + l2);
            prop_assert!((a * b - ab).norm() < 1e-12);
            prop_assert!((a.norm() - 1.0).abs() <= 1e-15);
        }
    }
}
