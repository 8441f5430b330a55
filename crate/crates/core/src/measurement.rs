//! From model power to analyzer display levels.
//!
//! Model power is first normalized to the same network with matched
//! terminations, then mapped through `a + log10(p + sn)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{FrequencyGrid, PowerSpectrum};
use crate::splitter::{limit_noise_power, total_noise_power, LimitIndex, SplitterSetup};
use crate::tline::{
    cable_noise_spectrum, matched_source_power, total_voltage_closed_form, CableSetup,
};

/// Base of the display logarithm.
pub const LOG_BASE: f64 = 10.0;

/// `level = a + log10(relative_power + sn)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplayModel {
    pub a: f64,
    pub sn: f64,
}

impl DisplayModel {
    /// Single-cable fit values.
    pub const SINGLE_CABLE_FIT: DisplayModel = DisplayModel {
        a: -1.754,
        sn: 1.91,
    };
    /// Splitter fit values.
    pub const SPLITTER_FIT: DisplayModel = DisplayModel { a: -1.27, sn: 1.10 };

    pub fn validate(&self) -> Result<()> {
        if !self.a.is_finite() {
            return Err(Error::Validation(format!(
                "display offset a = {} is not finite",
                self.a
            )));
        }
        if !(self.sn.is_finite() && self.sn >= 0.0) {
            return Err(Error::Validation(format!(
                "sn = {} violates sn >= 0",
                self.sn
            )));
        }
        Ok(())
    }

    pub fn level(&self, relative_power: f64) -> Result<f64> {
        let arg = relative_power + self.sn;
        if arg.is_nan() || arg <= 0.0 {
            return Err(Error::NonPositiveArgument { value: arg });
        }
        Ok(self.a + arg.log10())
    }

    /// Inverse of [`DisplayModel::level`].
    pub fn relative_power(&self, level: f64) -> f64 {
        LOG_BASE.powf(level - self.a) - self.sn
    }
}

/// Spectrum in display units, optionally carrying the linear power it came
/// from. Excluded points have `NaN` level.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpectrum {
    pub frequencies: Vec<f64>,
    pub linear_power: Option<Vec<f64>>,
    pub display_level: Vec<f64>,
    pub excluded: Vec<bool>,
}

impl NoiseSpectrum {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn included_count(&self) -> usize {
        self.excluded.iter().filter(|e| !**e).count()
    }

    pub fn grid(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::new(self.frequencies.clone())
    }

    /// Applies `model` to relative power; points where the log argument is
    /// not positive fail the whole conversion.
    pub fn from_relative(power: &PowerSpectrum, model: &DisplayModel) -> Result<Self> {
        let mut display_level = Vec::with_capacity(power.len());
        for (p, ex) in power.power.iter().zip(&power.excluded) {
            display_level.push(if *ex { f64::NAN } else { model.level(*p)? });
        }
        Ok(NoiseSpectrum {
            frequencies: power.frequencies.clone(),
            linear_power: Some(power.power.clone()),
            display_level,
            excluded: power.excluded.clone(),
        })
    }
}

/// Pointwise `raw / reference`. Points excluded in either input stay
/// excluded.
pub fn normalize_to_matched(
    raw: &PowerSpectrum,
    reference: &PowerSpectrum,
) -> Result<PowerSpectrum> {
    if raw.frequencies != reference.frequencies {
        return Err(Error::Validation(
            "raw and reference spectra are on different grids".into(),
        ));
    }
    let mut power = Vec::with_capacity(raw.len());
    let mut excluded = Vec::with_capacity(raw.len());
    for i in 0..raw.len() {
        let ex = raw.excluded[i] || reference.excluded[i];
        if ex {
            power.push(f64::NAN);
        } else {
            let r = reference.power[i];
            if r == 0.0 {
                return Err(Error::ZeroReference {
                    frequency: raw.frequencies[i],
                });
            }
            power.push(raw.power[i] / r);
        }
        excluded.push(ex);
    }
    Ok(PowerSpectrum {
        frequencies: raw.frequencies.clone(),
        power,
        excluded,
    })
}

/// `a + log10(p + sn)` per point.
pub fn apply_display_model(relative_power: &[f64], model: &DisplayModel) -> Result<Vec<f64>> {
    relative_power.iter().map(|p| model.level(*p)).collect()
}

/// A network whose noise power can be evaluated relative to its matched
/// counterpart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NetworkModel {
    SingleCable(CableSetup),
    /// Splitter with short/open arms, evaluated by the limiting form.
    SplitterLimit(SplitterSetup, LimitIndex),
    /// Splitter with arbitrary real terminations, full power sum.
    SplitterFull(SplitterSetup),
}

impl NetworkModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            NetworkModel::SingleCable(s) => s.validate(),
            NetworkModel::SplitterLimit(s, _) | NetworkModel::SplitterFull(s) => s.validate(),
        }
    }

    /// Linear model power, V^2/Hz.
    pub fn power(&self, f: f64) -> Result<f64> {
        match self {
            NetworkModel::SingleCable(s) => single_cable_power(s, f),
            NetworkModel::SplitterLimit(s, m) => Ok(limit_noise_power(s, f, *m)),
            NetworkModel::SplitterFull(s) => total_noise_power(s, f),
        }
    }

    /// Power of the same network with matched terminations, V^2/Hz.
    pub fn reference_power(&self, f: f64) -> Result<f64> {
        match self {
            NetworkModel::SingleCable(s) => single_cable_power(&s.matched_reference(), f),
            NetworkModel::SplitterLimit(s, _) | NetworkModel::SplitterFull(s) => {
                total_noise_power(&s.matched_reference(), f)
            }
        }
    }

    /// Power normalized to the matched reference.
    pub fn relative_power(&self, f: f64) -> Result<f64> {
        let r = self.reference_power(f)?;
        if r == 0.0 {
            return Err(Error::ZeroReference { frequency: f });
        }
        Ok(self.power(f)? / r)
    }

    pub fn power_spectrum(&self, grid: &FrequencyGrid) -> PowerSpectrum {
        match self {
            NetworkModel::SingleCable(s) => cable_noise_spectrum(s, grid),
            _ => PowerSpectrum::evaluate(grid, |f| self.power(f)),
        }
    }

    pub fn reference_spectrum(&self, grid: &FrequencyGrid) -> PowerSpectrum {
        PowerSpectrum::evaluate(grid, |f| self.reference_power(f))
    }

    pub fn relative_spectrum(&self, grid: &FrequencyGrid) -> Result<PowerSpectrum> {
        normalize_to_matched(&self.power_spectrum(grid), &self.reference_spectrum(grid))
    }
}

fn single_cable_power(s: &CableSetup, f: f64) -> Result<f64> {
    if s.source_impedance.is_matched(s.cable.z0) {
        matched_source_power(s, f)
    } else {
        total_voltage_closed_form(s, f).map(|v| s.source_power * v.norm_sqr())
    }
}

/// Everything needed to produce a display-level spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParameters {
    pub network: NetworkModel,
    pub display: DisplayModel,
}

/// Noiseless display-level spectrum of `params` on `grid`.
pub fn model_spectrum(params: &ModelParameters, grid: &FrequencyGrid) -> Result<NoiseSpectrum> {
    params.network.validate()?;
    params.display.validate()?;
    let rel = params.network.relative_spectrum(grid)?;
    NoiseSpectrum::from_relative(&rel, &params.display)
}

/// Model spectrum plus seeded Gaussian perturbation of standard deviation
/// `noise_sigma` in display units.
pub fn synth_spectrum(
    truth: &ModelParameters,
    grid: &FrequencyGrid,
    noise_sigma: f64,
    seed: u64,
) -> Result<NoiseSpectrum> {
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(Error::Validation(format!(
            "noise sigma {noise_sigma} violates sigma >= 0"
        )));
    }
    let mut spec = model_spectrum(truth, grid)?;
    if noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_sigma).expect("sigma checked above");
        for (level, ex) in spec.display_level.iter_mut().zip(&spec.excluded) {
            if !*ex {
                *level += normal.sample(&mut rng);
            }
        }
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splitter::Arm;
    use crate::wave::Termination;
    use proptest::prelude::*;

    fn grid() -> FrequencyGrid {
        FrequencyGrid::linear(1e6, 100e6, 400).unwrap()
    }

    #[test]
    fn normalize_examples() {
        let m = NetworkModel::SingleCable(CableSetup::new(4.08, Termination::Matched));
        let raw = m.power_spectrum(&grid());
        let rel = normalize_to_matched(&raw, &raw).unwrap();
        assert!(rel.power.iter().all(|p| *p == 1.0));

        let s = NetworkModel::SingleCable(CableSetup::new(4.08, Termination::Short));
        let rel = s.relative_spectrum(&grid()).unwrap();
        for (f, p) in rel.frequencies.iter().zip(&rel.power) {
            let kl = crate::wave::wavenumber(*f, 1.6) * 4.08;
            assert!((p - 4.0 * kl.sin().powi(2)).abs() < 1e-12);
        }

        let zero = PowerSpectrum {
            frequencies: vec![1.0, 2.0],
            power: vec![0.0, 1.0],
            excluded: vec![false, false],
        };
        let one = PowerSpectrum {
            power: vec![1.0, 1.0],
            ..zero.clone()
        };
        assert_eq!(normalize_to_matched(&zero, &one).unwrap().power[0], 0.0);
        assert!(matches!(
            normalize_to_matched(&one, &zero),
            Err(Error::ZeroReference { frequency }) if frequency == 1.0
        ));
    }

    #[test]
    fn display_examples() {
        let unit = DisplayModel { a: 0.0, sn: 0.0 };
        assert_eq!(unit.level(1.0).unwrap(), 0.0);
        let fit = DisplayModel::SINGLE_CABLE_FIT;
        assert!((fit.level(0.0).unwrap() - (-1.472_966_632_752_272_6)).abs() < 1e-12);
        assert!((fit.level(4.0).unwrap() - (-0.982_412_519_118_744_6)).abs() < 1e-12);
        assert!(matches!(
            unit.level(0.0),
            Err(Error::NonPositiveArgument { .. })
        ));
        assert!(apply_display_model(&[1.0, -2.0], &fit).is_err());
    }

    #[test]
    fn matched_spectrum_displays_flat() {
        let m = ModelParameters {
            network: NetworkModel::SingleCable(CableSetup::new(4.08, Termination::Matched)),
            display: DisplayModel::SINGLE_CABLE_FIT,
        };
        let s = model_spectrum(&m, &grid()).unwrap();
        let expected = -1.754 + (1.0f64 + 1.91).log10();
        assert!(s.display_level.iter().all(|l| *l == expected));

        let sp = ModelParameters {
            network: NetworkModel::SplitterFull(SplitterSetup::new(
                Arm {
                    length: 1.0,
                    termination: Termination::Matched,
                },
                Arm {
                    length: 2.0,
                    termination: Termination::Matched,
                },
                2.0,
            )),
            display: DisplayModel::SPLITTER_FIT,
        };
        let s = model_spectrum(&sp, &grid()).unwrap();
        for p in s.linear_power.unwrap() {
            assert!((p - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn synth_determinism_and_spread() {
        let truth = ModelParameters {
            network: NetworkModel::SingleCable(CableSetup::new(4.08, Termination::Short)),
            display: DisplayModel::SINGLE_CABLE_FIT,
        };
        let g = FrequencyGrid::linear(1e6, 100e6, 20_000).unwrap();
        let clean = synth_spectrum(&truth, &g, 0.0, 7).unwrap();
        assert_eq!(clean, model_spectrum(&truth, &g).unwrap());
        let a = synth_spectrum(&truth, &g, 0.01, 7).unwrap();
        let b = synth_spectrum(&truth, &g, 0.01, 7).unwrap();
        assert_eq!(a, b);
        let diffs: Vec<f64> = a
            .display_level
            .iter()
            .zip(&clean.display_level)
            .map(|(x, y)| x - y)
            .collect();
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64;
        let sd = var.sqrt();
        assert!((0.008..=0.012).contains(&sd), "sd {sd}");
        assert!(synth_spectrum(&truth, &g, -1.0, 7).is_err());
    }

    proptest! {
        #[test]
        fn display_round_trip(p in 1e-6..1e3f64, a in -5.0..5.0f64, sn in 0.0..10.0f64) {
            let m = DisplayModel { a, sn };
            let back = m.relative_power(m.level(p).unwrap());
            prop_assert!((back - p).abs() <= 1e-12 * p.max(1.0) * (1.0 + sn));
        }

        #[test]
        fn display_is_monotone(p in 0.0..1e3f64, dp in 1e-9..1.0f64, a in -5.0..5.0f64, sn in 0.01..10.0f64) {
            let m = DisplayModel { a, sn };
            prop_assert!(m.level(p + dp).unwrap() > m.level(p).unwrap());
        }
    }
}
