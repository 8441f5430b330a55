//! Frequency grids and linear power spectra.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing list of frequencies in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid(Vec<f64>);

impl FrequencyGrid {
    pub fn new(frequencies: Vec<f64>) -> Result<Self> {
        if frequencies.is_empty() {
            return Err(Error::Validation("frequency grid is empty".into()));
        }
        if frequencies.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::Validation(
                "frequencies must be finite and non-negative".into(),
            ));
        }
        if let Some(i) = frequencies.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::NonMonotonicFrequency { row: i + 2 });
        }
        Ok(FrequencyGrid(frequencies))
    }

    /// `points` evenly spaced frequencies from `start` to `stop` inclusive.
    pub fn linear(start: f64, stop: f64, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::Validation(format!(
                "grid points {points} violates points >= 2"
            )));
        }
        if !(start >= 0.0 && stop > start) {
            return Err(Error::Validation(format!(
                "grid [{start}, {stop}] violates stop > start >= 0"
            )));
        }
        let step = (stop - start) / (points - 1) as f64;
        let mut f: Vec<f64> = (0..points).map(|i| start + step * i as f64).collect();
        f[points - 1] = stop;
        FrequencyGrid::new(f)
    }

    pub fn single(f: f64) -> Result<Self> {
        FrequencyGrid::new(vec![f])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied()
    }
}

/// Model power per frequency, before any display transformation.
///
/// Excluded points carry `NaN` power.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    pub frequencies: Vec<f64>,
    pub power: Vec<f64>,
    pub excluded: Vec<bool>,
}

impl PowerSpectrum {
    /// Evaluates `eval` independently at every grid point; errors mark the
    /// point as excluded.
    pub fn evaluate<F>(grid: &FrequencyGrid, mut eval: F) -> Self
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let mut power = Vec::with_capacity(grid.len());
        let mut excluded = Vec::with_capacity(grid.len());
        for f in grid.iter() {
            match eval(f) {
                Ok(p) => {
                    power.push(p);
                    excluded.push(false);
                }
                Err(_) => {
                    power.push(f64::NAN);
                    excluded.push(true);
                }
            }
        }
        PowerSpectrum {
            frequencies: grid.as_slice().to_vec(),
            power,
            excluded,
        }
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn excluded_count(&self) -> usize {
        self.excluded.iter().filter(|e| **e).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_grid_endpoints() {
        let g = FrequencyGrid::linear(1e6, 100e6, 2000).unwrap();
        assert_eq!(g.len(), 2000);
        assert_eq!(g.as_slice()[0], 1e6);
        assert_eq!(g.as_slice()[1999], 100e6);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(FrequencyGrid::new(vec![]).is_err());
        assert!(FrequencyGrid::linear(1.0, 1.0, 10).is_err());
        assert!(FrequencyGrid::linear(0.0, 1.0, 1).is_err());
        assert!(matches!(
            FrequencyGrid::new(vec![1.0, 2.0, 2.0]),
            Err(Error::NonMonotonicFrequency { row: 3 })
        ));
    }
}
