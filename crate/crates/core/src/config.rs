//! TOML topology configuration.
//!
//! ```toml
//! mode = "single-cable"
//!
//! [cable]
//! length_m = 4.08
//! termination = "short"     # "short" | "open" | "matched" | ohms
//!
//! [display]
//! a = -1.754
//! sn = 1.91
//!
//! [grid]
//! start_hz = 1e6
//! stop_hz = 100e6
//! points = 2000
//! ```
//!
//! A splitter configuration uses a `[splitter]` table with `profile`,
//! `amp_cable_m`, `j1_termination`, `temperature_k` and `[splitter.arm3]` /
//! `[splitter.arm4]` tables holding `length_m` and `termination`.

use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::measurement::{DisplayModel, ModelParameters, NetworkModel};
use crate::spectrum::FrequencyGrid;
use crate::splitter::{Arm, LimitIndex, SplitterModel, SplitterSetup};
use crate::tline::CableSetup;
use crate::wave::{
    thermal_source_power, CableSegment, Termination, DEFAULT_INDEX, DEFAULT_TEMPERATURE, DEFAULT_Z0,
};

pub const DEFAULT_GRID_START: f64 = 1e6;
pub const DEFAULT_GRID_STOP: f64 = 100e6;
pub const DEFAULT_GRID_POINTS: usize = 2000;
pub const DEFAULT_PROFILE: &str = "H2979-fit";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    SingleCable,
    Splitter,
}

/// A validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologyConfig {
    pub mode: Mode,
    pub network: NetworkModel,
    pub display: DisplayModel,
    pub grid: FrequencyGrid,
}

impl TopologyConfig {
    pub fn model(&self) -> ModelParameters {
        ModelParameters {
            network: self.network,
            display: self.display,
        }
    }

    pub fn splitter(&self) -> Option<&SplitterSetup> {
        match &self.network {
            NetworkModel::SplitterFull(s) | NetworkModel::SplitterLimit(s, _) => Some(s),
            NetworkModel::SingleCable(_) => None,
        }
    }

    pub fn cable(&self) -> Option<&CableSetup> {
        match &self.network {
            NetworkModel::SingleCable(c) => Some(c),
            _ => None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum TermValue {
    Ohms(f64),
    Text(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: String,
    cable: Option<RawCable>,
    splitter: Option<RawSplitter>,
    display: Option<RawDisplay>,
    grid: Option<RawGrid>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCable {
    length_m: f64,
    z0_ohm: Option<f64>,
    n: Option<f64>,
    termination: TermValue,
    source_termination: Option<TermValue>,
    temperature_k: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArm {
    length_m: f64,
    termination: TermValue,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTau {
    #[serde(rename = "13")]
    t13: Option<f64>,
    #[serde(rename = "14")]
    t14: Option<f64>,
    #[serde(rename = "23")]
    t23: Option<f64>,
    #[serde(rename = "24")]
    t24: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSplitter {
    profile: Option<String>,
    arm3: RawArm,
    arm4: RawArm,
    amp_cable_m: f64,
    j1_termination: Option<TermValue>,
    j1_cable_m: Option<f64>,
    source_termination: Option<TermValue>,
    temperature_k: Option<f64>,
    z0_ohm: Option<f64>,
    n: Option<f64>,
    /// Delay overrides in nanoseconds, keyed by port pair.
    tau_ns: Option<RawTau>,
    /// Explicit real 4x4 scattering matrix.
    s: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDisplay {
    a: Option<f64>,
    sn: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    start_hz: Option<f64>,
    stop_hz: Option<f64>,
    points: Option<usize>,
}

fn termination(value: &TermValue, key: &str) -> Result<Termination> {
    let t = match value {
        TermValue::Ohms(z) => Termination::Finite(Complex64::new(*z, 0.0)),
        TermValue::Text(s) => match s.trim().to_ascii_lowercase().as_str() {
            "short" => Termination::Short,
            "open" => Termination::Open,
            "matched" => Termination::Matched,
            other => match other.parse::<f64>() {
                Ok(z) => Termination::resistor(z),
                Err(_) => {
                    return Err(Error::Validation(format!(
                        "{key}: termination {s:?} is not short, open, matched or a number of ohms"
                    )))
                }
            },
        },
    };
    t.validate()
        .map_err(|e| Error::Validation(format!("{key}: {e}")))?;
    Ok(t)
}

pub fn parse_config(text: &str) -> Result<TopologyConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let mode = match raw.mode.as_str() {
        "single-cable" => Mode::SingleCable,
        "splitter" => Mode::Splitter,
        other => {
            return Err(Error::Validation(format!(
                "mode {other:?} is not \"single-cable\" or \"splitter\""
            )))
        }
    };

    let network = match mode {
        Mode::SingleCable => {
            if raw.splitter.is_some() {
                return Err(Error::Validation(
                    "single-cable mode does not take a [splitter] table".into(),
                ));
            }
            let c = raw.cable.ok_or_else(|| {
                Error::Validation("single-cable mode needs a [cable] table".into())
            })?;
            let cable = CableSegment {
                length: c.length_m,
                z0: c.z0_ohm.unwrap_or(DEFAULT_Z0),
                n: c.n.unwrap_or(DEFAULT_INDEX),
            };
            let temperature = c.temperature_k.unwrap_or(DEFAULT_TEMPERATURE);
            if !(temperature.is_finite() && temperature >= 0.0) {
                return Err(Error::Validation(format!(
                    "cable.temperature_k = {temperature} violates T >= 0"
                )));
            }
            let setup = CableSetup {
                cable,
                load: termination(&c.termination, "cable.termination")?,
                source_impedance: match &c.source_termination {
                    Some(t) => termination(t, "cable.source_termination")?,
                    None => Termination::Matched,
                },
                source_power: thermal_source_power(temperature, cable.z0),
            };
            setup.validate()?;
            NetworkModel::SingleCable(setup)
        }
        Mode::Splitter => {
            if raw.cable.is_some() {
                return Err(Error::Validation(
                    "splitter mode does not take a [cable] table".into(),
                ));
            }
            let s = raw.splitter.ok_or_else(|| {
                Error::Validation("splitter mode needs a [splitter] table".into())
            })?;
            let mut model =
                SplitterModel::profile(s.profile.as_deref().unwrap_or(DEFAULT_PROFILE))?;
            if let Some(rows) = &s.s {
                if rows.len() != 4 || rows.iter().any(|r| r.len() != 4) {
                    return Err(Error::Validation("splitter.s must be a 4x4 matrix".into()));
                }
                for (i, row) in rows.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        model.set_s(i + 1, j + 1, Complex64::new(*v, 0.0));
                    }
                }
            }
            if let Some(t) = &s.tau_ns {
                for (pair, v) in [
                    ((1, 3), t.t13),
                    ((1, 4), t.t14),
                    ((2, 3), t.t23),
                    ((2, 4), t.t24),
                ] {
                    if let Some(ns) = v {
                        model.set_tau_pair(pair.0, pair.1, ns / 1e9);
                    }
                }
            }
            let setup = SplitterSetup {
                splitter: model,
                arm3: Arm {
                    length: s.arm3.length_m,
                    termination: termination(&s.arm3.termination, "splitter.arm3.termination")?,
                },
                arm4: Arm {
                    length: s.arm4.length_m,
                    termination: termination(&s.arm4.termination, "splitter.arm4.termination")?,
                },
                amp_cable_length: s.amp_cable_m,
                j1_termination: match &s.j1_termination {
                    Some(t) => termination(t, "splitter.j1_termination")?,
                    None => Termination::Matched,
                },
                j1_cable_length: s.j1_cable_m.unwrap_or(0.0),
                source_impedance: match &s.source_termination {
                    Some(t) => termination(t, "splitter.source_termination")?,
                    None => Termination::Matched,
                },
                temperature: s.temperature_k.unwrap_or(DEFAULT_TEMPERATURE),
                z0: s.z0_ohm.unwrap_or(DEFAULT_Z0),
                n: s.n.unwrap_or(DEFAULT_INDEX),
            };
            setup.validate()?;
            for t in [
                setup.arm3.termination,
                setup.arm4.termination,
                setup.source_impedance,
            ] {
                t.divider_weights(setup.z0)?;
            }
            // Short/open arms with matched J1 and amplifier have the closed
            // limiting form; anything else needs the full expression.
            let matched_ends = setup.j1_termination.is_matched(setup.z0)
                && setup.source_impedance.is_matched(setup.z0);
            match LimitIndex::from_setup(&setup) {
                Some(m) if matched_ends => NetworkModel::SplitterLimit(setup, m),
                _ => NetworkModel::SplitterFull(setup),
            }
        }
    };

    let default_display = match mode {
        Mode::SingleCable => DisplayModel::SINGLE_CABLE_FIT,
        Mode::Splitter => DisplayModel::SPLITTER_FIT,
    };
    let display = match raw.display {
        Some(d) => DisplayModel {
            a: d.a.unwrap_or(default_display.a),
            sn: d.sn.unwrap_or(default_display.sn),
        },
        None => default_display,
    };
    display.validate()?;

    let (start, stop, points) = match raw.grid {
        Some(g) => (
            g.start_hz.unwrap_or(DEFAULT_GRID_START),
            g.stop_hz.unwrap_or(DEFAULT_GRID_STOP),
            g.points.unwrap_or(DEFAULT_GRID_POINTS),
        ),
        None => (DEFAULT_GRID_START, DEFAULT_GRID_STOP, DEFAULT_GRID_POINTS),
    };
    let grid = FrequencyGrid::linear(start, stop, points)?;

    Ok(TopologyConfig {
        mode,
        network,
        display,
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_single_cable_defaults() {
        let cfg = parse_config(
            "mode = \"single-cable\"\n[cable]\nlength_m = 4\ntermination = \"short\"\n",
        )
        .unwrap();
        let c = cfg.cable().unwrap();
        assert_eq!(c.cable.z0, 50.0);
        assert_eq!(c.cable.n, 1.60);
        assert_eq!(c.source_power, thermal_source_power(290.0, 50.0));
        assert_eq!(c.load, Termination::Short);
        assert_eq!(cfg.grid.len(), 2000);
        assert_eq!(cfg.display, DisplayModel::SINGLE_CABLE_FIT);
    }

    #[test]
    fn splitter_profile_loads_delays() {
        let text = r#"
mode = "splitter"
[splitter]
profile = "H2979-fit"
amp_cable_m = 2.0
[splitter.arm3]
length_m = 1.0
termination = "open"
[splitter.arm4]
length_m = 4.0
termination = 0
"#;
        let cfg = parse_config(text).unwrap();
        let s = cfg.splitter().unwrap();
        assert_eq!(s.splitter.tau(3, 2), 8.46e-9);
        assert_eq!(s.splitter.tau(4, 1), 5.31e-9);
        assert_eq!(s.arm4.termination, Termination::resistor(0.0));
        assert!(matches!(
            cfg.network,
            NetworkModel::SplitterLimit(_, LimitIndex { m3: 1, m4: 0 })
        ));
        assert_eq!(cfg.display, DisplayModel::SPLITTER_FIT);
    }

    #[test]
    fn tau_override() {
        let text = r#"
mode = "splitter"
[splitter]
profile = "ideal"
amp_cable_m = 2.0
tau_ns = { "23" = 1.5 }
[splitter.arm3]
length_m = 1.0
termination = "open"
[splitter.arm4]
length_m = 4.0
termination = "short"
"#;
        let s = *parse_config(text).unwrap().splitter().unwrap();
        assert_eq!(s.splitter.tau(2, 3), 1.5e-9);
        assert_eq!(s.splitter.tau(3, 2), 1.5e-9);
        assert_eq!(s.splitter.tau(1, 3), 0.0);
    }

    #[test]
    fn negative_length_rejected() {
        let err = parse_config(
            "mode = \"single-cable\"\n[cable]\nlength_m = -1\ntermination = \"short\"\n",
        )
        .unwrap_err();
        assert!(
            matches!(err, Error::Validation(ref m) if m.contains("length >= 0")),
            "{err}"
        );
    }

    #[test]
    fn unknown_key_named() {
        let err = parse_config(
            "mode = \"single-cable\"\n[cable]\nlength_m = 1\ntermination = \"short\"\ncolour = 3\n",
        )
        .unwrap_err();
        assert!(
            matches!(err, Error::Parse(ref m) if m.contains("colour")),
            "{err}"
        );
    }

    #[test]
    fn bad_values_rejected() {
        assert!(parse_config("mode = \"triple\"\n").is_err());
        assert!(parse_config("mode = \"single-cable\"\n").is_err());
        assert!(parse_config(
            "mode = \"single-cable\"\n[cable]\nlength_m = 1\ntermination = \"banana\"\n"
        )
        .is_err());
        assert!(parse_config("mode = \"single-cable\"\n[cable]\nlength_m = 1\ntermination = \"short\"\n[grid]\npoints = 1\n").is_err());
        assert!(parse_config("mode = \"single-cable\"\n[cable]\nlength_m = 1\ntermination = \"short\"\n[display]\nsn = -1\n").is_err());
        assert!(matches!(
            parse_config("mode = = 3").unwrap_err(),
            Error::Parse(_)
        ));
    }
}
