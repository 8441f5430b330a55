//! 4-port splitter network: the amplifier sits behind a cable on port J2,
//! ports J3 and J4 carry terminated cables, and J1 is terminated.
//!
//! Two routes to the noise power at the amplifier are provided. The phasor
//! route ([`reflected_wave_response`], [`arm_noise_contribution`],
//! [`j1_noise_contribution`]) follows each independent thermal source through
//! the network. [`total_noise_power`] is the expanded closed form of the
//! summed powers, and [`limit_noise_power`] is its short/open limit.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};
use crate::spectrum::{FrequencyGrid, PowerSpectrum};
use crate::wave::{
    propagation_phase, reflection_coefficient, thermal_source_power, wavenumber, Termination,
    BOLTZMANN, DEFAULT_INDEX, DEFAULT_TEMPERATURE, DEFAULT_Z0,
};

/// Fitted port-to-J3/J4 delays of the H2979 splitter, seconds.
pub const H2979_TAU_J1: f64 = 5.31e-9;
pub const H2979_TAU_J2: f64 = 8.46e-9;

/// Unitarity defect above which a splitter fails validation.
pub const UNITARITY_TOLERANCE: f64 = 1e-12;

/// Scattering amplitudes and port-pair delays, indexed by 1-based port.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitterModel {
    s: [[Complex64; 4]; 4],
    tau: [[f64; 4]; 4],
}

impl Default for SplitterModel {
    fn default() -> Self {
        SplitterModel::ideal()
    }
}

impl SplitterModel {
    /// Sum/difference hybrid with zero delays: `s23 = s32 = -1/sqrt2`,
    /// `s13 = s31 = s14 = s41 = s24 = s42 = +1/sqrt2`.
    pub fn ideal() -> Self {
        let mut m = SplitterModel {
            s: [[Complex64::new(0.0, 0.0); 4]; 4],
            tau: [[0.0; 4]; 4],
        };
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        m.set_s_pair(2, 3, -h);
        m.set_s_pair(2, 4, h);
        m.set_s_pair(1, 3, h);
        m.set_s_pair(1, 4, h);
        m
    }

    /// The ideal hybrid with the fitted H2979 delays
    /// (`tau13 = tau14 = 5.31 ns`, `tau23 = tau24 = 8.46 ns`).
    pub fn h2979_fit() -> Self {
        let mut m = SplitterModel::ideal();
        m.set_tau_pair(1, 3, H2979_TAU_J1);
        m.set_tau_pair(1, 4, H2979_TAU_J1);
        m.set_tau_pair(2, 3, H2979_TAU_J2);
        m.set_tau_pair(2, 4, H2979_TAU_J2);
        m
    }

    pub fn profile(name: &str) -> Result<Self> {
        match name {
            "H2979-fit" => Ok(SplitterModel::h2979_fit()),
            "ideal" => Ok(SplitterModel::ideal()),
            other => Err(Error::Validation(format!(
                "unknown splitter profile {other:?} (expected \"H2979-fit\" or \"ideal\")"
            ))),
        }
    }

    pub fn s(&self, i: usize, j: usize) -> Complex64 {
        self.s[i - 1][j - 1]
    }

    pub fn tau(&self, i: usize, j: usize) -> f64 {
        self.tau[i - 1][j - 1]
    }

    pub fn set_s(&mut self, i: usize, j: usize, value: Complex64) {
        self.s[i - 1][j - 1] = value;
    }

    pub fn set_s_pair(&mut self, i: usize, j: usize, value: Complex64) {
        self.set_s(i, j, value);
        self.set_s(j, i, value);
    }

    pub fn set_tau(&mut self, i: usize, j: usize, seconds: f64) {
        self.tau[i - 1][j - 1] = seconds;
    }

    pub fn set_tau_pair(&mut self, i: usize, j: usize, seconds: f64) {
        self.set_tau(i, j, seconds);
        self.set_tau(j, i, seconds);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    /// Max entry of `|B^H B - I|` for `B = [[s13, s14], [s23, s24]]`.
    pub unitarity_defect: f64,
    /// Max `|tau_ij - tau_ji|`, seconds.
    pub tau_asymmetry: f64,
    pub passed: bool,
    pub notes: Vec<String>,
}

pub fn validate_splitter(model: &SplitterModel) -> ValidationReport {
    let b = [
        [model.s(1, 3), model.s(1, 4)],
        [model.s(2, 3), model.s(2, 4)],
    ];
    let mut unitarity_defect: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let gram: Complex64 = (0..2).map(|r| b[r][i].conj() * b[r][j]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            unitarity_defect = unitarity_defect.max((gram - target).norm());
        }
    }
    let mut tau_asymmetry: f64 = 0.0;
    for i in 1..=4 {
        for j in 1..=4 {
            tau_asymmetry = tau_asymmetry.max((model.tau(i, j) - model.tau(j, i)).abs());
        }
    }
    let mut notes = Vec::new();
    let unitary = unitarity_defect < UNITARITY_TOLERANCE;
    if !unitary {
        notes.push(format!(
            "input-to-output block is not unitary (defect {unitarity_defect:e})"
        ));
    }
    let symmetric = tau_asymmetry == 0.0;
    if !symmetric {
        notes.push(format!(
            "delay matrix is not symmetric (max skew {tau_asymmetry:e} s)"
        ));
    }
    notes.push(
        "limit power assumes a matched J1 (Z1 = Z0) and a matched amplifier input (z2 = Z0)"
            .to_string(),
    );
    ValidationReport {
        unitarity_defect,
        tau_asymmetry,
        passed: unitary && symmetric,
        notes,
    }
}

/// A terminated cable on J3 or J4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pub length: f64,
    pub termination: Termination,
}

/// Which of the two input ports an operation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArmPort {
    J3,
    J4,
}

impl ArmPort {
    pub fn from_number(port: u8) -> Result<Self> {
        match port {
            3 => Ok(ArmPort::J3),
            4 => Ok(ArmPort::J4),
            p => Err(Error::Validation(format!("arm must be 3 or 4, got {p}"))),
        }
    }

    fn index(self) -> usize {
        match self {
            ArmPort::J3 => 3,
            ArmPort::J4 => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitterSetup {
    pub splitter: SplitterModel,
    pub arm3: Arm,
    pub arm4: Arm,
    /// Cable from J2 to the amplifier, metres.
    pub amp_cable_length: f64,
    pub j1_termination: Termination,
    pub j1_cable_length: f64,
    /// Amplifier input impedance.
    pub source_impedance: Termination,
    pub temperature: f64,
    pub z0: f64,
    pub n: f64,
}

impl SplitterSetup {
    /// H2979 delays, matched J1 and amplifier, room temperature, 50 ohm
    /// cable of index 1.60.
    pub fn new(arm3: Arm, arm4: Arm, amp_cable_length: f64) -> Self {
        SplitterSetup {
            splitter: SplitterModel::h2979_fit(),
            arm3,
            arm4,
            amp_cable_length,
            j1_termination: Termination::Matched,
            j1_cable_length: 0.0,
            source_impedance: Termination::Matched,
            temperature: DEFAULT_TEMPERATURE,
            z0: DEFAULT_Z0,
            n: DEFAULT_INDEX,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, len) in [
            ("arm3.length_m", self.arm3.length),
            ("arm4.length_m", self.arm4.length),
            ("amp_cable_m", self.amp_cable_length),
            ("j1_cable_m", self.j1_cable_length),
        ] {
            if !(len.is_finite() && len >= 0.0) {
                return Err(Error::Validation(format!(
                    "{name} = {len} violates length >= 0"
                )));
            }
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
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(Error::Validation(format!(
                "temperature {} violates T >= 0",
                self.temperature
            )));
        }
        self.arm3.termination.validate()?;
        self.arm4.termination.validate()?;
        self.j1_termination.validate()?;
        self.source_impedance.validate()?;
        Ok(())
    }

    pub fn arm(&self, port: ArmPort) -> &Arm {
        match port {
            ArmPort::J3 => &self.arm3,
            ArmPort::J4 => &self.arm4,
        }
    }

    pub fn arm_mut(&mut self, port: ArmPort) -> &mut Arm {
        match port {
            ArmPort::J3 => &mut self.arm3,
            ArmPort::J4 => &mut self.arm4,
        }
    }

    /// Same setup with both arms matched; its power is frequency-flat.
    pub fn matched_reference(&self) -> Self {
        let mut r = *self;
        r.arm3.termination = Termination::Matched;
        r.arm4.termination = Termination::Matched;
        r
    }

    fn gamma(&self, port: ArmPort) -> Complex64 {
        reflection_coefficient(self.arm(port).termination, self.z0)
    }

    fn k(&self, f: f64) -> f64 {
        wavenumber(f, self.n)
    }
}

/// Short/open state of the two arms: 0 for a short, 1 for an open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LimitIndex {
    pub m3: u8,
    pub m4: u8,
}

impl LimitIndex {
    pub const ALL: [LimitIndex; 4] = [
        LimitIndex { m3: 0, m4: 0 },
        LimitIndex { m3: 0, m4: 1 },
        LimitIndex { m3: 1, m4: 0 },
        LimitIndex { m3: 1, m4: 1 },
    ];

    pub fn new(m3: u8, m4: u8) -> Result<Self> {
        if m3 > 1 || m4 > 1 {
            return Err(Error::Validation(format!(
                "limit indices must be 0 or 1, got ({m3}, {m4})"
            )));
        }
        Ok(LimitIndex { m3, m4 })
    }

    /// `None` unless both arms are short or open.
    pub fn from_setup(setup: &SplitterSetup) -> Option<Self> {
        let m = |t: Termination| match t.canonical(setup.z0) {
            Termination::Short => Some(0),
            Termination::Open => Some(1),
            _ => None,
        };
        Some(LimitIndex {
            m3: m(setup.arm3.termination)?,
            m4: m(setup.arm4.termination)?,
        })
    }

    pub fn terminations(self) -> (Termination, Termination) {
        let t = |m| {
            if m == 0 {
                Termination::Short
            } else {
                Termination::Open
            }
        };
        (t(self.m3), t(self.m4))
    }

    fn sign3(self) -> f64 {
        if self.m3 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    fn sign4(self) -> f64 {
        if self.m4 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

fn phasor(angle: f64) -> Complex64 {
    let (s, c) = angle.sin_cos();
    Complex64::new(c, s)
}

/// `v_2a / v_20`: the amplifier's own wave plus its round trips through J3
/// and J4 (J1 absorbs everything sent its way).
pub fn reflected_wave_response(setup: &SplitterSetup, f: f64) -> Result<Complex64> {
    if !setup.j1_termination.is_matched(setup.z0) {
        return Err(Error::UnmatchedJ1);
    }
    let omega = 2.0 * PI * f;
    let amp = propagation_phase(f, setup.n, setup.amp_cable_length);
    let sp = &setup.splitter;
    let round_trip = |port: ArmPort| {
        let j = port.index();
        amp * phasor(omega * sp.tau(j, 2))
            * sp.s(j, 2)
            * setup.gamma(port)
            * propagation_phase(f, setup.n, 2.0 * setup.arm(port).length)
            * phasor(omega * sp.tau(2, j))
            * sp.s(2, j)
            * amp
    };
    Ok(1.0 + round_trip(ArmPort::J3) + round_trip(ArmPort::J4))
}

/// Thermal voltage `Z0/(Z+Z0) sqrt(4 kB T Z)` launched into a line by a
/// resistive termination.
fn launched_source(termination: Termination, setup: &SplitterSetup) -> Result<f64> {
    match termination.canonical(setup.z0) {
        Termination::Short => Err(Error::DegenerateSource("short".into())),
        Termination::Open => Err(Error::DegenerateSource("open".into())),
        Termination::Matched => Ok(0.5 * thermal_source_power(setup.temperature, setup.z0).sqrt()),
        Termination::Finite(z) if z.im != 0.0 => Err(Error::Validation(format!(
            "thermal source needs a resistive termination, got {z}"
        ))),
        Termination::Finite(z) => {
            let z = z.re;
            Ok(setup.z0 / (z + setup.z0) * thermal_source_power(setup.temperature, z).sqrt())
        }
    }
}

/// Noise from the J3 or J4 termination arriving at the amplifier:
/// `v_j0 exp(-ikL_j + i w tau_2j) s_2j exp(-ikL_A)`.
pub fn arm_noise_contribution(setup: &SplitterSetup, f: f64, port: ArmPort) -> Result<Complex64> {
    let arm = setup.arm(port);
    let v = launched_source(arm.termination, setup)?;
    let j = port.index();
    let omega = 2.0 * PI * f;
    Ok(v * propagation_phase(f, setup.n, arm.length)
        * phasor(omega * setup.splitter.tau(2, j))
        * setup.splitter.s(2, j)
        * propagation_phase(f, setup.n, setup.amp_cable_length))
}

/// Noise from the J1 termination that scatters into J3/J4, reflects, and
/// reaches the amplifier through J2.
///
/// Each path carries the round trip `exp(-2ikL_j)` along its arm cable.
pub fn j1_noise_contribution(setup: &SplitterSetup, f: f64) -> Result<Complex64> {
    let v10 = launched_source(setup.j1_termination, setup)?;
    let omega = 2.0 * PI * f;
    let sp = &setup.splitter;
    let amp = propagation_phase(f, setup.n, setup.amp_cable_length);
    let path = |port: ArmPort| {
        let j = port.index();
        phasor(omega * sp.tau(j, 1))
            * sp.s(j, 1)
            * setup.gamma(port)
            * propagation_phase(f, setup.n, 2.0 * setup.arm(port).length)
            * sp.s(2, j)
            * amp
            * phasor(omega * sp.tau(2, j))
    };
    Ok(v10
        * propagation_phase(f, setup.n, setup.j1_cable_length)
        * (path(ArmPort::J3) + path(ArmPort::J4)))
}

/// Arm weights `Z0^(2-b) Z^b / (Z0 + Z)^2` for `b = 0, 1, 2`.
fn arm_weights(t: Termination, z0: f64) -> Result<[f64; 3]> {
    let (w, u) = t.divider_weights(z0)?;
    Ok([w * w, w * u, u * u])
}

// Coefficients of Z0^(4-b-c) Z3^b Z4^c in the two constant brackets.
const CONST_J_SOURCES: [[f64; 3]; 3] = [[1.0, 4.0, 1.0], [4.0, 12.0, 4.0], [1.0, 4.0, 1.0]];
const CONST_AMP_SOURCE: [[f64; 3]; 3] = [[3.0, 4.0, 3.0], [4.0, 4.0, 4.0], [3.0, 4.0, 3.0]];

fn bilinear(c: &[[f64; 3]; 3], p: &[f64; 3], q: &[f64; 3]) -> f64 {
    let mut acc = 0.0;
    for b in 0..3 {
        for cc in 0..3 {
            acc += c[b][cc] * p[b] * q[cc];
        }
    }
    acc
}

/// Cosine arguments shared by the full and limiting power expressions.
struct Phases {
    /// `2kL3 - 2kL4 - w tau13 + w tau14 - w tau23 + w tau24`
    j1_cross: f64,
    /// `2(-kL3 + kL4 + w tau23 - w tau24)`
    amp_cross: f64,
    /// `2(kL_A + kL3 - w tau23)`
    arm3: f64,
    /// `2(kL_A + kL4 - w tau24)`
    arm4: f64,
}

impl Phases {
    fn new(setup: &SplitterSetup, f: f64) -> Self {
        let k = setup.k(f);
        let w = 2.0 * PI * f;
        let (kl3, kl4, kla) = (
            k * setup.arm3.length,
            k * setup.arm4.length,
            k * setup.amp_cable_length,
        );
        let sp = &setup.splitter;
        let (t13, t14, t23, t24) = (sp.tau(1, 3), sp.tau(1, 4), sp.tau(2, 3), sp.tau(2, 4));
        Phases {
            j1_cross: 2.0 * kl3 - 2.0 * kl4 - w * t13 + w * t14 - w * t23 + w * t24,
            amp_cross: 2.0 * (-kl3 + kl4 + w * t23 - w * t24),
            arm3: 2.0 * (kla + kl3 - w * t23),
            arm4: 2.0 * (kla + kl4 - w * t24),
        }
    }
}

/// Mean-square voltage at the amplifier from all independent thermal
/// sources, V^2/Hz.
///
/// Every rational coefficient is written in the divider weights
/// `Z0/(Z0+Z)` and `Z/(Z0+Z)`, which are exact for open and short arms, so
/// no large impedance is ever substituted.
pub fn total_noise_power(setup: &SplitterSetup, f: f64) -> Result<f64> {
    let z0 = setup.z0;
    let p3 = arm_weights(setup.arm3.termination, z0)?;
    let p4 = arm_weights(setup.arm4.termination, z0)?;
    let (w2, u2) = setup.source_impedance.divider_weights(z0)?;
    let ph = Phases::new(setup, f);

    // (Z0^2 - Z^2) / (Z0 + Z)^2
    let r3 = p3[0] - p3[2];
    let r4 = p4[0] - p4[2];

    let j_sources = bilinear(&CONST_J_SOURCES, &p3, &p4) - r3 * r4 * ph.j1_cross.cos();
    let amp_source =
        bilinear(&CONST_AMP_SOURCE, &p3, &p4) - 2.0 * r3 * ph.arm3.cos() - 2.0 * r4 * ph.arm4.cos()
            + (p3[0] * p4[0] - p3[2] * p4[0] - p3[0] * p4[2] + p3[2] * p4[2]) * ph.amp_cross.cos();

    let prefactor = 4.0 * BOLTZMANN * setup.temperature * z0 / 8.0;
    Ok(prefactor * (j_sources + 4.0 * w2 * u2 * amp_source))
}

/// Short/open limit of [`total_noise_power`] for a matched amplifier:
///
/// ```text
/// (4 kB T Z0 / 8) { 4 - 2(-1)^m3 cos(2(kL_A + kL3 - w tau23))
///                     - 2(-1)^m4 cos(2(kL_A + kL4 - w tau24))
///                     - (-1)^(m3+m4) cos(2kL3 - 2kL4 - w tau13 + w tau14 - w tau23 + w tau24)
///                     + (-1)^(m3+m4) cos(2(kL3 - kL4 - w tau23 + w tau24)) }
/// ```
///
/// The arm terminations in `setup` are ignored; `limits` selects them.
pub fn limit_noise_power(setup: &SplitterSetup, f: f64, limits: LimitIndex) -> f64 {
    let k = setup.k(f);
    let w = 2.0 * PI * f;
    let (kl3, kl4, kla) = (
        k * setup.arm3.length,
        k * setup.arm4.length,
        k * setup.amp_cable_length,
    );
    let sp = &setup.splitter;
    let (t13, t14, t23, t24) = (sp.tau(1, 3), sp.tau(1, 4), sp.tau(2, 3), sp.tau(2, 4));
    let s3 = limits.sign3();
    let s4 = limits.sign4();
    let bracket = 4.0
        - 2.0 * s3 * (2.0 * (kla + kl3 - w * t23)).cos()
        - 2.0 * s4 * (2.0 * (kla + kl4 - w * t24)).cos()
        - s3 * s4 * (2.0 * kl3 - 2.0 * kl4 - w * t13 + w * t14 - w * t23 + w * t24).cos()
        + s3 * s4 * (2.0 * (kl3 - kl4 - w * t23 + w * t24)).cos();
    4.0 * BOLTZMANN * setup.temperature * setup.z0 / 8.0 * bracket
}

/// Full-expression spectrum, V^2/Hz.
pub fn splitter_noise_spectrum(setup: &SplitterSetup, grid: &FrequencyGrid) -> PowerSpectrum {
    PowerSpectrum::evaluate(grid, |f| total_noise_power(setup, f))
}

/// Limiting-form spectrum, V^2/Hz.
pub fn limit_noise_spectrum(
    setup: &SplitterSetup,
    grid: &FrequencyGrid,
    limits: LimitIndex,
) -> PowerSpectrum {
    PowerSpectrum::evaluate(grid, |f| Ok(limit_noise_power(setup, f, limits)))
}

/// Which power expression a sweep evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepModel {
    Full,
    Limit(LimitIndex),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRecord {
    pub length: f64,
    pub frequency: f64,
    /// Power in V^2/Hz, `NaN` where the model could not be evaluated.
    pub power: f64,
}

/// Power over (arm length x frequency), row-major by length.
pub fn sweep_arm_length(
    setup: &SplitterSetup,
    grid: &FrequencyGrid,
    port: ArmPort,
    lengths: &[f64],
    model: SweepModel,
) -> Result<Vec<SweepRecord>> {
    if lengths.is_empty() {
        return Err(Error::Validation("sweep needs at least one length".into()));
    }
    if let Some(bad) = lengths.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        return Err(Error::Validation(format!(
            "sweep length {bad} violates length >= 0"
        )));
    }
    let mut out = Vec::with_capacity(lengths.len() * grid.len());
    for &length in lengths {
        let mut s = *setup;
        s.arm_mut(port).length = length;
        for f in grid.iter() {
            let power = match model {
                SweepModel::Full => total_noise_power(&s, f).unwrap_or(f64::NAN),
                SweepModel::Limit(m) => limit_noise_power(&s, f, m),
            };
            out.push(SweepRecord {
                length,
                frequency: f,
                power,
            });
        }
    }
    Ok(out)
}
