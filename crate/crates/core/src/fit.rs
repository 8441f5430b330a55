//! Spectrum fitting by bounded Nelder-Mead on display-level residuals.

use serde::Serialize;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::measurement::{ModelParameters, NetworkModel, NoiseSpectrum};

/// A model quantity that can be fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Parameter {
    /// Single cable length, or the amplifier cable for a splitter.
    LineLength,
    ArmLength3,
    ArmLength4,
    Index,
    Offset,
    NoiseFloor,
    Tau23,
    Tau24,
    Tau13,
    Tau14,
}

impl Parameter {
    pub const ALL: [Parameter; 10] = [
        Parameter::LineLength,
        Parameter::ArmLength3,
        Parameter::ArmLength4,
        Parameter::Index,
        Parameter::Offset,
        Parameter::NoiseFloor,
        Parameter::Tau23,
        Parameter::Tau24,
        Parameter::Tau13,
        Parameter::Tau14,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Parameter::LineLength => "L_A",
            Parameter::ArmLength3 => "L_3",
            Parameter::ArmLength4 => "L_4",
            Parameter::Index => "n",
            Parameter::Offset => "a",
            Parameter::NoiseFloor => "sn",
            Parameter::Tau23 => "tau_23",
            Parameter::Tau24 => "tau_24",
            Parameter::Tau13 => "tau_13",
            Parameter::Tau14 => "tau_14",
        }
    }

    /// Parameters that shape the spectrum, as opposed to display offsets.
    pub fn is_shape(self) -> bool {
        !matches!(self, Parameter::Offset | Parameter::NoiseFloor)
    }

    fn is_length(self) -> bool {
        matches!(
            self,
            Parameter::LineLength | Parameter::ArmLength3 | Parameter::ArmLength4
        )
    }

    fn tau_ports(self) -> Option<(usize, usize)> {
        match self {
            Parameter::Tau23 => Some((2, 3)),
            Parameter::Tau24 => Some((2, 4)),
            Parameter::Tau13 => Some((1, 3)),
            Parameter::Tau14 => Some((1, 4)),
            _ => None,
        }
    }

    pub fn get(self, params: &ModelParameters) -> Result<f64> {
        let na = || Error::UnknownParameter(format!("{} (not in this model)", self.name()));
        Ok(match (self, &params.network) {
            (Parameter::Offset, _) => params.display.a,
            (Parameter::NoiseFloor, _) => params.display.sn,
            (Parameter::LineLength, NetworkModel::SingleCable(s)) => s.cable.length,
            (Parameter::Index, NetworkModel::SingleCable(s)) => s.cable.n,
            (_, NetworkModel::SingleCable(_)) => return Err(na()),
            (p, NetworkModel::SplitterLimit(s, _) | NetworkModel::SplitterFull(s)) => match p {
                Parameter::LineLength => s.amp_cable_length,
                Parameter::ArmLength3 => s.arm3.length,
                Parameter::ArmLength4 => s.arm4.length,
                Parameter::Index => s.n,
                _ => {
                    let (i, j) = p.tau_ports().ok_or_else(na)?;
                    s.splitter.tau(i, j)
                }
            },
        })
    }

    pub fn set(self, params: &mut ModelParameters, value: f64) -> Result<()> {
        let na = Error::UnknownParameter(format!("{} (not in this model)", self.name()));
        match (self, &mut params.network) {
            (Parameter::Offset, _) => params.display.a = value,
            (Parameter::NoiseFloor, _) => params.display.sn = value,
            (Parameter::LineLength, NetworkModel::SingleCable(s)) => s.cable.length = value,
            (Parameter::Index, NetworkModel::SingleCable(s)) => s.cable.n = value,
            (_, NetworkModel::SingleCable(_)) => return Err(na),
            (p, NetworkModel::SplitterLimit(s, _) | NetworkModel::SplitterFull(s)) => match p {
                Parameter::LineLength => s.amp_cable_length = value,
                Parameter::ArmLength3 => s.arm3.length = value,
                Parameter::ArmLength4 => s.arm4.length = value,
                Parameter::Index => s.n = value,
                _ => {
                    let (i, j) = p.tau_ports().ok_or(na)?;
                    s.splitter.set_tau_pair(i, j, value);
                }
            },
        }
        Ok(())
    }
}

impl FromStr for Parameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s
            .trim()
            .replace('τ', "tau")
            .replace("tau", "tau_")
            .replace("__", "_");
        Ok(match key.as_str() {
            "L" | "L_A" | "LA" => Parameter::LineLength,
            "L_3" | "L3" => Parameter::ArmLength3,
            "L_4" | "L4" => Parameter::ArmLength4,
            "n" => Parameter::Index,
            "a" => Parameter::Offset,
            "sn" | "s_n" => Parameter::NoiseFloor,
            "tau_23" | "tau_32" => Parameter::Tau23,
            "tau_24" | "tau_42" => Parameter::Tau24,
            "tau_13" | "tau_31" => Parameter::Tau13,
            "tau_14" | "tau_41" => Parameter::Tau14,
            _ => return Err(Error::UnknownParameter(s.to_string())),
        })
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses a comma-separated list such as `L,a,sn`.
pub fn parse_parameter_list(list: &str) -> Result<Vec<Parameter>> {
    let mut out: Vec<Parameter> = Vec::new();
    for item in list.split(',').filter(|s| !s.trim().is_empty()) {
        let p: Parameter = item.parse()?;
        if out.contains(&p) {
            return Err(Error::Validation(format!("parameter {p} listed twice")));
        }
        out.push(p);
    }
    if out.is_empty() {
        return Err(Error::Validation("no free parameters given".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FreeParameter {
    pub parameter: Parameter,
    pub lower: f64,
    pub upper: f64,
    pub initial: f64,
}

impl FreeParameter {
    pub fn new(parameter: Parameter, lower: f64, upper: f64, initial: f64) -> Self {
        FreeParameter {
            parameter,
            lower,
            upper,
            initial,
        }
    }

    /// Bounds of +/-20% around lengths, index and delays, +/-2 around the
    /// offset `a`, and `[0, 3 sn + 1]` for the noise floor.
    pub fn with_default_bounds(parameter: Parameter, initial: f64) -> Self {
        let (lower, upper) = match parameter {
            Parameter::Offset => (initial - 2.0, initial + 2.0),
            Parameter::NoiseFloor => (0.0, 3.0 * initial.max(0.0) + 1.0),
            Parameter::Index => ((0.8 * initial).max(1.0), (1.2 * initial).max(1.2)),
            p if p.is_length() => {
                if initial > 0.0 {
                    (0.8 * initial, 1.2 * initial)
                } else {
                    (0.0, 1.0)
                }
            }
            _ => {
                if initial > 0.0 {
                    (0.8 * initial, 1.2 * initial)
                } else {
                    (0.0, 20e-9)
                }
            }
        };
        FreeParameter::new(parameter, lower, upper, initial)
    }

    fn validate(&self) -> Result<()> {
        let name = self.parameter.name();
        if !(self.lower.is_finite() && self.upper.is_finite() && self.lower < self.upper) {
            return Err(Error::Validation(format!(
                "{name}: bounds [{}, {}] must be finite with lower < upper",
                self.lower, self.upper
            )));
        }
        if !(self.lower <= self.initial && self.initial <= self.upper) {
            return Err(Error::Validation(format!(
                "{name}: initial guess {} outside [{}, {}]",
                self.initial, self.lower, self.upper
            )));
        }
        let floor = match self.parameter {
            Parameter::NoiseFloor => Some(0.0),
            Parameter::Index => Some(1.0),
            p if p.is_length() => Some(0.0),
            _ => None,
        };
        if let Some(floor) = floor {
            if self.lower < floor {
                return Err(Error::Validation(format!(
                    "{name}: lower bound {} below {floor}",
                    self.lower
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitProblem {
    pub observed: NoiseSpectrum,
    /// Model with every fixed parameter at its final value; free parameters
    /// are overwritten by candidates.
    pub template: ModelParameters,
    pub free: Vec<FreeParameter>,
}

impl FitProblem {
    /// Frees `parameters` with default bounds around their template values.
    pub fn new(
        observed: NoiseSpectrum,
        template: ModelParameters,
        parameters: &[Parameter],
    ) -> Result<Self> {
        let free = parameters
            .iter()
            .map(|p| Ok(FreeParameter::with_default_bounds(*p, p.get(&template)?)))
            .collect::<Result<Vec<_>>>()?;
        let problem = FitProblem {
            observed,
            template,
            free,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<()> {
        if self.free.is_empty() {
            return Err(Error::Validation("no free parameters".into()));
        }
        for (i, fp) in self.free.iter().enumerate() {
            fp.validate()?;
            fp.parameter.get(&self.template)?;
            if self.free[..i].iter().any(|o| o.parameter == fp.parameter) {
                return Err(Error::Validation(format!("{} is free twice", fp.parameter)));
            }
        }
        let n = self.observed.len();
        if self.observed.display_level.len() != n || self.observed.excluded.len() != n {
            return Err(Error::Validation(
                "observed spectrum arrays differ in length".into(),
            ));
        }
        self.template.network.validate()?;
        Ok(())
    }

    pub fn initial_guess(&self) -> Vec<f64> {
        self.free.iter().map(|f| f.initial).collect()
    }

    /// Template with `candidate` substituted for the free parameters.
    pub fn model_at(&self, candidate: &[f64]) -> Result<ModelParameters> {
        if candidate.len() != self.free.len() {
            return Err(Error::Validation(format!(
                "candidate has {} values for {} free parameters",
                candidate.len(),
                self.free.len()
            )));
        }
        let mut m = self.template;
        for (fp, v) in self.free.iter().zip(candidate) {
            fp.parameter.set(&mut m, *v)?;
        }
        Ok(m)
    }

    /// True when a length and the index are both free: the single-cable
    /// spectrum depends on their product only.
    pub fn has_index_length_degeneracy(&self) -> bool {
        let has = |p| self.free.iter().any(|f| f.parameter == p);
        matches!(self.template.network, NetworkModel::SingleCable(_))
            && has(Parameter::Index)
            && has(Parameter::LineLength)
    }
}

/// Residual vector over included points.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    /// `observed - model` at every point both included and evaluable.
    pub values: Vec<f64>,
    /// Points the model could not evaluate (poles, non-positive log argument).
    pub excluded: usize,
}

impl Residuals {
    pub fn rss(&self) -> f64 {
        self.values.iter().map(|r| r * r).sum()
    }
}

pub fn residuals(problem: &FitProblem, candidate: &[f64]) -> Result<Residuals> {
    let model = problem.model_at(candidate)?;
    let obs = &problem.observed;
    let mut values = Vec::with_capacity(obs.len());
    let mut excluded = 0;
    for i in 0..obs.len() {
        if obs.excluded[i] {
            continue;
        }
        let level = model
            .network
            .relative_power(obs.frequencies[i])
            .and_then(|p| model.display.level(p));
        match level {
            Ok(l) => values.push(obs.display_level[i] - l),
            Err(_) => excluded += 1,
        }
    }
    Ok(Residuals { values, excluded })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Simplex extent per parameter, relative to the parameter value.
    pub x_tolerance: f64,
    /// Spread of rss across the simplex.
    pub f_tolerance: f64,
    /// Number of lattice starts; 1 uses the initial guess alone.
    pub starts: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iterations: 5000,
            x_tolerance: 1e-6,
            f_tolerance: 1e-12,
            starts: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub parameters: Vec<Parameter>,
    pub values: Vec<f64>,
    pub rss: f64,
    pub initial_rss: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub excluded_points: usize,
    pub included_points: usize,
}

impl FitResult {
    pub fn value(&self, p: Parameter) -> Option<f64> {
        self.parameters
            .iter()
            .position(|q| *q == p)
            .map(|i| self.values[i])
    }
}

struct Objective<'a> {
    problem: &'a FitProblem,
    evaluations: usize,
}

impl Objective<'_> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evaluations += 1;
        match residuals(self.problem, x) {
            Ok(r) if !r.values.is_empty() => r.rss(),
            _ => f64::INFINITY,
        }
    }
}

/// Mirrors `x` back into `[lo, hi]`.
fn reflect_into(x: f64, lo: f64, hi: f64) -> f64 {
    let w = hi - lo;
    if !x.is_finite() {
        return lo + 0.5 * w;
    }
    let mut t = (x - lo).rem_euclid(2.0 * w);
    if t > w {
        t = 2.0 * w - t;
    }
    (lo + t).clamp(lo, hi)
}

struct SimplexOutcome {
    best: Vec<f64>,
    best_f: f64,
    iterations: usize,
    converged: bool,
}

fn nelder_mead(
    obj: &mut Objective<'_>,
    bounds: &[(f64, f64)],
    start: &[f64],
    config: &FitConfig,
    budget: usize,
) -> SimplexOutcome {
    let dim = start.len();
    let project = |x: &mut Vec<f64>| {
        for (v, (lo, hi)) in x.iter_mut().zip(bounds) {
            *v = reflect_into(*v, *lo, *hi);
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(start.to_vec());
    for i in 0..dim {
        let (lo, hi) = bounds[i];
        let step = 0.1 * (hi - lo);
        let mut v = start.to_vec();
        v[i] = if v[i] + step <= hi {
            v[i] + step
        } else {
            v[i] - step
        };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| obj.eval(v)).collect();

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut iterations = 0;
    let mut converged = false;
    loop {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
        simplex = order.iter().map(|i| simplex[*i].clone()).collect();
        values = order.iter().map(|i| values[*i]).collect();

        let f_spread = values[dim] - values[0];
        let x_small = (0..dim).all(|j| {
            let (lo, hi) = bounds[j];
            let scale = simplex[0][j].abs().max(1e-3 * (hi - lo));
            simplex[1..]
                .iter()
                .all(|v| (v[j] - simplex[0][j]).abs() <= config.x_tolerance * scale)
        });
        if x_small || (f_spread.is_finite() && f_spread <= config.f_tolerance) {
            converged = true;
            break;
        }
        if iterations >= budget {
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|v| v[j]).sum::<f64>() / dim as f64)
            .collect();
        let along = |coef: f64| -> Vec<f64> {
            let mut x: Vec<f64> = (0..dim)
                .map(|j| centroid[j] + coef * (simplex[dim][j] - centroid[j]))
                .collect();
            project(&mut x);
            x
        };

        let xr = along(-alpha);
        let fr = obj.eval(&xr);
        if fr < values[0] {
            let xe = along(-gamma);
            let fe = obj.eval(&xe);
            if fe < fr {
                simplex[dim] = xe;
                values[dim] = fe;
            } else {
                simplex[dim] = xr;
                values[dim] = fr;
            }
            continue;
        }
        if fr < values[dim - 1] {
            simplex[dim] = xr;
            values[dim] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[dim] {
            let xc = along(-rho);
            let fc = obj.eval(&xc);
            (xc, fc)
        } else {
            let xc = along(rho);
            let fc = obj.eval(&xc);
            (xc, fc)
        };
        if fc < values[dim].min(fr) {
            simplex[dim] = xc;
            values[dim] = fc;
            continue;
        }
        for i in 1..=dim {
            let mut x: Vec<f64> = (0..dim)
                .map(|j| simplex[0][j] + sigma * (simplex[i][j] - simplex[0][j]))
                .collect();
            project(&mut x);
            values[i] = obj.eval(&x);
            simplex[i] = x;
        }
    }
    SimplexOutcome {
        best: simplex[0].clone(),
        best_f: values[0],
        iterations,
        converged,
    }
}

/// Starting points: the initial guess, then a lattice across the bounds of
/// the shape parameters with display offsets held at their guesses.
fn lattice_starts(problem: &FitProblem, count: usize) -> Vec<Vec<f64>> {
    let initial = problem.initial_guess();
    let mut starts = vec![initial.clone()];
    for s in 1..count {
        let frac = (s as f64 - 0.5) / (count - 1) as f64;
        let x = problem
            .free
            .iter()
            .zip(&initial)
            .map(|(fp, x0)| {
                if fp.parameter.is_shape() {
                    fp.lower + frac * (fp.upper - fp.lower)
                } else {
                    *x0
                }
            })
            .collect();
        starts.push(x);
    }
    starts
}

/// Minimises the residual sum of squares over the free parameters.
///
/// Running out of iterations is not an error: the best point found is
/// returned with `converged = false`.
pub fn fit(problem: &FitProblem, config: &FitConfig) -> Result<FitResult> {
    problem.validate()?;
    let dim = problem.free.len();
    let included = problem.observed.included_count();
    if included < 2 * dim {
        return Err(Error::InsufficientData(format!(
            "{included} included points for {dim} free parameters (need at least {})",
            2 * dim
        )));
    }
    let shape_free = problem.free.iter().any(|f| f.parameter.is_shape());
    if shape_free && is_flat(&problem.observed) {
        return Err(Error::InsufficientData(
            "observed spectrum is flat; it carries no length, index or delay information".into(),
        ));
    }

    let bounds: Vec<(f64, f64)> = problem.free.iter().map(|f| (f.lower, f.upper)).collect();
    let mut obj = Objective {
        problem,
        evaluations: 0,
    };
    let initial = problem.initial_guess();
    let initial_rss = obj.eval(&initial);

    let mut best = initial.clone();
    let mut best_f = initial_rss;
    let mut iterations = 0;
    let mut converged = false;
    for start in lattice_starts(problem, config.starts.max(1)) {
        let mut x = start;
        // restart from the best vertex until the simplex stops improving
        loop {
            let budget = config.max_iterations.saturating_sub(iterations);
            let out = nelder_mead(&mut obj, &bounds, &x, config, budget);
            iterations += out.iterations;
            let improved = out.best_f < best_f;
            if out.best_f <= best_f {
                best = out.best.clone();
                best_f = out.best_f;
                converged = out.converged;
            }
            if !out.converged || out.iterations == 0 || !improved {
                break;
            }
            x = out.best;
        }
        if iterations >= config.max_iterations {
            converged = false;
            break;
        }
    }

    let res = residuals(problem, &best)?;
    Ok(FitResult {
        parameters: problem.free.iter().map(|f| f.parameter).collect(),
        values: best,
        rss: if res.values.is_empty() {
            f64::INFINITY
        } else {
            res.rss()
        },
        initial_rss,
        iterations,
        evaluations: obj.evaluations,
        converged,
        excluded_points: res.excluded,
        included_points: res.values.len(),
    })
}

fn is_flat(spec: &NoiseSpectrum) -> bool {
    let levels: Vec<f64> = spec
        .display_level
        .iter()
        .zip(&spec.excluded)
        .filter(|(_, e)| !**e)
        .map(|(l, _)| *l)
        .collect();
    let (lo, hi) = levels
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), l| {
            (a.min(*l), b.max(*l))
        });
    let scale = lo.abs().max(hi.abs()).max(1.0);
    hi - lo <= 1e-12 * scale
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterEstimate {
    pub name: String,
    pub estimate: f64,
    pub initial: f64,
    pub lower: f64,
    pub upper: f64,
    pub bound_active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub parameters: Vec<ParameterEstimate>,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub rss: f64,
    pub initial_rss: f64,
    pub included_points: usize,
    pub excluded_points: usize,
    pub residual_mean: f64,
    pub residual_rms: f64,
    pub residual_max_abs: f64,
    pub log_base: f64,
    pub warnings: Vec<String>,
}

pub fn fit_report(result: &FitResult, problem: &FitProblem) -> FitReport {
    let parameters = problem
        .free
        .iter()
        .zip(&result.values)
        .map(|(fp, v)| {
            let edge = 1e-9 * (fp.upper - fp.lower);
            ParameterEstimate {
                name: fp.parameter.name().to_string(),
                estimate: *v,
                initial: fp.initial,
                lower: fp.lower,
                upper: fp.upper,
                bound_active: (*v - fp.lower).abs() <= edge || (fp.upper - *v).abs() <= edge,
            }
        })
        .collect();
    let res = residuals(problem, &result.values)
        .map(|r| r.values)
        .unwrap_or_default();
    let n = res.len().max(1) as f64;
    let residual_mean = res.iter().sum::<f64>() / n;
    let residual_rms = (res.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
    let residual_max_abs = res.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let mut warnings = Vec::new();
    if problem.has_index_length_degeneracy() {
        warnings.push("n and L_A are both free; the spectrum constrains only their product".into());
    }
    if !result.converged {
        warnings.push("iteration cap reached before convergence; values are best-so-far".into());
    }
    if result.excluded_points > 0 {
        warnings.push(format!(
            "{} points excluded from the residual",
            result.excluded_points
        ));
    }
    FitReport {
        parameters,
        converged: result.converged,
        iterations: result.iterations,
        evaluations: result.evaluations,
        rss: result.rss,
        initial_rss: result.initial_rss,
        included_points: result.included_points,
        excluded_points: result.excluded_points,
        residual_mean,
        residual_rms,
        residual_max_abs,
        log_base: crate::measurement::LOG_BASE,
        warnings,
    }
}

impl fmt::Display for FitReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "fit {} after {} iterations ({} evaluations)",
            if self.converged {
                "converged"
            } else {
                "did NOT converge"
            },
            self.iterations,
            self.evaluations
        )?;
        for p in &self.parameters {
            writeln!(
                f,
                "  {:<7} = {:<14.8e} [{:.6e}, {:.6e}]{}",
                p.name,
                p.estimate,
                p.lower,
                p.upper,
                if p.bound_active { "  bound-active" } else { "" }
            )?;
        }
        writeln!(
            f,
            "  rss {:.6e} (initial {:.6e}), rms residual {:.4e}, max |residual| {:.4e}",
            self.rss, self.initial_rss, self.residual_rms, self.residual_max_abs
        )?;
        writeln!(
            f,
            "  points: {} included, {} excluded",
            self.included_points, self.excluded_points
        )?;
        for w in &self.warnings {
            writeln!(f, "  warning: {w}")?;
        }
        Ok(())
    }
}
