//! Run configuration: a TOML document with strict keys.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use twofluid_core::closure::FluidParams;
use twofluid_core::linearlab::data::ELL;
use twofluid_core::linearlab::fit::{EXPONENT_TOLERANCE, MIN_FIT_SAMPLES};
use twofluid_core::linearlab::{Variable, DEFAULT_SAMPLES, DEFAULT_WINDOW};
use twofluid_core::solver::{DeskScale, FieldName, InitialData};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    AnalyzeModes,
    LinearDecay,
    LowerBound,
    Simulate,
    Fit,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::AnalyzeModes => "analyze-modes",
            Task::LinearDecay => "linear-decay",
            Task::LowerBound => "lower-bound",
            Task::Simulate => "simulate",
            Task::Fit => "fit",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModesConfig {
    pub xi_min: f64,
    pub xi_max: f64,
    pub count: usize,
}

impl Default for ModesConfig {
    fn default() -> Self {
        Self { xi_min: 1e-4, xi_max: 1e2, count: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayConfig {
    /// Data size `K0`.
    pub k0: f64,
    pub ks: Vec<i32>,
    pub t_min: f64,
    pub t_max: f64,
    pub samples: usize,
    pub tolerance: f64,
    /// Allowed deviation of `exponent(combo) - exponent(n+)` from `-1/2`.
    pub gap_tolerance: f64,
    /// Fit the low-frequency parts instead of the full norms.
    pub low_pass: bool,
    /// Cutoff radius; chosen from the parameters when absent.
    pub eta: Option<f64>,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self {
            k0: 0.5,
            ks: (0..=ELL).collect(),
            t_min: DEFAULT_WINDOW[0],
            t_max: DEFAULT_WINDOW[1],
            samples: DEFAULT_SAMPLES,
            tolerance: EXPONENT_TOLERANCE,
            gap_tolerance: 0.07,
            low_pass: false,
            eta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LowerBoundConfig {
    pub k0: f64,
    pub theta: f64,
    pub s: f64,
    pub max_ratio: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub samples: usize,
    pub eta: Option<f64>,
}

impl Default for LowerBoundConfig {
    fn default() -> Self {
        Self {
            k0: 0.5,
            theta: 1.0,
            s: 2.0,
            max_ratio: 3.0,
            t_min: DEFAULT_WINDOW[0],
            t_max: DEFAULT_WINDOW[1],
            samples: DEFAULT_SAMPLES,
            eta: None,
        }
    }
}

/// Initial data for `simulate`. Random data takes its seed from the top-level `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Zero {},
    SingleMode {
        field: FieldName,
        #[serde(default)]
        component: usize,
        modes: Vec<i64>,
        amplitude: f64,
    },
    GaussianBump {
        amplitude: f64,
        width: f64,
    },
    RandomBand {
        amplitude: f64,
        max_mode: u32,
    },
}

impl InitialSpec {
    pub fn amplitude(&self) -> f64 {
        match self {
            InitialSpec::Zero {} => 0.0,
            InitialSpec::SingleMode { amplitude, .. }
            | InitialSpec::GaussianBump { amplitude, .. }
            | InitialSpec::RandomBand { amplitude, .. } => *amplitude,
        }
    }

    pub fn to_initial_data(&self, seed: Option<u64>) -> Option<InitialData> {
        Some(match self.clone() {
            InitialSpec::Zero {} => InitialData::Zero,
            InitialSpec::SingleMode { field, component, modes, amplitude } => {
                InitialData::SingleMode { field, component, modes, amplitude }
            }
            InitialSpec::GaussianBump { amplitude, width } => InitialData::GaussianBump { amplitude, width },
            InitialSpec::RandomBand { amplitude, max_mode } => {
                InitialData::RandomBand { amplitude, max_mode, seed: seed? }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub dim: usize,
    /// Points per axis; desk-scale default for `dim` when absent.
    pub n: Option<usize>,
    pub length: Option<f64>,
    pub dt: f64,
    pub steps: usize,
    pub record_every: usize,
    pub cfl: f64,
    pub ks: Vec<i32>,
    pub linear_only: bool,
    /// Largest accepted mass drift.
    pub mass_tolerance: f64,
    pub initial: InitialSpec,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            n: None,
            length: None,
            dt: 0.1,
            steps: 100,
            record_every: 10,
            cfl: 0.5,
            ks: vec![0, 1],
            linear_only: false,
            mass_tolerance: 1e-8,
            initial: InitialSpec::GaussianBump { amplitude: 0.01, width: 8.0 },
        }
    }
}

impl SimulateConfig {
    pub fn points(&self) -> usize {
        self.n.unwrap_or_else(|| DeskScale::points(self.dim))
    }

    pub fn box_length(&self) -> f64 {
        self.length.unwrap_or_else(DeskScale::length)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMode {
    Rate,
    LowerBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Norm CSV to fit.
    pub input: Option<PathBuf>,
    pub mode: FitMode,
    pub t_min: f64,
    pub t_max: f64,
    pub tolerance: f64,
    pub max_ratio: f64,
    /// Variables to fit; every series with positive values when absent.
    pub variables: Option<Vec<String>>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            input: None,
            mode: FitMode::Rate,
            t_min: DEFAULT_WINDOW[0],
            t_max: DEFAULT_WINDOW[1],
            tolerance: EXPONENT_TOLERANCE,
            max_ratio: 3.0,
            variables: None,
        }
    }
}

impl FitConfig {
    pub fn parsed_variables(&self) -> Option<Result<Vec<Variable>, String>> {
        self.variables.as_ref().map(|v| v.iter().map(|s| Variable::from_str(s).map_err(|e| e.to_string())).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub task: Option<Task>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub params: FluidParams,
    pub modes: ModesConfig,
    pub decay: DecayConfig,
    pub lower_bound: LowerBoundConfig,
    pub simulate: SimulateConfig,
    pub fit: FitConfig,
}

/// Every problem found in a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub errors: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration:")?;
        for e in &self.errors {
            write!(f, "\n  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

fn window_errors(section: &str, t_min: f64, t_max: f64, samples: Option<usize>, out: &mut Vec<String>) {
    if !(t_min > 0.0 && t_max > t_min && t_max.is_finite()) {
        out.push(format!("{section}: need 0 < t_min < t_max, got [{t_min}, {t_max}]"));
    }
    if let Some(n) = samples {
        if n < MIN_FIT_SAMPLES {
            out.push(format!("{section}.samples must be >= {MIN_FIT_SAMPLES}, got {n}"));
        }
    }
}

fn ks_errors(section: &str, ks: &[i32], out: &mut Vec<String>) {
    if ks.is_empty() {
        out.push(format!("{section}.ks must not be empty"));
    }
    if let Some(k) = ks.iter().find(|k| !(0..=ELL).contains(*k)) {
        out.push(format!("{section}.ks entries must lie in 0..={ELL}, got {k}"));
    }
}

impl RunConfig {
    /// The task, `analyze-modes` when unset.
    pub fn task(&self) -> Task {
        self.task.unwrap_or(Task::AnalyzeModes)
    }

    /// All validation errors for the selected task. Sections of other tasks
    /// are checked only for well-formedness by the parser.
    pub fn validate(&self) -> Vec<String> {
        let mut e: Vec<String> = self.params.violations().into_iter().map(|v| format!("params: {v}")).collect();
        let m = &self.modes;
        if !(m.xi_min > 0.0 && m.xi_max > m.xi_min && m.xi_max.is_finite()) {
            e.push(format!("modes: need 0 < xi_min < xi_max, got [{}, {}]", m.xi_min, m.xi_max));
        }
        if m.count < 2 {
            e.push(format!("modes.count must be >= 2, got {}", m.count));
        }
        let eta_ok = |eta: Option<f64>| eta.is_none_or(|x| x > 0.0 && x.is_finite());
        match self.task() {
            Task::AnalyzeModes => {}
            Task::LinearDecay => {
                let d = &self.decay;
                if !(d.k0 > 0.0 && d.k0.is_finite()) {
                    e.push(format!("decay.k0 must be positive, got {}", d.k0));
                }
                ks_errors("decay", &d.ks, &mut e);
                window_errors("decay", d.t_min, d.t_max, Some(d.samples), &mut e);
                if !(d.tolerance > 0.0) || !(d.gap_tolerance > 0.0) {
                    e.push("decay: tolerances must be positive".into());
                }
                if !eta_ok(d.eta) {
                    e.push("decay.eta must be positive".into());
                }
            }
            Task::LowerBound => {
                let l = &self.lower_bound;
                if !(l.k0 > 0.0 && l.k0 < 1.0) {
                    e.push(format!("lower_bound.k0 must lie in (0, 1), got {}", l.k0));
                }
                if !(l.theta < 2.0) {
                    e.push(format!("lower_bound.theta < 2 violated (theta = {})", l.theta));
                }
                if !(l.s > 0.0) {
                    e.push(format!("lower_bound.s > 0 violated (s = {})", l.s));
                }
                if !(l.max_ratio >= 1.0) {
                    e.push(format!("lower_bound.max_ratio must be >= 1, got {}", l.max_ratio));
                }
                window_errors("lower_bound", l.t_min, l.t_max, Some(l.samples), &mut e);
                if !eta_ok(l.eta) {
                    e.push("lower_bound.eta must be positive".into());
                }
            }
            Task::Simulate => {
                let s = &self.simulate;
                if self.params.rbar_plus != 1.0 || self.params.rbar_minus != 1.0 {
                    e.push("simulate requires rbar_plus = rbar_minus = 1".into());
                }
                if !(1..=3).contains(&s.dim) {
                    e.push(format!("simulate.dim must be 1, 2 or 3, got {}", s.dim));
                }
                let n = s.points();
                if n < 4 || !n.is_power_of_two() {
                    e.push(format!("simulate.n must be a power of two >= 4, got {n}"));
                }
                if !(s.box_length() > 0.0 && s.box_length().is_finite()) {
                    e.push(format!("simulate.length must be positive, got {}", s.box_length()));
                }
                if !(s.dt > 0.0 && s.dt.is_finite()) {
                    e.push(format!("simulate.dt must be positive, got {}", s.dt));
                }
                if s.steps == 0 {
                    e.push("simulate.steps must be >= 1".into());
                }
                if s.record_every == 0 {
                    e.push("simulate.record_every must be >= 1".into());
                }
                if !(s.cfl > 0.0 && s.cfl <= 1.0) {
                    e.push(format!("simulate.cfl must lie in (0, 1], got {}", s.cfl));
                }
                if s.ks.iter().any(|k| !(0..=ELL).contains(k)) {
                    e.push(format!("simulate.ks entries must lie in 0..={ELL}"));
                }
                if !(s.mass_tolerance >= 0.0) {
                    e.push("simulate.mass_tolerance must be >= 0".into());
                }
                let a = s.initial.amplitude();
                if !(a.abs() < 1.0) {
                    e.push(format!("simulate.initial: |amplitude| < 1 needed for positivity, got {a}"));
                }
                match &s.initial {
                    InitialSpec::RandomBand { max_mode, .. } => {
                        if self.seed.is_none() {
                            e.push("seed is required for random_band initial data".into());
                        }
                        if 3 * *max_mode as usize >= n {
                            e.push(format!("simulate.initial.max_mode must satisfy 3 max_mode < n, got {max_mode}"));
                        }
                    }
                    InitialSpec::GaussianBump { width, .. } if !(*width > 0.0) => {
                        e.push(format!("simulate.initial.width must be positive, got {width}"));
                    }
                    _ => {}
                }
            }
            Task::Fit => {
                let f = &self.fit;
                if f.input.is_none() {
                    e.push("fit.input is required for the fit task".into());
                }
                window_errors("fit", f.t_min, f.t_max, None, &mut e);
                if !(f.tolerance > 0.0) {
                    e.push("fit.tolerance must be positive".into());
                }
                if !(f.max_ratio >= 1.0) {
                    e.push("fit.max_ratio must be >= 1".into());
                }
                if let Some(Err(msg)) = f.parsed_variables() {
                    e.push(format!("fit.variables: {msg}"));
                }
            }
        }
        e
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Short SHA-256 of the canonical form, excluding the output directory.
    pub fn hash(&self) -> String {
        let canonical = RunConfig { out: None, task: Some(self.task()), ..self.clone() };
        let digest = Sha256::digest(canonical.to_toml().as_bytes());
        hex::encode(&digest[..6])
    }
}

/// Parses and validates a configuration, collecting every error.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError { errors: vec![e.message().to_string()] })?;
    let errors = cfg.validate();
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError { errors })
    }
}
