//! TOML run configuration.
//!
//! Functions and kernels are chosen from fixed registries by name; there is
//! no expression evaluation. Dotted `key=value` overrides are applied to the
//! parsed document before it is interpreted.
//!
//! ```toml
//! system = "halanay"
//!
//! [halanay]
//! alpha = 2.0
//! beta = 1.0
//! r = 1.0
//!
//! [scalar_fde]
//! a = { fn = "sine_offset", amplitude = 1.0, frequency = 1.0, offset = 0.5 }
//! b = { fn = "constant", value = 0.002 }
//! lag = 1.0
//!
//! [inequality.e]
//! kind = "exponential"
//! m0 = 1.0
//! lambda0 = 2.0
//! ```

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::certificate::InequalityData;
use crate::dde::{Delay, IntegratorOptions};
use crate::func::ScalarFunction;
use crate::kernels::{Kernel2, QuadratureConfig};
use crate::sectorial::{NeuralNetwork, SectorialParams, Variant};
use crate::systems::{Coupling, ScalarFde, SuperlinearCoupling, SuperlinearSystem};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("bad override {0:?}, expected key=value")]
    Override(String),
    #[error("missing section [{0}]")]
    Missing(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Named scalar functions.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "fn", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    Constant {
        value: f64,
    },
    SineOffset {
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
    },
    Table {
        times: Vec<f64>,
        values: Vec<f64>,
        #[serde(default)]
        periodic: bool,
    },
}

fn one() -> f64 {
    1.0
}

impl FunctionSpec {
    pub fn build(&self) -> Result<ScalarFunction, ConfigError> {
        Ok(match self {
            FunctionSpec::Constant { value } => ScalarFunction::constant(*value),
            FunctionSpec::SineOffset {
                amplitude,
                frequency,
                phase,
                offset,
            } => ScalarFunction::sine_offset(*amplitude, *frequency, *phase, *offset),
            FunctionSpec::Table { times, values, periodic } => {
                ScalarFunction::table(times.clone(), values.clone(), *periodic).ok_or_else(|| {
                    ConfigError::Invalid("table needs increasing times and matching finite values".into())
                })?
            }
        })
    }
}

/// Named kernels.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    Exponential { m0: f64, lambda0: f64 },
    Coefficient { a: FunctionSpec },
    Scaled { base: Box<KernelSpec>, b: FunctionSpec },
    PowerSingular { c: f64, alpha: f64, beta: f64 },
    FutureExponential { c: f64, beta: f64 },
    Tabulated { t_grid: Vec<f64>, s_grid: Vec<f64>, values: Vec<f64> },
}

impl KernelSpec {
    pub fn build(&self) -> Result<Kernel2, ConfigError> {
        let k = match self {
            KernelSpec::Exponential { m0, lambda0 } => Kernel2::exponential(*m0, *lambda0),
            KernelSpec::Coefficient { a } => Kernel2::coefficient(a.build()?),
            KernelSpec::Scaled { base, b } => base.build()?.scaled(b.build()?),
            KernelSpec::PowerSingular { c, alpha, beta } => Kernel2::PowerSingular {
                c: *c,
                alpha: *alpha,
                beta: *beta,
            },
            KernelSpec::FutureExponential { c, beta } => Kernel2::FutureExponential { c: *c, beta: *beta },
            KernelSpec::Tabulated { t_grid, s_grid, values } => {
                Kernel2::tabulated(t_grid.clone(), s_grid.clone(), values.clone())
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?
            }
        };
        k.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(k)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InequalitySection {
    pub e: KernelSpec,
    pub k1: Option<KernelSpec>,
    pub k2: Option<KernelSpec>,
    #[serde(default)]
    pub rho: f64,
    #[serde(default)]
    pub r: f64,
    pub horizon: Option<f64>,
}

impl InequalitySection {
    pub fn build(&self) -> Result<InequalityData, ConfigError> {
        let data = InequalityData {
            e: self.e.build()?,
            k1: self.k1.as_ref().map(KernelSpec::build).transpose()?,
            k2: self.k2.as_ref().map(KernelSpec::build).transpose()?,
            rho: self.rho,
            r: self.r,
        };
        data.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(data)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalanaySection {
    pub alpha: f64,
    pub beta: f64,
    #[serde(default = "one")]
    pub r: f64,
    #[serde(default)]
    pub rho: f64,
}

/// `ẋ = -a x + b x(t - lag)`
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearLagSection {
    pub a: f64,
    pub b: f64,
    pub lag: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarFdeSection {
    pub a: FunctionSpec,
    pub b: FunctionSpec,
    pub lag: Option<f64>,
    /// Sampled-max coupling over several lags instead of a single lag.
    pub lags: Option<Vec<f64>>,
    #[serde(default = "default_tau_samples")]
    pub tau_samples: usize,
    pub horizon: Option<f64>,
}

fn default_tau_samples() -> usize {
    16
}

impl ScalarFdeSection {
    pub fn build(&self) -> Result<ScalarFde, ConfigError> {
        let (a, b) = (self.a.build()?, self.b.build()?);
        let sys = match (self.lag, &self.lags) {
            (Some(lag), None) => ScalarFde::lagged(a, b, lag),
            (None, Some(lags)) if !lags.is_empty() => ScalarFde {
                a,
                b,
                r: lags.iter().copied().fold(0.0, f64::max),
                coupling: Coupling::SampledMax { lags: lags.clone() },
            },
            _ => return Err(ConfigError::Invalid("scalar_fde needs exactly one of lag, lags".into())),
        };
        sys.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(sys)
    }
}

/// `ẋ = -a(t) x + beta x(t - lag)` with `a` periodic.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicSection {
    pub a: FunctionSpec,
    pub omega: Option<f64>,
    pub beta: f64,
    #[serde(default = "one")]
    pub lag: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    pub coeff: f64,
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuperlinearSection {
    #[serde(default = "one_usize")]
    pub dim: usize,
    pub p: f64,
    pub q: f64,
    pub dissipation: f64,
    #[serde(default)]
    pub forcing: Vec<FunctionSpec>,
    pub couplings: Vec<CouplingSpec>,
    #[serde(default)]
    pub m_bound: f64,
    #[serde(default)]
    pub n_bound: f64,
}

fn one_usize() -> usize {
    1
}

impl SuperlinearSection {
    pub fn build(&self) -> Result<SuperlinearSystem, ConfigError> {
        let sys = SuperlinearSystem {
            dim: self.dim,
            p: self.p,
            q: self.q,
            dissipation: self.dissipation,
            forcing: self.forcing.iter().map(FunctionSpec::build).collect::<Result<_, _>>()?,
            couplings: self
                .couplings
                .iter()
                .map(|c| SuperlinearCoupling {
                    coeff: c.coeff,
                    delay: Delay::Constant(c.delay),
                })
                .collect(),
            m_bound: self.m_bound,
            n_bound: self.n_bound,
        };
        sys.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(sys)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorialSection {
    pub alpha: f64,
    pub beta: f64,
    #[serde(default = "one")]
    pub m_sect: f64,
    pub lipschitz: f64,
    pub c0: Option<f64>,
    #[serde(default)]
    pub c1: f64,
    #[serde(default = "default_variant")]
    pub variant: String,
}

fn default_variant() -> String {
    "stable".into()
}

impl SectorialSection {
    pub fn build(&self) -> Result<(SectorialParams, Variant), ConfigError> {
        let variant = match self.variant.as_str() {
            "full" => Variant::Full,
            "stable" => Variant::Stable,
            v => return Err(ConfigError::Invalid(format!("unknown sectorial variant {v:?}"))),
        };
        let p = SectorialParams {
            alpha: self.alpha,
            beta: self.beta,
            m_sect: self.m_sect,
            lipschitz: self.lipschitz,
            c0: self.c0.unwrap_or(self.lipschitz),
            c1: self.c1,
        };
        p.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok((p, variant))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuralSection {
    pub mesh_points: usize,
    pub diffusion: Vec<f64>,
    pub coupling: Option<Vec<Vec<f64>>>,
    pub connections: Vec<Vec<f64>>,
    pub delays: Vec<Vec<f64>>,
    pub inputs: Vec<FunctionSpec>,
    /// Input period used for the periodicity check.
    pub period: Option<f64>,
    #[serde(default = "default_neural_t_end")]
    pub t_end: f64,
}

fn default_neural_t_end() -> f64 {
    40.0
}

impl NeuralSection {
    pub fn build(&self) -> Result<NeuralNetwork, ConfigError> {
        let n = self.diffusion.len();
        let net = NeuralNetwork {
            mesh_points: self.mesh_points,
            diffusion: self.diffusion.clone(),
            coupling: self.coupling.clone().unwrap_or_else(|| vec![vec![0.0; n]; n]),
            connections: self.connections.clone(),
            delays: self.delays.clone(),
            inputs: self.inputs.iter().map(FunctionSpec::build).collect::<Result<_, _>>()?,
        };
        net.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(net)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default)]
    pub tau: f64,
    pub t_end: Option<f64>,
    /// Constant initial history; random histories are drawn when absent.
    pub history: Option<Vec<f64>>,
    #[serde(default = "default_histories")]
    pub n_histories: usize,
    #[serde(default = "default_history_norm")]
    pub history_norm: f64,
    #[serde(default)]
    pub overlap_iteration: bool,
    #[serde(default = "default_guard")]
    pub blowup_guard: f64,
    #[serde(default = "default_tol")]
    pub envelope_tol: f64,
}

fn default_h() -> f64 {
    0.01
}
fn default_histories() -> usize {
    1
}
fn default_history_norm() -> f64 {
    1.0
}
fn default_guard() -> f64 {
    1e12
}
fn default_tol() -> f64 {
    1e-6
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            h: default_h(),
            tau: 0.0,
            t_end: None,
            history: None,
            n_histories: default_histories(),
            history_norm: default_history_norm(),
            overlap_iteration: false,
            blowup_guard: default_guard(),
            envelope_tol: default_tol(),
        }
    }
}

impl SimulationSection {
    pub fn options(&self) -> IntegratorOptions {
        IntegratorOptions {
            blowup_guard: self.blowup_guard,
            overlap_iteration: self.overlap_iteration,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(default = "one")]
    pub y0_norm: f64,
    #[serde(default = "default_oracle_t_max")]
    pub t_max: f64,
    #[serde(default = "default_oracle_grid")]
    pub n_grid: usize,
    #[serde(default = "default_oracle_tol")]
    pub tol: f64,
    #[serde(default = "default_oracle_iter")]
    pub max_iterations: usize,
}

fn default_oracle_t_max() -> f64 {
    20.0
}
fn default_oracle_grid() -> usize {
    1001
}
fn default_oracle_tol() -> f64 {
    1e-10
}
fn default_oracle_iter() -> usize {
    10_000
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            y0_norm: 1.0,
            t_max: default_oracle_t_max(),
            n_grid: default_oracle_grid(),
            tol: default_oracle_tol(),
            max_iterations: default_oracle_iter(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttractorSection {
    #[serde(default = "default_t_star")]
    pub t_star: f64,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_n_random")]
    pub n_random: usize,
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    #[serde(default = "default_attr_tol")]
    pub tol: f64,
    #[serde(default = "default_attr_h")]
    pub h: f64,
    /// Radius the attractor sample is checked against.
    pub containment_radius: Option<f64>,
}

fn default_t_star() -> f64 {
    0.0
}
fn default_radius() -> f64 {
    10.0
}
fn default_n_random() -> usize {
    16
}
fn default_spacing() -> f64 {
    0.05
}
fn default_attr_tol() -> f64 {
    1e-3
}
fn default_attr_h() -> f64 {
    0.005
}

impl Default for AttractorSection {
    fn default() -> Self {
        Self {
            t_star: default_t_star(),
            radius: default_radius(),
            n_random: default_n_random(),
            spacing: default_spacing(),
            tol: default_attr_tol(),
            h: default_attr_h(),
            containment_radius: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSection {
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub max_refinements: Option<u32>,
    pub tail_cutoff: Option<f64>,
}

/// The whole configuration file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Which system section the certify/simulate/verify/oracle commands use.
    pub system: Option<String>,
    pub inequality: Option<InequalitySection>,
    pub halanay: Option<HalanaySection>,
    pub linear_lag: Option<LinearLagSection>,
    pub scalar_fde: Option<ScalarFdeSection>,
    pub periodic: Option<PeriodicSection>,
    pub superlinear: Option<SuperlinearSection>,
    pub sectorial: Option<SectorialSection>,
    pub neural: Option<NeuralSection>,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub attractor: AttractorSection,
    pub quadrature: Option<QuadratureSection>,
}

/// Section names that describe a system, in the order they are tried when
/// `system` is not given.
pub const SYSTEMS: [&str; 7] = [
    "inequality",
    "halanay",
    "linear_lag",
    "scalar_fde",
    "periodic",
    "superlinear",
    "sectorial",
];

impl Config {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text, overrides)
    }

    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        doc.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))
    }

    pub fn quadrature(&self) -> QuadratureConfig {
        let mut q = QuadratureConfig::default();
        if let Some(s) = &self.quadrature {
            q.rel_tol = s.rel_tol.unwrap_or(q.rel_tol);
            q.abs_tol = s.abs_tol.unwrap_or(q.abs_tol);
            q.max_refinements = s.max_refinements.unwrap_or(q.max_refinements);
            q.tail_cutoff = s.tail_cutoff.or(q.tail_cutoff);
        }
        q
    }

    fn present(&self, name: &str) -> bool {
        match name {
            "inequality" => self.inequality.is_some(),
            "halanay" => self.halanay.is_some(),
            "linear_lag" => self.linear_lag.is_some(),
            "scalar_fde" => self.scalar_fde.is_some(),
            "periodic" => self.periodic.is_some(),
            "superlinear" => self.superlinear.is_some(),
            "sectorial" => self.sectorial.is_some(),
            "neural" => self.neural.is_some(),
            _ => false,
        }
    }

    /// The selected system section name.
    pub fn selected(&self) -> Result<&str, ConfigError> {
        match &self.system {
            Some(s) => {
                if !self.present(s) {
                    return Err(ConfigError::Missing(s.clone()));
                }
                Ok(s.as_str())
            }
            None => SYSTEMS
                .iter()
                .copied()
                .find(|s| self.present(s))
                .ok_or_else(|| ConfigError::Missing("system".into())),
        }
    }
}

/// `a.b.c=value`, where `value` is read as a TOML value and falls back to a
/// bare string.
fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| ConfigError::Override(assignment.into()))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(ConfigError::Override(assignment.into()));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.into()));
    let parts: Vec<&str> = key.split('.').collect();
    let mut table = doc;
    for part in &parts[..parts.len() - 1] {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| ConfigError::Override(assignment.into()))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HALANAY: &str = r#"
[halanay]
alpha = 2.0
beta = 1.0
"#;

    #[test]
    fn parses_and_selects() {
        let c = Config::parse(HALANAY, &[]).unwrap();
        assert_eq!(c.selected().unwrap(), "halanay");
        assert_eq!(c.halanay.as_ref().unwrap().r, 1.0);
        assert_eq!(c.simulation.h, 0.01);
    }

    #[test]
    fn overrides_apply_after_parse() {
        let c = Config::parse(HALANAY, &["halanay.beta=0.5".into(), "simulation.h=0.005".into()]).unwrap();
        assert_eq!(c.halanay.unwrap().beta, 0.5);
        assert_eq!(c.simulation.h, 0.005);
        let c = Config::parse(HALANAY, &["system=halanay".into()]).unwrap();
        assert_eq!(c.system.as_deref(), Some("halanay"));
        assert!(matches!(
            Config::parse(HALANAY, &["nonsense".into()]),
            Err(ConfigError::Override(_))
        ));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(Config::parse("[halanay]\nalpha=1\nbeta=0.1\ngamma=3\n", &[]), Err(ConfigError::Parse(_))));
        assert!(matches!(Config::parse("not toml [", &[]), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn kernels_and_functions_build() {
        let text = r#"
[inequality]
rho = 1.0
r = 1.0
e = { kind = "exponential", m0 = 1.0, lambda0 = 2.0 }
k1 = { kind = "scaled", base = { kind = "exponential", m0 = 1.0, lambda0 = 2.0 }, b = { fn = "constant", value = 1.0 } }

[scalar_fde]
a = { fn = "sine_offset", amplitude = 1.0, offset = 0.5 }
b = { fn = "table", times = [0.0, 1.0, 2.0], values = [0.1, 0.2, 0.1], periodic = true }
lag = 1.0
"#;
        let c = Config::parse(text, &[]).unwrap();
        let d = c.inequality.as_ref().unwrap().build().unwrap();
        assert!((d.k1.unwrap().eval(1.0, 0.0).unwrap() - (-2f64).exp()).abs() < 1e-15);
        let s = c.scalar_fde.as_ref().unwrap().build().unwrap();
        assert!((s.a.eval(0.0) - 0.5).abs() < 1e-15);
        assert!((s.b.eval(2.5) - 0.15).abs() < 1e-12);
        assert_eq!(c.selected().unwrap(), "inequality");
    }

    #[test]
    fn missing_selected_section() {
        let c = Config::parse("system = \"periodic\"\n", &[]).unwrap();
        assert!(matches!(c.selected(), Err(ConfigError::Missing(_))));
        let c = Config::parse("", &[]).unwrap();
        assert!(c.selected().is_err());
    }
}
