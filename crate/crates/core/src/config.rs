//! TOML experiment configuration.
//!
//! ```toml
//! seed = 7
//! trials = 20
//! n_list = [64, 128, 256]
//! alpha = 1.0
//! t = [1.0, 2.0, 4.0]
//! tau = "auto"          # or a fixed scale
//!
//! [domain]
//! type = "graph"
//! shape = "cycle"
//! vertices = 50
//!
//! [kernel]
//! type = "heat"
//! time = 20.0
//! amplitude = 50.0
//!
//! [filter]
//! method = "landweber"
//!
//! [signal]
//! budget = 64
//! h_norm = 1.0
//! ```
//!
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{FilterFamily, Method};
use crate::kernels::{Domain, FourierProfile, Graph, Kernel, DEFAULT_FOURIER_TRUNCATION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub n_list: Vec<usize>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_t")]
    pub t: Vec<f64>,
    #[serde(default)]
    pub tau: TauRule,
    /// Scales for the approximation-decay experiment.
    #[serde(default)]
    pub taus: Vec<u64>,
    /// Quadrature nodes for box domains; required to run on a box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub domain: DomainConfig,
    pub kernel: KernelConfig,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub signal: SignalConfig,
}

fn default_trials() -> usize {
    20
}

fn default_alpha() -> f64 {
    1.0
}

fn default_t() -> Vec<f64> {
    vec![1.0, 2.0, 4.0]
}

/// Scale cutoff: `"auto"` for `⌈N^{1/(2β+2)}⌉`, or a fixed integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TauRule {
    #[default]
    Auto,
    Fixed(u64),
}

impl Serialize for TauRule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TauRule::Auto => s.serialize_str("auto"),
            TauRule::Fixed(t) => s.serialize_u64(*t),
        }
    }
}

impl<'de> Deserialize<'de> for TauRule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Fixed(u64),
            Named(String),
        }
        match Raw::deserialize(d)? {
            Raw::Fixed(t) => Ok(TauRule::Fixed(t)),
            Raw::Named(s) if s == "auto" => Ok(TauRule::Auto),
            Raw::Named(s) => Err(serde::de::Error::custom(format!(
                "tau must be \"auto\" or an integer, got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphShape {
    Cycle,
    Path,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainConfig {
    Circle,
    Graph {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shape: Option<GraphShape>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        vertices: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        edge_list: Option<PathBuf>,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileName {
    Exponential,
    Gaussian,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelConfig {
    Circle {
        #[serde(default = "default_profile")]
        profile: ProfileName,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rate: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coefficients: Option<Vec<f64>>,
        #[serde(default = "default_truncation")]
        truncation: u32,
    },
    Heat {
        time: f64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
    Gaussian {
        bandwidth: f64,
    },
}

fn default_profile() -> ProfileName {
    ProfileName::Exponential
}

fn default_truncation() -> u32 {
    DEFAULT_FOURIER_TRUNCATION
}

fn default_amplitude() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    Tikhonov,
    IteratedTikhonov,
    Landweber,
    Asymptotic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub method: MethodName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    /// Landweber step; defaults to `1/κ²`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            method: MethodName::Landweber,
            m: None,
            gamma: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalConfig {
    /// Number of eigenmodes carrying `h`; defaults to all positive modes up
    /// to 64.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(default = "default_h_norm")]
    pub h_norm: f64,
}

fn default_h_norm() -> f64 {
    1.0
}

impl Default for SignalConfig {
    fn default() -> Self {
        Self {
            budget: None,
            h_norm: 1.0,
        }
    }
}

impl FilterConfig {
    pub fn build(&self, kappa_sq: f64) -> Result<FilterFamily> {
        let method = match self.method {
            MethodName::Tikhonov => Method::Tikhonov,
            MethodName::IteratedTikhonov => Method::IteratedTikhonov {
                m: self.m.ok_or_else(|| {
                    Error::InvalidParameter("iterated Tikhonov needs `m`".into())
                })?,
            },
            MethodName::Landweber => Method::Landweber {
                gamma: self.gamma.unwrap_or(1.0 / kappa_sq),
            },
            MethodName::Asymptotic => Method::Asymptotic,
        };
        if self.m.is_some() && self.method != MethodName::IteratedTikhonov {
            return Err(Error::InvalidParameter(
                "`m` only applies to iterated Tikhonov".into(),
            ));
        }
        if self.gamma.is_some() && self.method != MethodName::Landweber {
            return Err(Error::InvalidParameter(
                "`gamma` only applies to Landweber".into(),
            ));
        }
        FilterFamily::new(method, kappa_sq)
    }
}

impl DomainConfig {
    pub fn build(&self) -> Result<Domain> {
        match self {
            DomainConfig::Circle => Ok(Domain::Circle),
            DomainConfig::Box { lo, hi } => Domain::euclidean_box(lo.clone(), hi.clone()),
            DomainConfig::Graph {
                shape,
                vertices,
                edge_list,
            } => {
                let graph = match (shape, edge_list) {
                    (Some(s), None) => {
                        let m = vertices.ok_or_else(|| {
                            Error::InvalidParameter("graph shape needs `vertices`".into())
                        })?;
                        match s {
                            GraphShape::Cycle => Graph::cycle(m)?,
                            GraphShape::Path => Graph::path(m)?,
                            GraphShape::Complete => Graph::complete(m)?,
                        }
                    }
                    (None, Some(p)) => Graph::read_edge_list(p, *vertices)?,
                    _ => {
                        return Err(Error::InvalidParameter(
                            "graph domain needs exactly one of `shape` or `edge_list`".into(),
                        ))
                    }
                };
                Ok(Domain::FiniteGraph(graph))
            }
        }
    }
}

impl KernelConfig {
    pub fn build(&self, domain: &Domain) -> Result<Kernel> {
        let kernel = match self {
            KernelConfig::Circle {
                profile,
                rate,
                coefficients,
                truncation,
            } => {
                let need_rate = || {
                    rate.ok_or_else(|| Error::InvalidParameter("profile needs `rate`".into()))
                };
                let p = match profile {
                    ProfileName::Exponential => FourierProfile::Exponential { rate: need_rate()? },
                    ProfileName::Gaussian => FourierProfile::Gaussian { rate: need_rate()? },
                    ProfileName::Explicit => FourierProfile::Explicit {
                        coefficients: coefficients.clone().ok_or_else(|| {
                            Error::InvalidParameter("explicit profile needs `coefficients`".into())
                        })?,
                    },
                };
                Kernel::circle(p, *truncation)?
            }
            KernelConfig::Heat { time, amplitude } => match domain {
                Domain::FiniteGraph(g) => Kernel::graph_heat(g, *time, *amplitude)?,
                _ => {
                    return Err(Error::InvalidDomain(
                        "heat kernel needs a graph domain".into(),
                    ))
                }
            },
            KernelConfig::Gaussian { bandwidth } => match domain {
                Domain::EuclideanBox { lo, .. } => Kernel::gaussian(*bandwidth, lo.len())?,
                _ => {
                    return Err(Error::InvalidDomain(
                        "Gaussian kernel needs a box domain".into(),
                    ))
                }
            },
        };
        if !kernel.matches_domain(domain) {
            return Err(Error::InvalidDomain(format!(
                "kernel {} does not live on domain {}",
                kernel.descriptor(),
                domain.name()
            )));
        }
        Ok(kernel)
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with_overrides(text, &[])
    }

    /// Parse `text`, then apply `key=value` overrides. Keys are dotted paths
    /// (`filter.method`); values are read as TOML, falling back to strings.
    pub fn from_toml_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut root: toml::Table =
            toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        for (key, value) in overrides {
            set_path(&mut root, key, parse_value(value))?;
        }
        let cfg: Self = toml::Value::Table(root)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_with_overrides(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) || self.n_list.contains(&0) {
            return Err(Error::InvalidParameter(
                "n_list must be positive and strictly increasing".into(),
            ));
        }
        if self.t.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::InvalidParameter("t must be positive".into()));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidParameter("alpha must be positive".into()));
        }
        if self.taus.windows(2).any(|w| w[0] >= w[1]) || self.taus.contains(&0) {
            return Err(Error::InvalidParameter(
                "taus must be positive and strictly increasing".into(),
            ));
        }
        Ok(())
    }

    /// Domain, kernel and filter family described by the config.
    pub fn build(&self) -> Result<(Domain, Kernel, FilterFamily)> {
        let domain = self.domain.build()?;
        let kernel = self.kernel.build(&domain)?;
        let family = self.filter.build(kernel.kappa_bound())?;
        Ok((domain, kernel, family))
    }
}

fn parse_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn set_path(root: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| {
        Error::Parse(format!("empty override key {key:?}"))
    })?;
    let mut table = root;
    for p in parts {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Parse(format!("override {key:?} descends into a value")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}
