//! Experiment configuration, read from TOML or JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};
use sinkhorn_dro::apps::NewsvendorCost;
use sinkhorn_dro::optimizer::{InnerSolverConfig, StepSchedule};

use crate::error::{HarnessError, Result};
use crate::grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum App {
    Newsvendor,
    Portfolio,
    Semisup,
    CustomFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Saa,
    Sinkhorn,
    Kl,
    Wasserstein,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Saa => "saa",
            Method::Sinkhorn => "sinkhorn",
            Method::Kl => "kl",
            Method::Wasserstein => "wasserstein",
        }
    }

    /// Whether the method has hyper-parameters to select.
    pub fn is_tuned(self) -> bool {
        self != Method::Saa
    }
}

/// Hyper-parameter values; unset entries are chosen by cross-validation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyper {
    pub epsilon: Option<f64>,
    pub rho_bar: Option<f64>,
    pub rho: Option<f64>,
    pub eta: Option<f64>,
}

impl Hyper {
    /// All hyper-parameters `method` needs are set.
    pub fn complete_for(&self, method: Method) -> bool {
        match method {
            Method::Saa => true,
            Method::Sinkhorn => self.epsilon.is_some() && self.rho_bar.is_some(),
            Method::Kl => self.eta.is_some(),
            Method::Wasserstein => self.rho.is_some(),
        }
    }

    /// Keeps only the entries `method` uses.
    pub fn restrict(&self, method: Method) -> Hyper {
        match method {
            Method::Saa => Hyper::default(),
            Method::Sinkhorn => Hyper {
                epsilon: self.epsilon,
                rho_bar: self.rho_bar,
                ..Hyper::default()
            },
            Method::Kl => Hyper {
                eta: self.eta,
                ..Hyper::default()
            },
            Method::Wasserstein => Hyper {
                rho: self.rho,
                ..Hyper::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grids {
    pub epsilon: Vec<f64>,
    pub rho_bar: Vec<f64>,
    pub rho: Vec<f64>,
    pub eta: Vec<f64>,
}

impl Default for Grids {
    fn default() -> Self {
        Self {
            epsilon: grid::default_epsilon_grid(),
            rho_bar: grid::default_rho_bar_grid(),
            rho: grid::default_radius_grid(),
            eta: grid::default_radius_grid(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleName {
    InverseLinear,
    InverseSqrt,
}

/// Projected-subgradient settings for every inner `θ` solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    pub schedule: ScheduleName,
    pub step_scale: f64,
    #[serde(default)]
    pub normalized: bool,
    pub rel_tol: f64,
    pub max_steps: usize,
}

impl SolverSettings {
    pub fn to_inner(self) -> InnerSolverConfig {
        InnerSolverConfig {
            schedule: match self.schedule {
                ScheduleName::InverseLinear => StepSchedule::InverseLinear,
                ScheduleName::InverseSqrt => StepSchedule::InverseSqrt,
            },
            step_scale: self.step_scale,
            normalized: self.normalized,
            rel_tol: self.rel_tol,
            max_steps: self.max_steps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroundCost {
    Quadratic,
    Absolute,
}

impl From<GroundCost> for NewsvendorCost {
    fn from(c: GroundCost) -> Self {
        match c {
            GroundCost::Quadratic => NewsvendorCost::Quadratic,
            GroundCost::Absolute => NewsvendorCost::Absolute,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewsvendorSettings {
    /// Scale of the exponential demand.
    pub s: f64,
    pub k: f64,
    pub u: f64,
    /// Ground cost of the Wasserstein baseline.
    pub wasserstein_cost: GroundCost,
}

impl Default for NewsvendorSettings {
    fn default() -> Self {
        Self {
            s: 1.0,
            k: 5.0,
            u: 7.0,
            wasserstein_cost: GroundCost::Quadratic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PortfolioSettings {
    pub dim: usize,
    pub alpha: f64,
    pub varrho: f64,
}

impl Default for PortfolioSettings {
    fn default() -> Self {
        Self {
            dim: 10,
            alpha: 0.2,
            varrho: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemisupSettings {
    pub path: PathBuf,
    /// Header of the label column; the last column when absent.
    pub label_column: Option<String>,
    pub n_labeled: usize,
    pub n_unlabeled: usize,
    #[serde(default = "yes")]
    pub standardize: bool,
}

/// A finite-space instance: loss values `f` on `L` atoms and an `n × L`
/// kernel matrix `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteSettings {
    pub f: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    pub rho_bar: f64,
    pub epsilon: f64,
}

/// Linear loss `aᵀz` on an empirical distribution with Gaussian kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSettings {
    pub a: Vec<f64>,
    pub data: Vec<Vec<f64>>,
    pub rho_bar: f64,
    pub epsilon: f64,
    /// Mahalanobis weight; identity when absent.
    pub omega: Option<Vec<Vec<f64>>>,
}

/// Discrete Sinkhorn distance between `p` and `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceSettings {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub cost: Vec<Vec<f64>>,
    pub epsilon: f64,
    /// Reference weights on the `q` atoms; all ones when absent.
    pub nu: Option<Vec<f64>>,
    #[serde(default = "default_distance_tol")]
    pub tol: f64,
    #[serde(default = "default_distance_iters")]
    pub max_iters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub app: App,
    #[serde(default = "all_methods", alias = "method", deserialize_with = "one_or_many")]
    pub methods: Vec<Method>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_test_size")]
    pub test_size: usize,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub seed: u64,
    /// Write wall times; turn off for byte-reproducible result files.
    #[serde(default = "yes")]
    pub record_time: bool,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub hyper: Hyper,
    pub solver: Option<SolverSettings>,
    #[serde(default)]
    pub newsvendor: NewsvendorSettings,
    #[serde(default)]
    pub portfolio: PortfolioSettings,
    pub semisup: Option<SemisupSettings>,
    pub finite: Option<FiniteSettings>,
    pub linear: Option<LinearSettings>,
    pub distance: Option<DistanceSettings>,
}

fn yes() -> bool {
    true
}
fn all_methods() -> Vec<Method> {
    vec![Method::Saa, Method::Sinkhorn, Method::Kl, Method::Wasserstein]
}
fn default_n() -> usize {
    20
}
fn default_m() -> usize {
    20
}
fn default_trials() -> usize {
    50
}
fn default_test_size() -> usize {
    100_000
}
fn default_folds() -> usize {
    10
}
fn default_distance_tol() -> f64 {
    1e-10
}
fn default_distance_iters() -> usize {
    100_000
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Method>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(Method),
        Many(Vec<Method>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(m) => vec![m],
        OneOrMany::Many(v) => v,
    })
}

impl ExperimentConfig {
    /// A configuration with defaults everywhere but the application.
    pub fn new(app: App) -> Self {
        Self {
            app,
            methods: all_methods(),
            n: default_n(),
            m: default_m(),
            trials: default_trials(),
            test_size: default_test_size(),
            folds: default_folds(),
            seed: 0,
            record_time: true,
            output: None,
            grids: Grids::default(),
            hyper: Hyper::default(),
            solver: None,
            newsvendor: NewsvendorSettings::default(),
            portfolio: PortfolioSettings::default(),
            semisup: None,
            finite: None,
            linear: None,
            distance: None,
        }
    }

    /// Reads a `.json` file as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::ConfigIo {
            path: path.to_path_buf(),
            source,
        })?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let parsed = if is_json {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        };
        parsed.map_err(|reason| HarnessError::ConfigParse {
            path: path.to_path_buf(),
            reason,
        })
    }

    pub fn from_toml(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }

    /// Checks the invariants a benchmark or cross-validation run relies on.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.trials < 1 {
            return bad("trials must be >= 1".into());
        }
        if self.folds < 2 {
            return bad(format!("folds must be >= 2, got {}", self.folds));
        }
        if self.n < 1 || self.m < 1 || self.test_size < 1 {
            return bad("n, m and test_size must be >= 1".into());
        }
        if self.methods.is_empty() {
            return bad("no methods selected".into());
        }
        for &method in &self.methods {
            if self.hyper.complete_for(method) {
                continue;
            }
            let empty = match method {
                Method::Saa => false,
                Method::Sinkhorn => {
                    (self.hyper.epsilon.is_none() && self.grids.epsilon.is_empty())
                        || (self.hyper.rho_bar.is_none() && self.grids.rho_bar.is_empty())
                }
                Method::Kl => self.grids.eta.is_empty(),
                Method::Wasserstein => self.grids.rho.is_empty(),
            };
            if empty {
                return bad(format!("empty grid for tuned method `{}`", method.name()));
            }
        }
        let grids = [
            &self.grids.epsilon,
            &self.grids.rho_bar,
            &self.grids.rho,
            &self.grids.eta,
        ];
        if grids.iter().any(|g| g.iter().any(|v| !(v.is_finite() && *v >= 0.0))) {
            return bad("grid values must be finite and >= 0".into());
        }
        if self.grids.epsilon.contains(&0.0) {
            return bad("epsilon grid values must be > 0".into());
        }
        match self.app {
            App::Newsvendor => {
                let s = &self.newsvendor;
                if !(s.s > 0.0 && s.k > 0.0 && s.u > s.k) {
                    return bad("newsvendor needs s > 0 and u > k > 0".into());
                }
            }
            App::Portfolio => {
                if self.portfolio.dim < 1 {
                    return bad("portfolio dim must be >= 1".into());
                }
            }
            App::Semisup => {
                let Some(s) = &self.semisup else {
                    return bad("app `semisup` needs a [semisup] section".into());
                };
                if s.n_labeled < self.folds {
                    return bad(format!(
                        "n_labeled = {} is smaller than folds = {}",
                        s.n_labeled, self.folds
                    ));
                }
                if self.methods.contains(&Method::Wasserstein) {
                    return bad("no Wasserstein baseline for `semisup`".into());
                }
            }
            App::CustomFinite => {
                return bad("app `custom-finite` supports `solve` and `export-cbf` only".into());
            }
        }
        if self.app != App::Semisup && self.n < self.folds && self.needs_cv() {
            return bad(format!("n = {} is smaller than folds = {}", self.n, self.folds));
        }
        Ok(())
    }

    /// Some selected method lacks a fixed hyper-parameter.
    pub fn needs_cv(&self) -> bool {
        self.methods.iter().any(|&m| !self.hyper.complete_for(m))
    }

    /// Inner solver settings, falling back to a per-application default.
    pub fn inner(&self) -> InnerSolverConfig {
        if let Some(s) = self.solver {
            return s.to_inner();
        }
        match self.app {
            App::Newsvendor => InnerSolverConfig {
                schedule: StepSchedule::InverseSqrt,
                step_scale: self.newsvendor.s,
                normalized: false,
                rel_tol: 1e-6,
                max_steps: 3000,
            },
            App::Portfolio => InnerSolverConfig {
                schedule: StepSchedule::InverseSqrt,
                step_scale: 0.1,
                normalized: true,
                rel_tol: 1e-7,
                max_steps: 3000,
            },
            App::Semisup | App::CustomFinite => InnerSolverConfig {
                schedule: StepSchedule::InverseSqrt,
                step_scale: 1.0,
                normalized: false,
                rel_tol: 1e-6,
                max_steps: 2000,
            },
        }
    }
}
