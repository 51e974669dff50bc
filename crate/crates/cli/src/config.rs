//! Run configuration: a TOML-serializable description from which a run is
//! reproducible, plus command-line overrides (flags win).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use pnewton_core::reference::{KernelKind, Structure};
use pnewton_core::solvers::StopMeasure;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config {0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("failed to parse config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default)]
    pub reference: ReferenceSpec,
    pub algorithm: AlgorithmSpec,
    #[serde(default)]
    pub stopping: StoppingSpec,
}

fn default_out() -> PathBuf {
    PathBuf::from("runs")
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &PathBuf) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.clone(), e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match &self.problem {
            ProblemSpec::Poly1d { p, coeffs } => {
                if p.is_none() && coeffs.is_none() {
                    return Err(ConfigError::Invalid(
                        "poly1d needs either `p` or `coeffs`".into(),
                    ));
                }
                if let Some(p) = p {
                    if *p < 2 || *p % 2 != 0 {
                        return Err(ConfigError::Invalid(
                            "poly1d family exponent must be even and >= 2".into(),
                        ));
                    }
                }
            }
            ProblemSpec::Quadratic { n, cond } => {
                if *n == 0 || *cond < 1.0 {
                    return Err(ConfigError::Invalid("quadratic needs n >= 1, cond >= 1".into()));
                }
            }
            ProblemSpec::Matfact { n, r, cond } => {
                if *r == 0 || r > n || *cond < 1.0 {
                    return Err(ConfigError::Invalid(
                        "matfact needs 1 <= r <= n and cond >= 1".into(),
                    ));
                }
            }
            ProblemSpec::Logistic { .. } => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// `x^p/p + x²/2` when `p` is given, or explicit ascending coefficients.
    Poly1d {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coeffs: Option<Vec<f64>>,
    },
    Quadratic {
        n: usize,
        cond: f64,
    },
    Logistic {
        path: PathBuf,
        #[serde(default)]
        l2: f64,
    },
    Matfact {
        n: usize,
        r: usize,
        cond: f64,
    },
}

impl ProblemSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ProblemSpec::Poly1d { .. } => "poly1d",
            ProblemSpec::Quadratic { .. } => "quadratic",
            ProblemSpec::Logistic { .. } => "logistic",
            ProblemSpec::Matfact { .. } => "matfact",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct InitSpec {
    #[serde(default)]
    pub mode: InitMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for InitSpec {
    fn default() -> Self {
        Self {
            mode: InitMode::Zeros,
            value: None,
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    #[default]
    Zeros,
    Randn,
    Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    #[serde(default = "default_kernel")]
    pub kernel: KernelName,
    #[serde(default)]
    pub structure: StructureName,
    #[serde(default)]
    pub scale: ScaleSpec,
}

fn default_kernel() -> KernelName {
    KernelName::Cosh
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        Self {
            kernel: KernelName::Cosh,
            structure: StructureName::Isotropic,
            scale: ScaleSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum KernelName {
    Quad,
    Cosh,
    Expabs,
    Logbar,
}

impl KernelName {
    pub fn to_kind(self) -> KernelKind {
        match self {
            KernelName::Quad => KernelKind::Quadratic,
            KernelName::Cosh => KernelKind::Cosh,
            KernelName::Expabs => KernelKind::ExpAbs,
            KernelName::Logbar => KernelKind::LogBarrier,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            KernelName::Quad => "quad",
            KernelName::Cosh => "cosh",
            KernelName::Expabs => "expabs",
            KernelName::Logbar => "logbar",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StructureName {
    #[default]
    Isotropic,
    Separable,
}

impl StructureName {
    pub fn to_structure(self) -> Structure {
        match self {
            StructureName::Isotropic => Structure::Isotropic,
            StructureName::Separable => Structure::Separable,
        }
    }
}

/// Kernel scale: a fixed multiplier or `"auto"`, the initial gradient norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScaleSpec {
    Fixed(f64),
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AutoTag {
    Auto,
}

impl Default for ScaleSpec {
    fn default() -> Self {
        ScaleSpec::Fixed(1.0)
    }
}

impl std::str::FromStr for ScaleSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            Ok(ScaleSpec::Auto(AutoTag::Auto))
        } else {
            s.parse::<f64>()
                .map(ScaleSpec::Fixed)
                .map_err(|_| format!("scale must be a number or 'auto', got '{s}'"))
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct AlgorithmSpec {
    pub name: AlgoName,
    /// Stepsize of the preconditioned gradient baseline.
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "one")]
    pub l0: f64,
    #[serde(default = "d_alpha")]
    pub alpha: f64,
    #[serde(default = "d_sigma_ls")]
    pub sigma_ls: f64,
    #[serde(default = "d_true")]
    pub adaptive_l: bool,
    #[serde(default = "d_backtracks")]
    pub max_backtracks: usize,
    #[serde(default = "d_backtracks")]
    pub max_l_doublings: usize,
    /// Fixed regularization weight.
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default = "one")]
    pub sigma0: f64,
    #[serde(default = "d_sigma_min")]
    pub sigma_min: f64,
    #[serde(default)]
    pub theta: f64,
    #[serde(default = "d_eta1")]
    pub eta1: f64,
    #[serde(default = "d_eta2")]
    pub eta2: f64,
    #[serde(default = "d_gamma1")]
    pub gamma1: f64,
    #[serde(default = "d_gamma2")]
    pub gamma2: f64,
    #[serde(default = "d_gamma3")]
    pub gamma3: f64,
    #[serde(default)]
    pub linsolve: LinsolveName,
    #[serde(default = "d_krylov_tol")]
    pub krylov_tol: f64,
    #[serde(default = "d_restart")]
    pub gmres_restart: usize,
}

fn d_alpha() -> f64 {
    0.5
}
fn d_sigma_ls() -> f64 {
    0.1
}
fn d_true() -> bool {
    true
}
fn d_backtracks() -> usize {
    60
}
fn d_sigma_min() -> f64 {
    1e-8
}
fn d_eta1() -> f64 {
    0.1
}
fn d_eta2() -> f64 {
    0.9
}
fn d_gamma1() -> f64 {
    0.5
}
fn d_gamma2() -> f64 {
    2.0
}
fn d_gamma3() -> f64 {
    10.0
}
fn d_krylov_tol() -> f64 {
    1e-8
}
fn d_restart() -> usize {
    50
}

impl AlgorithmSpec {
    pub fn named(name: AlgoName) -> Self {
        toml::from_str(&format!("name = \"{}\"", name.as_str())).expect("defaults")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum AlgoName {
    Pg,
    Newton,
    Pn,
    Globalized,
    Regularized,
    Adaptive,
}

impl AlgoName {
    pub fn as_str(self) -> &'static str {
        match self {
            AlgoName::Pg => "pg",
            AlgoName::Newton => "newton",
            AlgoName::Pn => "pn",
            AlgoName::Globalized => "globalized",
            AlgoName::Regularized => "regularized",
            AlgoName::Adaptive => "adaptive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum LinsolveName {
    Direct,
    Cg,
    Gmres,
    #[default]
    Auto,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct StoppingSpec {
    #[serde(default = "d_eps")]
    pub eps: f64,
    #[serde(default)]
    pub measure: MeasureName,
    #[serde(default = "d_max_iters")]
    pub max_iters: usize,
}

fn d_eps() -> f64 {
    1e-8
}
fn d_max_iters() -> usize {
    500
}

impl Default for StoppingSpec {
    fn default() -> Self {
        Self {
            eps: 1e-8,
            measure: MeasureName::PrecondGrad,
            max_iters: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureName {
    #[default]
    PrecondGrad,
    Grad,
    Stationarity,
}

impl MeasureName {
    pub fn to_measure(self) -> StopMeasure {
        match self {
            MeasureName::PrecondGrad => StopMeasure::PrecondGradNorm,
            MeasureName::Grad => StopMeasure::GradNorm,
            MeasureName::Stationarity => StopMeasure::Stationarity,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MeasureName::PrecondGrad => "precond-grad",
            MeasureName::Grad => "grad",
            MeasureName::Stationarity => "stationarity",
        }
    }
}

/// Command-line overrides; any set field wins over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub eps: Option<f64>,
    pub max_iters: Option<usize>,
    pub kernel: Option<KernelName>,
    pub scale: Option<ScaleSpec>,
    pub algo: Option<AlgoName>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(e) = self.eps {
            cfg.stopping.eps = e;
        }
        if let Some(m) = self.max_iters {
            cfg.stopping.max_iters = m;
        }
        if let Some(k) = self.kernel {
            cfg.reference.kernel = k;
        }
        if let Some(s) = self.scale {
            cfg.reference.scale = s;
        }
        if let Some(a) = self.algo {
            cfg.algorithm.name = a;
        }
    }
}
