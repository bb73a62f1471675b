use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{MixingDistribution, DEFAULT_DRAW_CAP};
use crate::copulas::{CopulaModel, CopulaSpec};
use crate::error::{Error, Result};
use crate::estimators::grouping_from_cells;
use crate::marginals::{case_study_marginals, MarginalModel};
use crate::quantiles::{ALPHA_MATCH_TOL, PAPER_GRID};
use crate::smc::SmcConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mc,
    Smc,
    IsAch,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mc => "mc",
            Method::Smc => "smc",
            Method::IsAch => "is_ach",
        }
    }

    pub fn tag(self) -> u64 {
        use crate::rng::tags;
        match self {
            Method::Mc => tags::METHOD_MC,
            Method::Smc => tags::METHOD_SMC,
            Method::IsAch => tags::METHOD_IS,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mc" => Ok(Method::Mc),
            "smc" => Ok(Method::Smc),
            "is_ach" | "is" => Ok(Method::IsAch),
            other => Err(Error::Config(format!("unknown method {other:?} (expected mc, smc or is_ach)"))),
        }
    }
}

/// Which Euler allocation an experiment targets.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllocationMode {
    #[default]
    Es,
    Var,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantileProtocol {
    pub n_per_run: usize,
    pub n_runs: usize,
    /// Defaults to the experiment seed.
    pub seed: Option<u64>,
    /// Defaults to `<out>/quantiles.json`.
    pub path: Option<PathBuf>,
}

impl Default for QuantileProtocol {
    fn default() -> Self {
        QuantileProtocol { n_per_run: 1_000_000, n_runs: 50, seed: None, path: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub copula: CopulaSpec,
    /// Omitted: the case-study Log-Normals `LN(10 - 0.1 i, 1 + 0.2 i)`.
    #[serde(default)]
    pub marginals: Option<Vec<MarginalModel>>,
    #[serde(default = "default_grid")]
    pub alphas: Vec<f64>,
    pub targets: Vec<f64>,
    #[serde(default)]
    pub allocation: AllocationMode,
    #[serde(default = "default_epsilon_rel")]
    pub epsilon_rel: f64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_n_mc")]
    pub n_mc: usize,
    #[serde(default = "default_n_is")]
    pub n_is: usize,
    #[serde(default = "default_reps")]
    pub n_repetitions: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_draw_cap")]
    pub mc_draw_cap: u64,
    #[serde(default)]
    pub smc: SmcConfig,
    #[serde(default)]
    pub quantiles: QuantileProtocol,
    #[serde(default)]
    pub mixing: MixingDistribution,
    /// Business units as one-based cell lists.
    #[serde(default)]
    pub groups: Option<BTreeMap<String, Vec<usize>>>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_grid() -> Vec<f64> {
    PAPER_GRID.to_vec()
}
fn default_epsilon_rel() -> f64 {
    0.005
}
fn default_methods() -> Vec<Method> {
    vec![Method::Mc, Method::Smc, Method::IsAch]
}
fn default_n_mc() -> usize {
    1000
}
fn default_n_is() -> usize {
    1000
}
fn default_reps() -> usize {
    100
}
fn default_seed() -> u64 {
    42
}
fn default_draw_cap() -> u64 {
    DEFAULT_DRAW_CAP
}

/// A validated model ready to sample.
#[derive(Debug, Clone)]
pub struct Model {
    pub copula: CopulaModel,
    pub marginals: Vec<MarginalModel>,
    /// Group label per cell when business units are configured.
    pub grouping: Option<Vec<String>>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) { Self::from_json(&text)? } else { Self::from_toml(&text)? };
        Ok(cfg)
    }

    pub fn build_model(&self) -> Result<Model> {
        let copula = self.copula.build().map_err(as_config)?;
        let d = copula.dim();
        let marginals = match &self.marginals {
            Some(m) => m.clone(),
            None => case_study_marginals(d),
        };
        if marginals.len() != d {
            return Err(Error::Config(format!("{} marginals given for a {d}-dimensional copula", marginals.len())));
        }
        for m in &marginals {
            m.validate().map_err(as_config)?;
        }
        let grouping = match &self.groups {
            Some(g) => Some(grouping_from_cells(g, d).map_err(as_config)?),
            None => None,
        };
        Ok(Model { copula, marginals, grouping })
    }

    pub fn validate(&self) -> Result<Model> {
        let model = self.build_model()?;
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        if self.n_mc == 0 || self.n_is == 0 || self.n_repetitions == 0 || self.quantiles.n_per_run == 0 || self.quantiles.n_runs == 0 {
            return Err(Error::Config("sample sizes and repetition counts must be positive".into()));
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) || self.alphas.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("alphas must be strictly increasing inside (0, 1)".into()));
        }
        if self.targets.is_empty() {
            return Err(Error::Config("at least one target alpha is required".into()));
        }
        for t in &self.targets {
            if !self.alphas.iter().any(|a| (a - t).abs() <= ALPHA_MATCH_TOL) {
                return Err(Error::Config(format!("target alpha {t} is not on the alpha grid")));
            }
        }
        if !(self.epsilon_rel > 0.0 && self.epsilon_rel < 1.0) {
            return Err(Error::Config("epsilon_rel must lie in (0, 1)".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        self.smc.validate().map_err(as_config)?;
        Ok(model)
    }

    /// Targets in ascending order.
    pub fn sorted_targets(&self) -> Vec<f64> {
        let mut t = self.targets.clone();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn quantile_path(&self) -> PathBuf {
        self.quantiles.path.clone().unwrap_or_else(|| self.out_dir().join("quantiles.json"))
    }

    pub fn quantile_seed(&self) -> u64 {
        self.quantiles.seed.unwrap_or(self.seed)
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}
