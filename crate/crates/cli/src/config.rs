//! Settings shared by all commands. A TOML file supplies defaults and
//! command-line flags override it field by field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use hevf_core::ckks::{validate_params, ParameterSet, Preset};
use hevf_core::score::ScoreCircuitPlan;

use crate::CliError;

pub const DEFAULT_DIM: usize = 200;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Explicit chain as `degree:bits,bits,...`, e.g. `8192:41,34,34,34,34,41`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub store: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_matrix: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Param(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Fields set in `other` replace those in `self`.
    pub fn merge(self, other: Config) -> Config {
        Config {
            preset: other.preset.or(self.preset),
            chain: other.chain.or(self.chain),
            dim: other.dim.or(self.dim),
            iterations: other.iterations.or(self.iterations),
            x0: other.x0.or(self.x0),
            theta: other.theta.or(self.theta),
            store: other.store.or(self.store),
            q_matrix: other.q_matrix.or(self.q_matrix),
            corpus: other.corpus.or(self.corpus),
            seed: other.seed.or(self.seed),
        }
    }

    fn preset(&self) -> Result<Option<Preset>, CliError> {
        self.preset
            .as_deref()
            .map(|p| p.parse::<Preset>().map_err(|e| CliError::Param(e.to_string())))
            .transpose()
    }

    /// Parameter set from the chain if given, else the preset (Set I by default).
    pub fn params(&self) -> Result<ParameterSet, CliError> {
        if self.chain.is_some() && self.preset.is_some() {
            return Err(CliError::Param("give either a preset or a chain, not both".into()));
        }
        let params = match &self.chain {
            Some(spec) => parse_chain_spec(spec)?,
            None => self.preset()?.unwrap_or(Preset::SetI).params(),
        };
        validate_params(params).map_err(CliError::from)
    }

    /// Newton iterations: explicit, else what the preset is sized for.
    pub fn iterations(&self) -> Result<usize, CliError> {
        let it = match (self.iterations, self.preset()?) {
            (Some(it), _) => it,
            (None, Some(p)) => p.iterations(),
            (None, None) => 1,
        };
        ScoreCircuitPlan::new(it)?;
        Ok(it)
    }

    /// Parameters together with an iteration count they can carry.
    pub fn checked_plan(&self) -> Result<(ParameterSet, usize), CliError> {
        let params = self.params()?;
        let it = self.iterations()?;
        ScoreCircuitPlan::new(it)?.check_params(&params)?;
        Ok((params, it))
    }

    pub fn dim(&self) -> usize {
        self.dim.unwrap_or(DEFAULT_DIM)
    }

    pub fn x0(&self) -> f64 {
        self.x0.unwrap_or(hevf_core::score::NewtonConfig::DEFAULT_X0)
    }

    /// `HEVF_STORE` wins over the flag and the file.
    pub fn store(&self) -> Result<PathBuf, CliError> {
        if let Some(env) = std::env::var_os("HEVF_STORE").filter(|v| !v.is_empty()) {
            return Ok(PathBuf::from(env));
        }
        self.store.clone().ok_or_else(|| CliError::Param("no store directory (use --store or HEVF_STORE)".into()))
    }
}

/// `degree:bits,bits,...`. The scale is taken from the first middle prime,
/// or the base prime for a chain without levels.
pub fn parse_chain_spec(spec: &str) -> Result<ParameterSet, CliError> {
    let (degree, bits) = spec
        .split_once(':')
        .ok_or_else(|| CliError::Param(format!("chain '{spec}' should look like 8192:41,34,34,34,34,41")))?;
    let degree = degree
        .trim()
        .parse::<usize>()
        .map_err(|_| CliError::Param(format!("invalid ring degree '{degree}'")))?;
    let chain = ParameterSet::parse_chain(bits)?;
    let delta = if chain.len() > 2 { chain[1] } else { chain.first().copied().unwrap_or(0) };
    Ok(ParameterSet::custom(degree, chain, delta, 128))
}
