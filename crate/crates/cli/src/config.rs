use std::path::{Path, PathBuf};

use clap::Args;
use rfdl_core::data::CorruptionMode;
use rfdl_core::{HyperParams, Method};
use serde::{Deserialize, Serialize};

/// A configuration problem; maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// Solver settings left unset fall back to the method defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dict_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factor_rank: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub floor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    /// Training samples per class; `None` trains on everything.
    #[serde(default)]
    pub train_per_class: Option<usize>,
    #[serde(default = "one")]
    pub n_splits: usize,
    /// Split `i` is drawn with seed `seed + i`.
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_per_class: None, n_splits: 1, seed: 0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub dict_sizes: Vec<usize>,
    #[serde(default)]
    pub corruption: Vec<f64>,
    #[serde(default)]
    pub occlusion: Vec<usize>,
    #[serde(default)]
    pub corruption_mode: CorruptionMode,
}

fn default_method() -> Method {
    Method::Djrfdl
}

fn default_posthoc_beta() -> f64 {
    rfdl_core::classify::POSTHOC_BETA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Dataset manifest; relative paths resolve against the config file.
    pub dataset: PathBuf,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default)]
    pub params: ParamOverrides,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    /// Keep this share of the variance with PCA fitted on each training set.
    #[serde(default)]
    pub pca_energy: Option<f64>,
    /// `β` of the classifier fitted on J-RFDL and CF embeddings.
    #[serde(default = "default_posthoc_beta")]
    pub posthoc_beta: f64,
}

impl ExperimentConfig {
    pub fn new(dataset: PathBuf) -> Self {
        Self {
            dataset,
            method: default_method(),
            params: ParamOverrides::default(),
            split: SplitSpec::default(),
            sweep: SweepSpec::default(),
            pca_energy: None,
            posthoc_beta: default_posthoc_beta(),
        }
    }

    /// Reads a config file, or the `config` record inside a metadata file
    /// written by an earlier run.
    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
        let mut value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        if let Some(inner) = value.get_mut("config") {
            value = inner.take();
        }
        let mut cfg: Self =
            serde_json::from_value(value).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        if cfg.dataset.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            cfg.dataset = base.join(&cfg.dataset);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.split.n_splits == 0 {
            return Err(config_error("split.n_splits must be >= 1"));
        }
        if self.split.train_per_class == Some(0) {
            return Err(config_error("split.train_per_class must be >= 1"));
        }
        if let Some(e) = self.pca_energy {
            if !(e > 0.0 && e <= 1.0) {
                return Err(config_error(format!("pca_energy must be in (0, 1], got {e}")));
            }
        }
        if !(self.posthoc_beta > 0.0 && self.posthoc_beta.is_finite()) {
            return Err(config_error(format!("posthoc_beta must be > 0, got {}", self.posthoc_beta)));
        }
        if let Some(f) = self.sweep.corruption.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return Err(config_error(format!("corruption fraction {f} outside [0, 1]")));
        }
        if self.sweep.dict_sizes.contains(&0) {
            return Err(config_error("dictionary sizes must be >= 1"));
        }
        Ok(())
    }

    /// Method defaults, then the overrides, then the run-specific sizes.
    pub fn resolve(&self, dict_size: usize, factor_rank: usize, seed: u64) -> anyhow::Result<HyperParams> {
        let o = &self.params;
        let base = match self.method {
            Method::Djrfdl => HyperParams::djrfdl(dict_size, factor_rank),
            Method::Jrfdl | Method::CfBaseline => HyperParams::jrfdl(dict_size, factor_rank),
        };
        let params = HyperParams {
            alpha: o.alpha.unwrap_or(base.alpha),
            beta: o.beta.unwrap_or(base.beta),
            gamma: o.gamma.unwrap_or(base.gamma),
            mu0: o.mu0.unwrap_or(base.mu0),
            mu_max: o.mu_max.unwrap_or(base.mu_max),
            eta: o.eta.unwrap_or(base.eta),
            eps: o.eps.unwrap_or(base.eps),
            tau: o.tau.unwrap_or(base.tau),
            floor: o.floor.unwrap_or(base.floor),
            max_iter: o.max_iter.unwrap_or(base.max_iter),
            seed,
            ..base
        };
        params.validate().map_err(|e| config_error(e.to_string()))?;
        Ok(params)
    }
}

/// Command-line overrides shared by `train` and `bench`.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Experiment config (JSON); a metadata.json from an earlier run also works.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset manifest; replaces the config's dataset.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub dict_size: Option<usize>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub train_per_class: Option<usize>,
    #[arg(long)]
    pub n_splits: Option<usize>,
    #[arg(long)]
    pub split_seed: Option<u64>,
}

impl Overrides {
    pub fn build(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.data) {
            (Some(path), _) => ExperimentConfig::read(path)?,
            (None, Some(data)) => ExperimentConfig::new(data.clone()),
            (None, None) => return Err(config_error("either --config or --data is required")),
        };
        if let Some(data) = &self.data {
            cfg.dataset = data.clone();
        }
        if let Some(m) = self.method {
            cfg.method = m;
        }
        let p = &mut cfg.params;
        macro_rules! apply {
            ($($field:ident <- $flag:ident),*) => {
                $(if self.$flag.is_some() { p.$field = self.$flag; })*
            };
        }
        apply!(seed <- seed, alpha <- alpha, beta <- beta, gamma <- gamma, dict_size <- dict_size,
            factor_rank <- rank, max_iter <- max_iter, eps <- eps);
        if self.train_per_class.is_some() {
            cfg.split.train_per_class = self.train_per_class;
        }
        if let Some(n) = self.n_splits {
            cfg.split.n_splits = n;
        }
        if let Some(s) = self.split_seed {
            cfg.split.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"dataset": "d.json"}"#).unwrap();
        assert_eq!(cfg.method, Method::Djrfdl);
        assert_eq!(cfg.split.n_splits, 1);
        assert_eq!(cfg.posthoc_beta, 1e-6);
        let p = cfg.resolve(10, 2, 0).unwrap();
        assert_eq!((p.alpha, p.beta, p.gamma), (1e-2, 1e-1, 1e-3));
    }

    #[test]
    fn jrfdl_defaults_and_overrides() {
        let mut cfg = ExperimentConfig::new("d.json".into());
        cfg.method = Method::Jrfdl;
        let p = cfg.resolve(10, 2, 3).unwrap();
        assert_eq!((p.alpha, p.gamma, p.seed), (1.0, 1e-5, 3));
        cfg.params.gamma = Some(0.5);
        assert_eq!(cfg.resolve(10, 2, 0).unwrap().gamma, 0.5);
        cfg.params.eta = Some(0.5);
        assert!(cfg.resolve(10, 2, 0).unwrap_err().downcast_ref::<ConfigError>().is_some());
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"dataset": "d", "alpha": 1}"#).is_err());
        let mut cfg = ExperimentConfig::new("d".into());
        cfg.split.n_splits = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::new("d".into());
        cfg.sweep.corruption = vec![0.2, 1.5];
        assert!(cfg.validate().is_err());
    }
}
