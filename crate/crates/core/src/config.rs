//! Run configuration loaded from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::DqnConfig;
use crate::distill::DistillConfig;
use crate::env::EnvParams;
use crate::error::{Error, Result};
use crate::io::{read_file, sha256_hex};
use crate::metrics::{grid, MetricSpec, OutageUnit};
use crate::mitigation::MitigationPolicy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Evaluation length per scheme and replicate.
    pub steps: usize,
    /// Independent replicates of the whole pipeline.
    pub seeds: usize,
    pub thresholds_mbps: Vec<f64>,
    pub hist_min_mbps: f64,
    pub hist_max_mbps: f64,
    pub hist_bin_mbps: f64,
    pub outage_unit: OutageUnit,
    /// Route the distilled xApp through the rollback monitor as well.
    pub distilled_mitigation: bool,
    /// Also write the per-(step, user) rate log of every evaluation.
    pub write_rate_log: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            steps: 50_000,
            seeds: 5,
            thresholds_mbps: grid(5.0, 100.0, 5.0).expect("static grid"),
            hist_min_mbps: 0.0,
            hist_max_mbps: 100.0,
            hist_bin_mbps: 2.0,
            outage_unit: OutageUnit::UserStep,
            distilled_mitigation: false,
            write_rate_log: false,
        }
    }
}

impl EvalConfig {
    pub fn metric_spec(&self) -> Result<MetricSpec> {
        Ok(MetricSpec {
            thresholds_mbps: self.thresholds_mbps.clone(),
            hist_edges: grid(self.hist_min_mbps, self.hist_max_mbps, self.hist_bin_mbps)
                .map_err(|e| Error::Config(format!("eval histogram: {e}")))?,
            outage_unit: self.outage_unit,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.seeds == 0 {
            return Err(Error::Config("eval: steps and seeds must be positive".into()));
        }
        if self.thresholds_mbps.is_empty() || self.thresholds_mbps.iter().any(|t| !t.is_finite()) {
            return Err(Error::Config("eval: thresholds must be a non-empty list of numbers".into()));
        }
        if self.thresholds_mbps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("eval: thresholds must be strictly increasing".into()));
        }
        let edges = self.metric_spec()?.hist_edges;
        if edges.len() < 2 {
            return Err(Error::Config("eval: histogram range must span at least one bin".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub env: EnvParams,
    /// Stage-1 and team-learning hyperparameters.
    pub training: DqnConfig,
    pub distill: DistillConfig,
    pub mitigation: MitigationPolicy,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            master_seed: 2024,
            output_dir: PathBuf::from("runs/default"),
            env: EnvParams::default(),
            training: DqnConfig::default(),
            distill: DistillConfig::default(),
            mitigation: MitigationPolicy::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = read_file(path)?;
        let text = std::str::from_utf8(&bytes).map_err(|_| Error::Config(format!("{} is not utf-8", path.display())))?;
        Self::from_toml_str(text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.training.validate()?;
        self.distill.validate()?;
        self.mitigation.validate()?;
        self.eval.validate()
    }

    /// SHA-256 of the canonical JSON form, ignoring `output_dir` so that
    /// relocating a run does not change its identity.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let json = serde_json::to_vec(&c).expect("config serializes");
        sha256_hex(&json)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_toml_is_the_default() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn shipped_default_file_mirrors_builtin_defaults() {
        let text = include_str!("../../../configs/default.toml");
        assert_eq!(RunConfig::from_toml_str(text).unwrap(), RunConfig::default());
    }

    #[test]
    fn sections_override_fields() {
        let c = RunConfig::from_toml_str(
            "master_seed = 9\n[env]\nnum_users = 2\n[mitigation]\npriority = [\"xapp2\", \"xapp1\"]\ndelta = 0.1\n[eval]\noutage_unit = \"step\"\n",
        )
        .unwrap();
        assert_eq!(c.master_seed, 9);
        assert_eq!(c.env.num_users, 2);
        assert_eq!(c.mitigation.priority[0], "xapp2");
        assert_eq!(c.eval.outage_unit, OutageUnit::Step);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        for text in ["bogus = 1", "[env]\nnum_bs = 0", "[eval]\nthresholds_mbps = []", "[distill]\ntemperature = -1.0"] {
            assert!(matches!(RunConfig::from_toml_str(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.output_dir = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.master_seed += 1;
        assert_ne!(a.hash(), b.hash());
    }
}
