use crate::error::BenchError;
use gridpinn_core::estimator::{FitSettings, HyperParams};
use gridpinn_core::hpo::{HpoConfig, ParamRanges, RankBy, TpeSettings};
use gridpinn_core::pinn::LossWeights;
use gridpinn_core::scenario::{builtin_scenario, SampleCounts, ScenarioSpec};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HpoSettings {
    pub step: f64,
    pub trials: usize,
    #[serde(default)]
    pub ranges: ParamRanges,
    #[serde(default)]
    pub rank_by: RankBy,
    #[serde(default)]
    pub tpe: TpeSettings,
}

/// Skips the search: one PINN run with `weights` and one baseline run, both
/// with `params`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedRun {
    pub weights: LossWeights,
    pub params: HyperParams,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_reps() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Catalogued scenario index such as `S1.1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    /// Scenario spec file (TOML), used when `scenario` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec_file: Option<PathBuf>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<SampleCounts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hpo: Option<HpoSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed: Option<FixedRun>,
    #[serde(default)]
    pub fit: FitSettings,
    #[serde(default = "default_reps")]
    pub inference_reps: usize,
}

impl ExperimentConfig {
    pub fn for_scenario(index: &str) -> Self {
        Self {
            scenario: Some(index.to_string()),
            spec_file: None,
            seeds: default_seeds(),
            output_dir: default_output(),
            samples: None,
            hpo: None,
            fixed: None,
            fit: FitSettings::default(),
            inference_reps: default_reps(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        toml::from_str(text).map_err(BenchError::config)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Scenario spec with the sample overrides applied and seed `seed`.
    pub fn spec_for_seed(&self, seed: u64) -> Result<ScenarioSpec, BenchError> {
        let mut spec = match (&self.scenario, &self.spec_file) {
            (Some(idx), _) => builtin_scenario(idx).map_err(BenchError::config)?,
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| BenchError::config(format!("{}: {e}", path.display())))?;
                ScenarioSpec::from_toml(&text).map_err(BenchError::config)?
            }
            (None, None) => return Err(BenchError::config("config names neither a scenario nor a spec file")),
        };
        if let Some(s) = self.samples {
            spec.samples = s;
        }
        spec.seed = seed;
        Ok(spec)
    }

    pub fn hpo_config(&self, seed: u64) -> Option<HpoConfig> {
        self.hpo.as_ref().map(|h| HpoConfig {
            step: h.step,
            trials_per_combo: h.trials,
            ranges: h.ranges,
            tpe: h.tpe,
            rank_by: h.rank_by,
            seed,
        })
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.seeds.is_empty() {
            return Err(BenchError::config("at least one seed is required"));
        }
        match (&self.hpo, &self.fixed) {
            (Some(_), Some(_)) => return Err(BenchError::config("choose either [hpo] or [fixed], not both")),
            (None, None) => return Err(BenchError::config("config needs an [hpo] or a [fixed] section")),
            (Some(h), None) => {
                h.ranges.validate().map_err(BenchError::config)?;
                if h.trials == 0 {
                    return Err(BenchError::config("hpo.trials must be at least 1"));
                }
                gridpinn_core::hpo::enumerate_weights(h.step).map_err(BenchError::config)?;
            }
            (None, Some(f)) => {
                f.weights.validate().map_err(BenchError::config)?;
                if f.weights.is_data_only() {
                    return Err(BenchError::config("fixed PINN weights must differ from (1, 0, 0)"));
                }
            }
        }
        if self.inference_reps == 0 {
            return Err(BenchError::config("inference_reps must be positive"));
        }
        if let Some(path) = &self.spec_file {
            if self.scenario.is_none() && !path.exists() {
                return Err(BenchError::config(format!("spec file {} does not exist", path.display())));
            }
        }
        self.spec_for_seed(self.seeds[0])?;
        Ok(())
    }
}
