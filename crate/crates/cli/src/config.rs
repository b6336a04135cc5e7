//! Run configuration: one JSON file, every field optional.
//!
//! ```json
//! {
//!   "seed": 7,
//!   "jobs": 4,
//!   "horizon": 14,
//!   "featurize": { "x5_include_replies": true },
//!   "rlr": { "n_trials": 200, "subsample_fraction": 0.75, "lambda": { "scaled_max": 0.1 },
//!            "alpha": 0.5, "threshold": 0.25, "tol": 1e-7, "max_iter": 20000 },
//!   "synth": { "num_learners": 500, "num_weeks": 15,
//!              "planted_effects": [{ "feature": "x210", "direction": "protective", "strength": 2.0 }] }
//! }
//! ```
//!
//! Precedence is flags, then file, then defaults. A top-level `seed` replaces
//! the seeds of the `rlr` and `synth` sections.

use std::path::Path;

use serde::{Deserialize, Serialize};
use stopout_core::dataset::DEFAULT_HORIZON;
use stopout_core::featurize::FeaturizeConfig;
use stopout_core::stability::RlrConfig;
use stopout_core::synthgen::GeneratorConfig;

use crate::UsageError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub horizon: u32,
    pub featurize: FeaturizeConfig,
    pub rlr: RlrConfig,
    pub synth: GeneratorConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            jobs: None,
            horizon: DEFAULT_HORIZON,
            featurize: FeaturizeConfig::default(),
            rlr: RlrConfig::default(),
            synth: GeneratorConfig::default(),
        }
    }
}

pub fn resolve(
    file: Option<&Path>,
    seed: Option<u64>,
    jobs: Option<usize>,
) -> anyhow::Result<RunConfig> {
    let mut cfg = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| UsageError(format!("config {}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if seed.is_some() {
        cfg.seed = seed;
    }
    if jobs.is_some() {
        cfg.jobs = jobs;
    }
    if let Some(s) = cfg.seed {
        cfg.rlr.seed = s;
        cfg.synth.seed = s;
    }
    if cfg.jobs == Some(0) {
        return Err(UsageError("--jobs must be at least 1".into()).into());
    }
    Ok(cfg)
}
