//! Experiment config files.
//!
//! ```toml
//! vehicle_path = "bundled:prius_prime"   # or a path relative to this file
//! train_cycle = "bundled:wltp_c3"
//! eval_cycles = ["bundled:udds", "bundled:hwfet", "cycles/custom.csv"]
//! episodes = 10
//! seed = 1
//! output_dir = "runs/prius"
//!
//! [training]          # optional
//! warmup_episodes = 1
//! updates_per_step = 1
//!
//! [reward]            # optional, defaults shown
//! alpha1 = 1.5
//! alpha2 = 10.0
//! alpha3 = 0.1
//! beta = 0.15
//! soc_ref = 0.65
//!
//! [agent]             # optional, any DdpgConfig field
//! mc_passes = 4
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bundled;
use crate::cycle::{load_cycle, DriveCycle};
use crate::env::RewardParams;
use crate::error::{Error, Result};
use crate::rl::DdpgConfig;
use crate::vehicle::{load_vehicle, VehicleParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingParams {
    /// Episodes rolled before the first gradient update.
    pub warmup_episodes: usize,
    pub updates_per_step: usize,
}

impl Default for TrainingParams {
    fn default() -> Self {
        TrainingParams {
            warmup_episodes: 1,
            updates_per_step: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub vehicle_path: String,
    pub train_cycle: String,
    #[serde(default)]
    pub eval_cycles: Vec<String>,
    pub episodes: usize,
    pub seed: u64,
    pub output_dir: String,
    #[serde(default)]
    pub training: TrainingParams,
    #[serde(default)]
    pub reward: RewardParams,
    #[serde(default)]
    pub agent: DdpgConfig,
}

/// A config with every referenced file loaded.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub vehicle: VehicleParams,
    pub train_cycle: DriveCycle,
    pub eval_cycles: Vec<DriveCycle>,
    pub output_dir: PathBuf,
}

/// Loads `spec` as a bundled cycle (`bundled:name`) or a CSV path resolved
/// against `base`.
pub fn resolve_cycle(spec: &str, base: &Path) -> Result<DriveCycle> {
    match spec.strip_prefix(bundled::PREFIX) {
        Some(name) => bundled::cycle(name),
        None => load_cycle(base.join(spec)),
    }
}

pub fn resolve_vehicle(spec: &str, base: &Path) -> Result<VehicleParams> {
    match spec.strip_prefix(bundled::PREFIX) {
        Some(name) => bundled::vehicle(name),
        None => load_vehicle(base.join(spec)),
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let field = msg.split('`').nth(1).filter(|_| msg.contains("field")).unwrap_or("<config>").to_string();
            Error::Schema { field, msg }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes < 1 {
            return Err(Error::Validation("episodes must be >= 1".into()));
        }
        if self.training.updates_per_step < 1 {
            return Err(Error::Validation("training.updates_per_step must be >= 1".into()));
        }
        self.reward.validate()?;
        self.agent.validate()
    }

    /// Loads the vehicle and every cycle, resolving relative paths against
    /// `base` (normally the directory holding the config file).
    pub fn resolve(self, base: &Path) -> Result<Experiment> {
        let vehicle = resolve_vehicle(&self.vehicle_path, base)?;
        let train_cycle = resolve_cycle(&self.train_cycle, base)?;
        let eval_cycles = self.eval_cycles.iter().map(|c| resolve_cycle(c, base)).collect::<Result<Vec<_>>>()?;
        let output_dir = base.join(&self.output_dir);
        Ok(Experiment {
            config: self,
            vehicle,
            train_cycle,
            eval_cycles,
            output_dir,
        })
    }
}

/// Reads, validates and resolves a config file. `seed` overrides the file's
/// seed.
pub fn load_experiment(path: impl AsRef<Path>, seed: Option<u64>) -> Result<Experiment> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = ExperimentConfig::from_toml_str(&text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let base = path.parent().unwrap_or(Path::new("."));
    cfg.resolve(base)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
vehicle_path = "bundled:chevy_volt"
train_cycle = "bundled:udds"
eval_cycles = ["bundled:hwfet"]
episodes = 2
seed = 4
output_dir = "out"
"#;

    #[test]
    fn defaults_fill_optional_sections() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.reward, RewardParams::default());
        assert_eq!(cfg.agent, DdpgConfig::default());
        assert_eq!(cfg.training.warmup_episodes, 1);
        let exp = cfg.resolve(Path::new("/tmp")).unwrap();
        assert_eq!(exp.train_cycle.name(), "udds");
        assert_eq!(exp.output_dir, Path::new("/tmp/out"));
    }

    #[test]
    fn overrides_and_errors() {
        let text = format!("{MINIMAL}\n[agent]\nmc_passes = 8\n[reward]\nalpha2 = 20.0\n");
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg.agent.mc_passes, 8);
        assert_eq!(cfg.reward.alpha2, 20.0);

        let bad = MINIMAL.replace("episodes = 2", "episodes = 0");
        assert!(matches!(ExperimentConfig::from_toml_str(&bad), Err(Error::Validation(_))));
        let missing = MINIMAL.replace("seed = 4\n", "");
        match ExperimentConfig::from_toml_str(&missing) {
            Err(Error::Schema { field, .. }) => assert_eq!(field, "seed"),
            other => panic!("{other:?}"),
        }
        let unknown = format!("{MINIMAL}\n[agent]\nlearning_rate = 1.0\n");
        assert!(matches!(ExperimentConfig::from_toml_str(&unknown), Err(Error::Schema { .. })));
        let cfg = ExperimentConfig::from_toml_str(&MINIMAL.replace("bundled:udds", "bundled:nope")).unwrap();
        assert!(matches!(cfg.resolve(Path::new(".")), Err(Error::Lookup(_))));
    }
}
