//! TOML run configuration. Every section mirrors a module config; command
//! flags override file values.

use std::path::Path;

use serde::{Deserialize, Serialize};
use spanprobe_core::guard::MonitorConfig;
use spanprobe_core::probe::TrainConfig;
use spanprobe_core::refmodel::ModelConfig;

use crate::error::{Error, Result};
use crate::fsio;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InjectSection {
    pub rate: f64,
    pub flip_rate: f64,
}

impl Default for InjectSection {
    fn default() -> Self {
        InjectSection { rate: 1.0 / 40.0, flip_rate: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    pub k: usize,
    pub temperature: f64,
}

impl Default for BaselineSection {
    fn default() -> Self {
        BaselineSection { k: spanprobe_core::baselines::DEFAULT_K, temperature: 1.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Global seed; every named random stream derives from it.
    pub seed: Option<u64>,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub monitor: MonitorConfig,
    pub inject: InjectSection,
    pub baselines: BaselineSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Usage(format!("config: {e}")))
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut cfg = match path {
            None => RunConfig::default(),
            Some(p) => Self::parse(&fsio::read_string(p)?).map_err(|e| match e {
                Error::Usage(m) => Error::Usage(format!("{}: {m}", p.display())),
                other => other,
            })?,
        };
        if let Some(s) = cfg.seed {
            cfg.apply_seed(s);
        }
        Ok(cfg)
    }

    pub fn apply_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.model.seed = seed;
        self.train.seed = seed;
        self.monitor.seed = seed;
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use spanprobe_core::probe::{OptimizerKind, Regularizer};

    #[test]
    fn sections_parse_and_seed_propagates() {
        let text = r#"
seed = 9
[model]
d_model = 32
n_heads = 2
[train]
steps = 12
regularizer = "kl"
lambda_reg = 0.5
optimizer = { kind = "adam", beta1 = 0.9, beta2 = 0.999, eps = 1e-8 }
[train.lora]
rank = 4
[monitor]
threshold = 0.7
"#;
        let mut cfg = RunConfig::parse(text).unwrap();
        cfg.apply_seed(cfg.seed.unwrap());
        assert_eq!(cfg.model.d_model, 32);
        assert_eq!(cfg.model.seed, 9);
        assert_eq!(cfg.train.steps, 12);
        assert_eq!(cfg.train.regularizer, Regularizer::Kl);
        assert!(matches!(cfg.train.optimizer, OptimizerKind::Adam { .. }));
        assert_eq!(cfg.train.lora.as_ref().unwrap().rank, 4);
        assert_eq!(cfg.train.lora.as_ref().unwrap().alpha, 16.0);
        assert_eq!(cfg.monitor.threshold, 0.7);
        assert!(RunConfig::parse("bogus = 1").is_err());
    }
}
