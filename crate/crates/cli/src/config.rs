use std::path::Path;

use anyhow::{bail, Context};
use articulate::dataset::{
    MixSpec, DEFAULT_NOISES_PER_CLEAN, DEFAULT_SNR_GRID, DEFAULT_TEST_FRACTION,
};
use articulate::features::FeaturePipeline;
use articulate::losses::{DEFAULT_ALPHA, DEFAULT_EPS, DEFAULT_LAMBDA, DEFAULT_TAU};
use articulate::metrics::EvalConfig;
use serde::{Deserialize, Serialize};

/// Everything a run depends on besides its input files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub features: FeaturePipeline,
    pub losses: LossConfig,
    pub dataset: DatasetConfig,
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub tau: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub grad_eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub snr_grid: Vec<f64>,
    pub noises_per_clean: usize,
    pub test_fraction: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            features: FeaturePipeline::default(),
            losses: LossConfig::default(),
            dataset: DatasetConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            lambda: DEFAULT_LAMBDA,
            alpha: DEFAULT_ALPHA,
            grad_eps: DEFAULT_EPS,
        }
    }
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            snr_grid: DEFAULT_SNR_GRID.to_vec(),
            noises_per_clean: DEFAULT_NOISES_PER_CLEAN,
            test_fraction: DEFAULT_TEST_FRACTION,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()
            .with_context(|| format!("invalid config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.features.validate()?;
        self.eval.stft.validate()?;
        self.mix_spec().validate()?;
        let l = &self.losses;
        if !(l.tau > 0.0 && l.tau.is_finite()) {
            bail!("losses.tau must be positive, got {}", l.tau);
        }
        for (name, w) in [("lambda", l.lambda), ("alpha", l.alpha)] {
            if !(0.0..=1.0).contains(&w) {
                bail!("losses.{name} must lie in [0, 1], got {w}");
            }
        }
        if !(l.grad_eps > 0.0) {
            bail!("losses.grad_eps must be positive, got {}", l.grad_eps);
        }
        let d = &self.dataset;
        if d.noises_per_clean == 0 {
            bail!("dataset.noises_per_clean must be at least 1");
        }
        if !(d.test_fraction > 0.0 && d.test_fraction < 1.0) {
            bail!("dataset.test_fraction must lie in (0, 1), got {}", d.test_fraction);
        }
        Ok(())
    }

    pub fn mix_spec(&self) -> MixSpec {
        MixSpec {
            snr_grid: self.dataset.snr_grid.clone(),
            seed: self.seed,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    /// Records the resolved configuration next to a run's outputs.
    pub fn write_beside(&self, dir: &Path) -> anyhow::Result<()> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("config.toml");
        std::fs::write(&path, self.to_toml())
            .with_context(|| format!("writing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        let back: PipelineConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg: PipelineConfig = toml::from_str("seed = 9\n[losses]\ntau = 0.1\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.losses.tau, 0.1);
        assert_eq!(cfg.losses.lambda, DEFAULT_LAMBDA);
        assert_eq!(cfg.features, FeaturePipeline::default());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(toml::from_str::<PipelineConfig>("sede = 1\n").is_err());
        let mut cfg = PipelineConfig::default();
        cfg.losses.alpha = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = PipelineConfig::default();
        cfg.dataset.snr_grid.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = PipelineConfig::default();
        cfg.features.tones.n_tones = 40;
        assert!(cfg.validate().is_err());
    }
}
