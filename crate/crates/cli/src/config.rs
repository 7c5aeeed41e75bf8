//! Run configuration file. Every section is optional; command-line flags
//! override file values, which override built-in defaults.
//!
//! ```toml
//! seed = 7
//!
//! [data]
//! seq_len = 200
//!
//! [train]
//! hidden = 64
//! lambda = 0.01
//!
//! [grid]
//! batch_sizes = [5, 10]
//! ```

use std::path::Path;

use csishield::eval::{DaeConfig, SvmSettings};
use csishield::ragan::grid::GridRanges;
use csishield::ragan::TrainConfig;
use csishield::sim::SimConfig;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub sim: Option<SimConfig>,
    #[serde(default)]
    pub data: DataOptions,
    #[serde(default)]
    pub train: Option<TrainConfig>,
    #[serde(default)]
    pub dae: Option<DaeConfig>,
    #[serde(default)]
    pub svm: Option<SvmSettings>,
    #[serde(default)]
    pub grid: Option<GridRanges>,
    #[serde(default)]
    pub plot: PlotOptions,
}

/// How paired data is cut before training and evaluation.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataOptions {
    /// Packets kept per acquisition; all of them when absent.
    pub seq_len: Option<usize>,
    /// Position within each (material, day) group held out for testing.
    pub test_slot: usize,
    pub validation_fraction: f64,
}

impl Default for DataOptions {
    fn default() -> Self {
        DataOptions { seq_len: None, test_slot: 2, validation_fraction: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlotOptions {
    pub width: u32,
    pub height: u32,
    pub title: Option<String>,
}

impl Default for PlotOptions {
    fn default() -> Self {
        PlotOptions { width: 900, height: 500, title: None }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
                Self::parse(&text)
            }
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(s) = &self.sim {
            s.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        }
        if let Some(t) = &self.train {
            t.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        }
        if self.data.seq_len == Some(0) {
            return Err(CliError::Usage("data.seq_len must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.data.validation_fraction) {
            return Err(CliError::Usage("data.validation_fraction must lie in [0, 1)".into()));
        }
        if self.plot.width < 100 || self.plot.height < 100 {
            return Err(CliError::Usage("plot width and height must be at least 100".into()));
        }
        Ok(())
    }

    pub fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.seed).unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_default() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn sections_parse() {
        let c = RunConfig::parse("seed = 3\n[data]\nseq_len = 50\n[train]\nlambda = 0.5\n").unwrap();
        assert_eq!(c.seed(None), 3);
        assert_eq!(c.seed(Some(9)), 9);
        assert_eq!(c.data.seq_len, Some(50));
        assert_eq!(c.train.unwrap().lambda, 0.5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::parse("sed = 1\n"), Err(CliError::Usage(_))));
        assert!(matches!(RunConfig::parse("[train]\nlamda = 1\n"), Err(CliError::Usage(_))));
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(RunConfig::parse("[train]\ndropout = 1.5\n").is_err());
        assert!(RunConfig::parse("[data]\nseq_len = 0\n").is_err());
    }
}
