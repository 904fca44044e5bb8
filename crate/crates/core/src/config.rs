//! Run configuration. Command-line flags override the JSON config file,
//! which overrides the defaults.

use std::path::Path;
use std::str::FromStr;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::curves::{SurfaceParams, DEFAULT_MIN_COHORT};
use crate::error::{Error, Result};
use crate::ingest::{IngestConfig, DEFAULT_DOLLAR_AGE_TOLERANCE};
use crate::market::DEFAULT_MIN_BID_ASK_RATIO;
use crate::model::{validate_levels, DEFAULT_LEVELS, DEFAULT_MAX_DURATION, DEFAULT_RATE};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub rate: f64,
    pub percentile_levels: Vec<f64>,
    pub dollar_age_tolerance: f64,
    pub zero_floor: Decimal,
    pub min_cohort: usize,
    pub max_duration: u32,
    pub min_bid_ask_ratio: f64,
    pub output_format: OutputFormat,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            rate: DEFAULT_RATE,
            percentile_levels: DEFAULT_LEVELS.to_vec(),
            dollar_age_tolerance: DEFAULT_DOLLAR_AGE_TOLERANCE,
            zero_floor: Decimal::ZERO,
            min_cohort: DEFAULT_MIN_COHORT,
            max_duration: DEFAULT_MAX_DURATION,
            min_bid_ask_ratio: DEFAULT_MIN_BID_ASK_RATIO,
            output_format: OutputFormat::Csv,
        }
    }
}

/// Partial configuration: the config file's contents, or the flags given on
/// the command line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub rate: Option<f64>,
    pub percentile_levels: Option<Vec<f64>>,
    pub dollar_age_tolerance: Option<f64>,
    pub zero_floor: Option<f64>,
    pub min_cohort: Option<usize>,
    pub max_duration: Option<u32>,
    pub min_bid_ask_ratio: Option<f64>,
    pub output_format: Option<OutputFormat>,
}

impl ConfigLayer {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
        Self::from_json(&text).map_err(|e| e.in_file(path))
    }

    fn apply(&self, cfg: &mut Config) -> Result<()> {
        if let Some(v) = self.rate {
            cfg.rate = v;
        }
        if let Some(v) = &self.percentile_levels {
            cfg.percentile_levels = v.clone();
        }
        if let Some(v) = self.dollar_age_tolerance {
            cfg.dollar_age_tolerance = v;
        }
        if let Some(v) = self.zero_floor {
            cfg.zero_floor = Decimal::from_str(&v.to_string())
                .map_err(|_| Error::Config(format!("zero_floor {v} is not a decimal amount")))?;
        }
        if let Some(v) = self.min_cohort {
            cfg.min_cohort = v;
        }
        if let Some(v) = self.max_duration {
            cfg.max_duration = v;
        }
        if let Some(v) = self.min_bid_ask_ratio {
            cfg.min_bid_ask_ratio = v;
        }
        if let Some(v) = self.output_format {
            cfg.output_format = v;
        }
        Ok(())
    }
}

impl Config {
    /// Defaults, then the file layer, then the flag layer.
    pub fn resolve(file: Option<&ConfigLayer>, flags: &ConfigLayer) -> Result<Self> {
        let mut cfg = Config::default();
        if let Some(file) = file {
            file.apply(&mut cfg)?;
        }
        flags.apply(&mut cfg)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.rate.is_finite() && self.rate >= 0.0) {
            return bad(format!("rate must be non-negative, got {}", self.rate));
        }
        validate_levels(&self.percentile_levels).map_err(|e| Error::Config(e.to_string()))?;
        if !(self.dollar_age_tolerance.is_finite() && self.dollar_age_tolerance >= 0.0) {
            return bad(format!(
                "dollar_age_tolerance must be non-negative, got {}",
                self.dollar_age_tolerance
            ));
        }
        if self.zero_floor < Decimal::ZERO {
            return bad(format!("zero_floor must be non-negative, got {}", self.zero_floor));
        }
        if self.min_cohort < 1 {
            return bad("min_cohort must be at least 1".into());
        }
        if self.max_duration < 1 {
            return bad("max_duration must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.min_bid_ask_ratio) {
            return bad(format!(
                "min_bid_ask_ratio must be in [0, 1], got {}",
                self.min_bid_ask_ratio
            ));
        }
        Ok(())
    }

    pub fn ingest(&self) -> IngestConfig {
        IngestConfig {
            dollar_age_tolerance: self.dollar_age_tolerance,
            zero_floor: self.zero_floor,
        }
    }

    pub fn surface_params(&self) -> SurfaceParams {
        SurfaceParams {
            levels: self.percentile_levels.clone(),
            max_horizon: self.max_duration,
            min_cohort: self.min_cohort,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = Config::resolve(None, &ConfigLayer::default()).unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.rate, 0.10);
        assert_eq!(c.percentile_levels, vec![10.0, 50.0, 90.0]);
        assert_eq!(c.dollar_age_tolerance, 0.30);
        assert_eq!(c.zero_floor, Decimal::ZERO);
        assert_eq!(c.min_cohort, 5);
        assert_eq!(c.max_duration, 10);
        assert_eq!(c.min_bid_ask_ratio, 0.5);
        assert_eq!(c.output_format, OutputFormat::Csv);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ConfigLayer::from_json(r#"{"rte": 0.2}"#).is_err());
        let layer = ConfigLayer::from_json(r#"{"rate": 0.2, "output_format": "json"}"#).unwrap();
        assert_eq!(layer.rate, Some(0.2));
        assert_eq!(layer.output_format, Some(OutputFormat::Json));
    }

    #[test]
    fn invalid_values_are_rejected() {
        for layer in [
            ConfigLayer { rate: Some(-0.1), ..Default::default() },
            ConfigLayer { percentile_levels: Some(vec![90.0, 10.0]), ..Default::default() },
            ConfigLayer { min_cohort: Some(0), ..Default::default() },
            ConfigLayer { min_bid_ask_ratio: Some(1.5), ..Default::default() },
            ConfigLayer { zero_floor: Some(-1.0), ..Default::default() },
        ] {
            assert!(Config::resolve(None, &layer).is_err(), "{layer:?}");
        }
    }

    #[test]
    fn zero_floor_is_exact_decimal() {
        let layer = ConfigLayer { zero_floor: Some(0.01), ..Default::default() };
        let c = Config::resolve(None, &layer).unwrap();
        assert_eq!(c.zero_floor, Decimal::new(1, 2));
    }
}
