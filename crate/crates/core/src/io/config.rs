//! TOML run configuration with `section.key=value` overrides.
//!
//! ```toml
//! [loss]
//! omega = 10.0
//! [seg_loss]
//! class_weights = [0.5, 1.2, 1.6, 1.8, 1.8, 0.3, 0.2]
//! [motion]
//! tau_motion = 0.1
//! rule = "majority"
//! [pdms]
//! ttc_threshold_s = 1.5
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{ClassWeightTable, LossWeights};
use crate::motion::MotionConfig;
use crate::planning::PdmsConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegLossConfig {
    pub class_weights: ClassWeightTable,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub loss: LossWeights,
    pub seg_loss: SegLossConfig,
    pub motion: MotionConfig,
    pub pdms: PdmsConfig,
}

fn parse_value(raw: &str) -> toml::Value {
    // anything that is not a TOML literal is taken as a bare string
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key v"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        self.motion.validate()?;
        self.pdms.validate()
    }

    /// Parses `text` (may be empty), applies `overrides` in order, validates.
    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        for ov in overrides {
            let (key, raw) = ov.split_once('=').ok_or_else(|| {
                Error::Config(format!("override `{ov}` is not section.key=value"))
            })?;
            let (section, field) = key
                .trim()
                .split_once('.')
                .ok_or_else(|| Error::Config(format!("override key `{key}` is not section.key")))?;
            let entry = table
                .entry(section.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let sec = entry
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("`{section}` is not a section")))?;
            sec.insert(field.to_string(), parse_value(raw.trim()));
        }
        let cfg: Config = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        Self::from_toml_with_overrides(&text, overrides)
    }
}
