//! Run configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::models::{model_by_name, Model};
use crate::param_space::ParameterSpace;
use crate::pce::PceConfig;
use crate::pipeline::{AdaptiveConfig, PipelineConfig};
use crate::screening::ScreeningConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub options: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    /// Defaults to the model's reference input distributions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<ParameterSpace>,
    #[serde(default)]
    pub screening: ScreeningConfig,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub pce: PceConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("rss-run")
}

/// A configuration with its model instantiated and checked.
pub struct Resolved {
    pub config: RunConfig,
    pub model: Box<dyn Model>,
    pub space: ParameterSpace,
}

impl RunConfig {
    pub fn adaptive(&self) -> AdaptiveConfig {
        AdaptiveConfig {
            screening: self.screening.clone(),
            pipeline: self.pipeline.clone(),
            pce: self.pce.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn resolve(self) -> Result<Resolved> {
        let model = model_by_name(&self.model.name, &self.model.options)?;
        let space = match &self.space {
            Some(s) => {
                if s.dimension() != model.dimension() {
                    return Err(Error::Config(format!(
                        "space has {} inputs but model `{}` takes {}",
                        s.dimension(),
                        self.model.name,
                        model.dimension()
                    )));
                }
                s.clone()
            }
            None => model.reference_space(),
        };
        self.adaptive().validate()?;
        Ok(Resolved {
            config: self,
            model,
            space,
        })
    }
}

/// Parse `text` after applying `key.path=value` overrides.
pub fn parse_config(text: &str, source: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut value: Value = serde_json::from_str(text)
        .map_err(|e| Error::Config(format!("{source}:{}:{}: {e}", e.line(), e.column())))?;
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    serde_path_to_error::deserialize(value)
        .map_err(|e| Error::Config(format!("{source}: field `{}`: {}", e.path(), e.inner())))
}

pub fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text, &path.display().to_string(), overrides)
}

/// Set a dotted key; the value is read as JSON, or as a string if that fails.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not of the form key=value")))?;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key `{key}` is malformed")));
    }
    let new = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = root;
    for (i, part) in parts.iter().enumerate() {
        let obj = match cur {
            Value::Object(m) => m,
            _ => {
                return Err(Error::Config(format!(
                    "override `{key}`: `{}` is not an object",
                    parts[..i].join(".")
                )))
            }
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), new);
            return Ok(());
        }
        cur = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("override key has at least one part")
}
