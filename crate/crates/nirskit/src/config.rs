//! Pipeline configuration files (YAML or JSON).

use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// One name or a list of names.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(from = "NamesRepr")]
pub struct Names(pub Vec<String>);

#[derive(Deserialize)]
#[serde(untagged)]
enum NamesRepr {
    One(String),
    Many(Vec<String>),
}

impl From<NamesRepr> for Names {
    fn from(r: NamesRepr) -> Self {
        match r {
            NamesRepr::One(s) => Names(vec![s]),
            NamesRepr::Many(v) => Names(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepConfig {
    pub op: String,
    #[serde(default)]
    pub params: Map<String, Value>,
    #[serde(rename = "in", default)]
    pub inputs: Names,
    #[serde(default)]
    pub out: Names,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub steps: Vec<StepConfig>,
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let trimmed = text.trim_start();
        if trimmed.starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
        } else if trimmed.is_empty() {
            Ok(PipelineConfig { input: None, output: None, seed: 0, steps: Vec::new() })
        } else {
            serde_yaml::from_str(text).map_err(|e| Error::Config(e.to_string()))
        }
    }

    /// Relative `input`/`output` paths resolve against the config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.input, &mut cfg.output].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn yaml_and_json_agree() {
        let y = "seed: 3\nsteps:\n  - op: int2od\n    in: amp\n    out: od\n  - op: freq_filter\n    params: {fmin: 0.01 Hz, fmax: 0.5}\n    in: [od]\n    out: [od_f]\n";
        let j = r#"{"seed": 3, "steps": [{"op": "int2od", "in": "amp", "out": "od"},
                   {"op": "freq_filter", "params": {"fmin": "0.01 Hz", "fmax": 0.5}, "in": ["od"], "out": ["od_f"]}]}"#;
        let a = PipelineConfig::parse(y).unwrap();
        assert_eq!(a, PipelineConfig::parse(j).unwrap());
        assert_eq!(a.steps[0].inputs, Names(vec!["amp".into()]));
        assert_eq!(a.steps[1].params["fmin"], Value::String("0.01 Hz".into()));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(PipelineConfig::parse("stepz: []\n"), Err(Error::Config(_))));
        assert!(PipelineConfig::parse("").unwrap().steps.is_empty());
    }
}
