use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::graph::TaskParams;

/// Parameter file shared by every subcommand. All keys are optional.
///
/// ```toml
/// dim = 512
/// prompt_bank = "bank.json"
///
/// [association]
/// match_radius = 0.25
///
/// [dbscan]
/// eps = 0.5
///
/// [places]
/// resolution = 0.5
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Relative paths resolve against the config file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_bank: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub association: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dbscan: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub places: Option<Value>,
}

impl CliConfig {
    /// TOML first; a document that fails as TOML but parses as JSON is accepted too.
    pub fn parse(text: &str, context: &str) -> Result<Self> {
        match toml::from_str::<CliConfig>(text) {
            Ok(c) => Ok(c),
            Err(toml_err) => match serde_json::from_str::<CliConfig>(text) {
                Ok(c) => Ok(c),
                Err(e) if e.is_syntax() || e.is_eof() => {
                    Err(Error::invalid(format!("{context}: {}", toml_err.message())))
                }
                Err(e) => Err(Error::json(context, e)),
            },
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text, &path.display().to_string())?;
        if let Some(bank) = &cfg.prompt_bank {
            cfg.prompt_bank = Some(path.parent().unwrap_or(Path::new(".")).join(bank));
        }
        Ok(cfg)
    }

    /// Parameter overlay in task-params shape.
    pub fn params_overlay(&self) -> Value {
        let mut m = Map::new();
        for (k, v) in [
            ("association", &self.association),
            ("dbscan", &self.dbscan),
            ("places", &self.places),
        ] {
            if let Some(v) = v {
                m.insert(k.to_string(), v.clone());
            }
        }
        Value::Object(m)
    }
}

/// Recursive object merge: keys of `top` replace keys of `base`.
pub fn merge(base: &mut Value, top: &Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, t) => *slot = t.clone(),
    }
}

/// Resolves parameters with precedence flags > config file > `base` (task file or defaults).
pub fn resolve_params(base: &TaskParams, config: &CliConfig, flags: &Value) -> Result<TaskParams> {
    let mut v = serde_json::to_value(base).map_err(|e| Error::json("parameters", e))?;
    merge(&mut v, &config.params_overlay());
    merge(&mut v, flags);
    let params: TaskParams = serde_json::from_value(v).map_err(|e| Error::json("parameters", e))?;
    params.validate()?;
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn toml_and_json_agree() {
        let t = CliConfig::parse("dim = 8\n[places]\nresolution = 0.25\n", "t").unwrap();
        let j = CliConfig::parse(r#"{"dim": 8, "places": {"resolution": 0.25}}"#, "j").unwrap();
        assert_eq!(t, j);
        assert_eq!(t.dim, Some(8));
    }

    #[test]
    fn unknown_key_rejected() {
        let e = CliConfig::parse("dims = 8\n", "t").unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn precedence() {
        let mut base = TaskParams::default();
        base.places.resolution = 1.0;
        base.dbscan.eps = 0.7;
        base.places.spur_length = 9;
        let cfg = CliConfig::parse("[places]\nresolution = 0.25\nspur_length = 3\n", "t").unwrap();
        let flags = json!({"places": {"spur_length": 7}});
        let p = resolve_params(&base, &cfg, &flags).unwrap();
        // flag beats file, file beats task file, task file beats default
        assert_eq!(p.places.spur_length, 7);
        assert_eq!(p.places.resolution, 0.25);
        assert_eq!(p.dbscan.eps, 0.7);
        assert_eq!(p.dbscan.min_pts, TaskParams::default().dbscan.min_pts);
    }

    #[test]
    fn invalid_merged_value_rejected() {
        let flags = json!({"places": {"resolution": -1.0}});
        assert!(resolve_params(&TaskParams::default(), &CliConfig::default(), &flags).is_err());
    }
}
