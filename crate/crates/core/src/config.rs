//! Pipeline configuration: defaults, TOML/JSON files and environment overrides.
//!
//! Every leaf key can be overridden by an environment variable named
//! `CHROMALAYER_<SECTION>_<KEY>` in upper case, e.g.
//! `CHROMALAYER_DERIVATION_WHITE_TOLERANCE=2`. Values are parsed as JSON
//! first and fall back to plain strings.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::capture::CaptureConfig;
use crate::derive::DerivationConfig;
use crate::error::{Error, Result};

pub const ENV_PREFIX: &str = "CHROMALAYER_";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub derivation: DerivationConfig,
    pub capture: CaptureConfig,
}

impl Config {
    /// Defaults, then `path` (if any), then environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Config> {
        let mut value = serde_json::to_value(Config::default()).expect("config serializes");
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let file: Value = match path.extension().and_then(|e| e.to_str()) {
                Some("json") => serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
                _ => {
                    let t: toml::Value = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                    serde_json::to_value(t).map_err(|e| Error::Config(e.to_string()))?
                }
            };
            merge(&mut value, file);
        }
        apply_env(&mut value, |k| std::env::var(k).ok());
        let cfg: Config = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.derivation.validate()?;
        self.capture.validate()
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn apply_env(value: &mut Value, lookup: impl Fn(&str) -> Option<String>) {
    let Value::Object(sections) = value else { return };
    for (section, body) in sections.iter_mut() {
        let Value::Object(keys) = body else { continue };
        for (key, slot) in keys.iter_mut() {
            let var = format!("{ENV_PREFIX}{}_{}", section.to_uppercase(), key.to_uppercase());
            if let Some(raw) = lookup(&var) {
                *slot = serde_json::from_str(&raw).unwrap_or(Value::String(raw));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_hash_is_stable() {
        let cfg = Config::load(None).unwrap();
        assert_eq!(cfg.derivation.epsilon, 1e-6);
        assert_eq!(cfg.capture.viewport, (1920, 1080));
        assert_eq!(cfg.hash(), Config::default().hash());
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn file_and_env_override() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "[derivation]\nwhite_tolerance = 2\n[capture]\nmax_elements = 7\n").unwrap();
        let cfg = Config::load(Some(&path)).unwrap();
        assert_eq!(cfg.derivation.white_tolerance, 2);
        assert_eq!(cfg.capture.max_elements, 7);
        assert_ne!(cfg.hash(), Config::default().hash());

        let mut v = serde_json::to_value(&cfg).unwrap();
        apply_env(&mut v, |k| (k == "CHROMALAYER_DERIVATION_EPSILON").then(|| "0.001".to_string()));
        let cfg: Config = serde_json::from_value(v).unwrap();
        assert_eq!(cfg.derivation.epsilon, 0.001);
    }

    #[test]
    fn invalid_values_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"derivation": {"epsilon": 0}}"#).unwrap();
        assert!(matches!(Config::load(Some(&path)), Err(Error::Config(_))));
    }
}
