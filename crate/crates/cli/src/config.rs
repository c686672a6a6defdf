use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

/// Environment variable naming the config file when `--config` is absent.
pub const CONFIG_ENV: &str = "FEATSEQ_CONFIG";

/// The engine config file. Relative paths resolve against the file's
/// directory.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    pub data_dir: PathBuf,
    pub model: PathBuf,
    pub lexicon: PathBuf,
    /// Partial `MasteryParams` object; absent fields keep their defaults.
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default)]
    pub items_per_session: Option<usize>,
    #[serde(default = "default_listen")]
    pub listen: SocketAddr,
}

fn default_listen() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 8080))
}

impl EngineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: EngineConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.data_dir, &mut cfg.model, &mut cfg.lexicon] {
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
    fn relative_paths_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(
            &path,
            r#"{"data_dir":"d","model":"/abs/m.json","lexicon":"l.json","params":{"max_drop":5000}}"#,
        )
        .unwrap();
        let cfg = EngineConfig::load(&path).unwrap();
        assert_eq!(cfg.data_dir, dir.path().join("d"));
        assert_eq!(cfg.model, PathBuf::from("/abs/m.json"));
        assert_eq!(cfg.lexicon, dir.path().join("l.json"));
        assert_eq!(cfg.listen, default_listen());
        assert_eq!(cfg.params["max_drop"], 5000);
    }

    #[test]
    fn unknown_fields_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"data_dir":"d","model":"m","lexicon":"l","lisen":"x"}"#).unwrap();
        assert!(EngineConfig::load(&path).is_err());
    }
}
