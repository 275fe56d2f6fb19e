use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// `tacticforge.toml`. Every key is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub port: u16,
    pub data_dir: PathBuf,
    pub static_dir: Option<PathBuf>,
    /// Stream pacing when the consumer does not ask for a rate.
    pub ticks_per_second: f64,
    pub max_ticks: u64,
    pub client: ClientConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClientConfig {
    /// Base URL of an OpenAI-compatible chat completions API.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub attempts: usize,
    pub temperature: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            port: 8080,
            data_dir: PathBuf::from("tacticforge-data"),
            static_dir: None,
            ticks_per_second: 10.0,
            max_ticks: 600,
            client: ClientConfig::default(),
        }
    }
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-4o".into(),
            api_key_env: "TACTICFORGE_API_KEY".into(),
            timeout_secs: 120,
            attempts: tacticforge_core::synth::DEFAULT_ATTEMPTS,
            temperature: 0.0,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads `path` if given, else `./tacticforge.toml` when present, else
    /// defaults. `TACTICFORGE_API_URL` and `TACTICFORGE_MODEL` override the
    /// client section.
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::from_toml(&std::fs::read_to_string(p)?)?,
            None if Path::new("tacticforge.toml").exists() => Self::from_toml(&std::fs::read_to_string("tacticforge.toml")?)?,
            None => Config::default(),
        };
        if let Ok(url) = std::env::var("TACTICFORGE_API_URL") {
            cfg.client.base_url = url;
        }
        if let Ok(m) = std::env::var("TACTICFORGE_MODEL") {
            cfg.client.model = m;
        }
        Ok(cfg)
    }
}
