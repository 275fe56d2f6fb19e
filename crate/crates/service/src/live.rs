//! Chat-completions client for a hosted model.

use std::time::Duration;

use serde_json::json;
use tacticforge_core::synth::{ClientError, GenClient};

use crate::config::ClientConfig;

pub struct LiveClient {
    cfg: ClientConfig,
    key: Option<String>,
    http: reqwest::blocking::Client,
}

impl LiveClient {
    pub fn new(cfg: &ClientConfig) -> anyhow::Result<Self> {
        let http = reqwest::blocking::Client::builder().timeout(Duration::from_secs(cfg.timeout_secs)).build()?;
        Ok(LiveClient { cfg: cfg.clone(), key: std::env::var(&cfg.api_key_env).ok(), http })
    }
}

fn err(message: impl Into<String>) -> ClientError {
    ClientError { message: message.into() }
}

impl GenClient for LiveClient {
    fn generate(&self, prompt: &str, seed: u64) -> Result<String, ClientError> {
        let key = self.key.as_ref().ok_or_else(|| err(format!("{} is not set", self.cfg.api_key_env)))?;
        let url = format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'));
        let body = json!({
            "model": self.cfg.model,
            "temperature": self.cfg.temperature,
            "seed": seed,
            "messages": [{"role": "user", "content": prompt}],
        });
        let resp = self.http.post(url).bearer_auth(key).json(&body).send().map_err(|e| err(e.to_string()))?;
        let status = resp.status();
        let v: serde_json::Value = resp.json().map_err(|e| err(format!("{status}: {e}")))?;
        if !status.is_success() {
            return Err(err(format!("{status}: {}", v["error"]["message"].as_str().unwrap_or("request failed"))));
        }
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| err("response has no message content"))
    }
}
