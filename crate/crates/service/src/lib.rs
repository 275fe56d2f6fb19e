//! Command line and HTTP surface over `tacticforge-core`.

pub mod api;
pub mod cli;
pub mod config;
pub mod contract;
pub mod live;
pub mod store;

use anyhow::{bail, Context};
use tacticforge_core::dsl::ApiRegistry;
use tacticforge_core::fixtures;
use tacticforge_core::sim::Scenario;

/// A built-in registry by name, or a registry JSON file.
pub fn load_registry(spec: &str) -> anyhow::Result<ApiRegistry> {
    match spec {
        "soccer" => Ok(ApiRegistry::soccer()),
        "manufacturing" => Ok(ApiRegistry::manufacturing()),
        path => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading registry {path}"))?;
            Ok(ApiRegistry::from_json(&text)?)
        }
    }
}

/// A bundled scenario id, or a scenario JSON file.
pub fn load_scenario(spec: &str) -> anyhow::Result<Scenario> {
    if let Some(s) = fixtures::scenario(spec) {
        return Ok(s);
    }
    if !std::path::Path::new(spec).exists() {
        bail!("no scenario named {spec}");
    }
    let text = std::fs::read_to_string(spec).with_context(|| format!("reading scenario {spec}"))?;
    Ok(Scenario::from_json(&text)?)
}
