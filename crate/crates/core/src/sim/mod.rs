//! 2D kinematic arena: scripted environment agents, the soccer action API
//! and the tick loop producing execution traces.

mod arena;
mod demo;

pub use arena::{Arena, KickEvent};
pub use demo::{record_demo, DemoAction, DemoScript, DemoStep};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{validate_world, Entity, ExecutionTrace, Role, Workspace, WorldState};
use crate::dsl::BehaviorProgram;
use crate::fsm::{compile, run as run_fsm, RunConfig};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("timestamp {t} beyond run length {duration}")]
    BeyondRun { t: f64, duration: f64 },
    #[error("demo action failed: {0}")]
    Demo(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn default_dt() -> f64 {
    0.1
}
fn default_player_speed() -> f64 {
    4.0
}
fn default_pass_speed() -> f64 {
    12.0
}
fn default_shot_speed() -> f64 {
    16.0
}
fn default_eps() -> f64 {
    0.3
}
fn default_catch() -> f64 {
    0.8
}
fn default_lane() -> f64 {
    2.0
}
fn default_window() -> u64 {
    crate::fsm::DEFAULT_DEADLOCK_WINDOW
}

/// Kinematic constants, all in SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_player_speed")]
    pub player_speed: f64,
    #[serde(default = "default_pass_speed")]
    pub pass_speed: f64,
    #[serde(default = "default_shot_speed")]
    pub shot_speed: f64,
    #[serde(default = "default_eps")]
    pub arrival_eps: f64,
    #[serde(default = "default_catch")]
    pub catch_radius: f64,
    #[serde(default = "default_lane")]
    pub lane_width: f64,
    #[serde(default = "default_window")]
    pub deadlock_window: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Rule {
    /// Run at an opposing ball holder within `radius`.
    ChaseBallHolder { radius: f64, speed: f64 },
    HoldPosition,
    /// Shadow `target` at offset (`dx`, `dy`).
    MarkEntity { target: String, dx: f64, dy: f64, speed: f64 },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentScript {
    pub entity: String,
    #[serde(default)]
    pub waypoints: Vec<Waypoint>,
    /// Checked in order before waypoints; the first applicable rule wins.
    #[serde(default)]
    pub rules: Vec<Rule>,
    /// Teammates of the avatar pass to it when it calls for the ball.
    #[serde(default = "yes")]
    pub passes_on_request: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    #[serde(default)]
    pub description: String,
    /// Drill this scenario is a variation of; demonstrations record it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant_of: Option<String>,
    pub workspace: Workspace,
    pub entities: Vec<Entity>,
    pub initial: WorldState,
    #[serde(default)]
    pub scripts: Vec<AgentScript>,
    #[serde(default)]
    pub config: SimConfig,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn family(&self) -> &str {
        self.variant_of.as_deref().unwrap_or(&self.id)
    }

    pub fn avatar(&self) -> &Entity {
        self.entities.iter().find(|e| e.role == Role::Avatar).expect("validated scenario has an avatar")
    }

    pub fn ball(&self) -> &Entity {
        self.entities.iter().find(|e| e.role == Role::Ball).expect("validated scenario has a ball")
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidScenario(m));
        self.workspace.validate().map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        for role in [Role::Avatar, Role::Ball] {
            let n = self.entities.iter().filter(|e| e.role == role).count();
            if n != 1 {
                return bad(format!("expected exactly one {role:?}, found {n}"));
            }
        }
        let mut ids: Vec<&str> = self.entities.iter().map(|e| e.id.as_str()).collect();
        ids.sort();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return bad("duplicate entity id".into());
        }
        if let Err(v) = validate_world(&self.initial, &self.workspace, &self.entities) {
            return bad(v.iter().map(|v| v.message.clone()).collect::<Vec<_>>().join("; "));
        }
        for s in &self.scripts {
            let Some(e) = self.entities.iter().find(|e| e.id == s.entity) else {
                return bad(format!("script for unknown entity {}", s.entity));
            };
            if matches!(e.role, Role::Avatar | Role::Ball) {
                return bad(format!("{} cannot be scripted", s.entity));
            }
            for w in &s.waypoints {
                if !self.workspace.contains(crate::domain::Point::new(w.x, w.y)) {
                    return bad(format!("waypoint ({}, {}) of {} out of bounds", w.x, w.y, s.entity));
                }
                if !(w.speed > 0.0) {
                    return bad(format!("waypoint speed of {} must be positive", s.entity));
                }
            }
            for r in &s.rules {
                match r {
                    Rule::ChaseBallHolder { radius, speed } if !(*radius > 0.0) || !(*speed > 0.0) => {
                        return bad(format!("chase rule of {} needs r > 0 and speed > 0", s.entity))
                    }
                    Rule::MarkEntity { target, speed, .. } => {
                        if !self.entities.iter().any(|e| &e.id == target) {
                            return bad(format!("{} marks unknown entity {target}", s.entity));
                        }
                        if !(*speed > 0.0) {
                            return bad(format!("mark rule of {} needs speed > 0", s.entity));
                        }
                    }
                    _ => {}
                }
            }
        }
        let c = &self.config;
        if !(c.dt > 0.0 && c.player_speed > 0.0 && c.pass_speed > 0.0 && c.shot_speed > 0.0 && c.catch_radius > 0.0) {
            return bad("kinematic constants must be positive".into());
        }
        Ok(())
    }
}

/// Stable 64-bit FNV-1a digest, used for default program ids.
pub fn fnv64(text: &str) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in text.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

/// Runs the entry behavior of `program` against `scenario`.
pub fn run(program: &BehaviorProgram, scenario: &Scenario, seed: u64, max_ticks: u64) -> ExecutionTrace {
    let fsm = compile(program);
    let mut arena = Arena::new(scenario.clone(), seed);
    let cfg = RunConfig {
        max_ticks,
        window: scenario.config.deadlock_window,
        actor: scenario.avatar().id.clone(),
    };
    let log = run_fsm(&fsm, &mut arena, &cfg);
    let program_id = fnv64(&crate::dsl::print(program));
    ExecutionTrace {
        id: format!("{}-{}-s{seed}", &program_id[..8], scenario.id),
        program_id,
        scenario_id: scenario.id.clone(),
        seed,
        dt: scenario.config.dt,
        states: arena.into_states(),
        actions: log.actions,
        speaks: log.speaks,
        termination: log.termination,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults() {
        let c = SimConfig::default();
        assert_eq!((c.dt, c.player_speed, c.pass_speed, c.shot_speed), (0.1, 4.0, 12.0, 16.0));
        assert_eq!((c.arrival_eps, c.catch_radius, c.lane_width, c.deadlock_window), (0.3, 0.8, 2.0, 100));
    }
}
