use serde::{Deserialize, Serialize};

use crate::constraint::{Arg, Call};
use crate::domain::{DemoEvent, DemoToken, DemonstrationTrace, EventPayload, Point};
use crate::fsm::Plant;

use super::{Arena, Scenario, SimError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "do", rename_all = "snake_case")]
pub enum DemoAction {
    MoveTo { x: f64, y: f64 },
    TriggerPass,
    Pass { receiver: String },
    Shoot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoStep {
    pub t: f64,
    #[serde(flatten)]
    pub action: DemoAction,
}

/// A scripted stand-in for the person driving the avatar, plus the
/// narration and annotations they produce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoScript {
    pub id: String,
    /// Scenario the script was written for.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    pub duration: f64,
    pub steps: Vec<DemoStep>,
    #[serde(default)]
    pub tokens: Vec<DemoToken>,
    /// Annotations and condition hints; action events come from the run.
    #[serde(default)]
    pub events: Vec<DemoEvent>,
}

impl DemoScript {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        Ok(serde_json::from_str(text)?)
    }
}

fn ticks_of(t: f64, dt: f64) -> u64 {
    (t / dt).round() as u64
}

fn as_call(a: &DemoAction) -> (Call, &'static str, String) {
    match a {
        DemoAction::MoveTo { x, y } => (
            Call::new("MoveTo", vec![Arg::point(*x, *y)]),
            "move",
            Point::new(*x, *y).to_string(),
        ),
        DemoAction::TriggerPass => (Call::new("TriggerTeammatePass", vec![]), "call_for_ball", String::new()),
        DemoAction::Pass { receiver } => (Call::new("Pass", vec![Arg::name(receiver)]), "pass", receiver.clone()),
        DemoAction::Shoot => (Call::new("Shoot", vec![Arg::name("goal")]), "shoot", "goal".into()),
    }
}

/// Replays the stand-in in the arena, logging its actions and any passes
/// made by scripted agents, merged with the narration.
pub fn record_demo(scenario: &Scenario, script: &DemoScript) -> Result<DemonstrationTrace, SimError> {
    let dt = scenario.config.dt;
    let beyond = script
        .tokens
        .iter()
        .map(|t| t.t)
        .chain(script.events.iter().map(|e| e.t))
        .chain(script.steps.iter().map(|s| s.t))
        .find(|t| *t > script.duration + 1e-9);
    if let Some(t) = beyond {
        return Err(SimError::BeyondRun { t, duration: script.duration });
    }

    let avatar = scenario.avatar().id.clone();
    let mut arena = Arena::new(scenario.clone(), 0);
    let total = ticks_of(script.duration, dt);
    let mut events = Vec::new();
    let mut kicks_seen = 0;
    for tick in 0..=total {
        for step in script.steps.iter().filter(|s| ticks_of(s.t, dt) == tick) {
            let (call, verb, object) = as_call(&step.action);
            arena.stop();
            arena.start(&call).map_err(SimError::Demo)?;
            events.push(DemoEvent {
                t: tick as f64 * dt,
                payload: EventPayload::Action { verb: verb.into(), actor: avatar.clone(), object },
            });
        }
        if tick == total {
            break;
        }
        arena.advance().map_err(SimError::Demo)?;
        for k in &arena.kicks()[kicks_seen..] {
            events.push(DemoEvent {
                t: k.tick as f64 * dt,
                payload: EventPayload::Action { verb: k.verb.clone(), actor: k.actor.clone(), object: k.object.clone() },
            });
        }
        kicks_seen = arena.kicks().len();
    }
    events.extend(script.events.iter().cloned());
    let mut trace = DemonstrationTrace {
        id: script.id.clone(),
        scenario_id: scenario.family().to_string(),
        dt,
        tokens: script.tokens.clone(),
        events,
        snapshots: arena.into_states(),
    };
    trace.sort_stable();
    trace.validate().map_err(|e| SimError::Demo(e.to_string()))?;
    Ok(trace)
}
