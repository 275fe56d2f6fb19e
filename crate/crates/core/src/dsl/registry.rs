use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Entity,
    Number,
    Point,
    Text,
    /// A bare name or a string literal, e.g. `"<"` or `horizontal`.
    Symbol,
    /// A point, a named entity/location, or `Sample(cond)`.
    Target,
}

impl ParamKind {
    pub fn describe(self) -> &'static str {
        match self {
            ParamKind::Entity => "entity",
            ParamKind::Number => "number",
            ParamKind::Point => "point",
            ParamKind::Text => "string",
            ParamKind::Symbol => "symbol",
            ParamKind::Target => "target",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSig {
    pub name: String,
    pub kind: ParamKind,
    #[serde(default)]
    pub optional: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiSig {
    pub name: String,
    pub params: Vec<ParamSig>,
    pub doc: String,
    /// Completion semantics id (actions only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion: Option<String>,
    /// Whether the constraint has a soft field form usable inside `Sample`.
    #[serde(default)]
    pub field: bool,
}

impl ApiSig {
    pub fn min_arity(&self) -> usize {
        self.params.iter().filter(|p| !p.optional).count()
    }

    pub fn max_arity(&self) -> usize {
        self.params.len()
    }

    pub fn signature(&self) -> String {
        let ps: Vec<String> = self
            .params
            .iter()
            .map(|p| format!("{}{}: {}", p.name, if p.optional { "?" } else { "" }, p.kind.describe()))
            .collect();
        format!("{}({})", self.name, ps.join(", "))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RegistryError {
    #[error("duplicate api name {0}")]
    Duplicate(String),
    #[error("{0} is a reserved name")]
    Reserved(String),
    #[error("optional parameter before required one in {0}")]
    OptionalOrder(String),
    #[error("bad registry json: {0}")]
    Json(String),
}

pub const RESERVED: [&str; 5] = ["Wait", "Speak", "Sample", "True", "False"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiRegistry {
    pub id: String,
    pub actions: Vec<ApiSig>,
    pub constraints: Vec<ApiSig>,
}

fn p(name: &str, kind: ParamKind) -> ParamSig {
    ParamSig { name: name.into(), kind, optional: false }
}

fn opt(name: &str, kind: ParamKind) -> ParamSig {
    ParamSig { name: name.into(), kind, optional: true }
}

fn action(name: &str, params: Vec<ParamSig>, completion: &str, doc: &str) -> ApiSig {
    ApiSig { name: name.into(), params, doc: doc.into(), completion: Some(completion.into()), field: false }
}

fn constraint(name: &str, params: Vec<ParamSig>, field: bool, doc: &str) -> ApiSig {
    ApiSig { name: name.into(), params, doc: doc.into(), completion: None, field }
}

impl ApiRegistry {
    pub fn soccer() -> Self {
        use ParamKind::*;
        ApiRegistry {
            id: "soccer".into(),
            actions: vec![
                action("MoveTo", vec![p("target", Target)], "arrival", "Run to a point, an entity's current spot, or a point sampled from a condition."),
                action("Pass", vec![p("receiver", Entity)], "ball-arrival", "Kick the ball to a teammate. Requires possession."),
                action("Shoot", vec![p("goal", Entity)], "ball-arrival", "Shoot at the goal. Blocked if an opponent cuts the lane."),
                action("TriggerTeammatePass", vec![], "kick", "Ask the teammate holding the ball to pass it to you."),
            ],
            constraints: vec![
                constraint("HasPossession", vec![p("entity", Entity)], false, "True while the entity holds the ball."),
                constraint("DistanceTo", vec![p("obj", Entity), p("ref", Entity), p("d", Number), p("op", Symbol)], true, "Compares the distance between two entities with one of < <= > >= ==."),
                constraint("SideOf", vec![p("obj", Entity), p("ref", Entity), p("axis", Symbol), p("side", Symbol)], true, "obj lies left/right (horizontal) or above/below (vertical) of ref."),
                constraint("PassingLane", vec![p("passer", Entity), p("receiver", Entity), opt("width", Number)], true, "No opponent within width/2 of the straight pass path (width defaults to 2 m)."),
                constraint("NearPoint", vec![p("obj", Entity), p("point", Point), p("sigma", Number)], true, "obj within 2 sigma of the point."),
            ],
        }
    }

    pub fn manufacturing() -> Self {
        use ParamKind::*;
        ApiRegistry {
            id: "manufacturing".into(),
            actions: vec![
                action("goTo", vec![p("location", Entity)], "arrival", "Drive to a named station."),
                action("pick", vec![p("object", Entity), p("location", Entity)], "fixed-duration", "Pick an object up at a location."),
                action("swapBuckets", vec![p("full", Entity), p("empty", Entity), p("location", Entity)], "fixed-duration", "Exchange the worker's bucket for the full one."),
            ],
            constraints: vec![
                constraint("BelowThreshold", vec![p("container", Entity), p("level", Number)], false, "Container holds fewer parts than the level."),
                constraint("HumanReady", vec![p("human", Entity)], false, "The human has given permission."),
            ],
        }
    }

    pub fn from_json(text: &str) -> Result<Self, RegistryError> {
        let r: ApiRegistry = serde_json::from_str(text).map_err(|e| RegistryError::Json(e.to_string()))?;
        r.validate()?;
        Ok(r)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("registry serializes")
    }

    pub fn validate(&self) -> Result<(), RegistryError> {
        let mut seen = HashSet::new();
        for sig in self.actions.iter().chain(&self.constraints) {
            if RESERVED.contains(&sig.name.as_str()) {
                return Err(RegistryError::Reserved(sig.name.clone()));
            }
            if !seen.insert(sig.name.as_str()) {
                return Err(RegistryError::Duplicate(sig.name.clone()));
            }
            let first_opt = sig.params.iter().position(|p| p.optional).unwrap_or(sig.params.len());
            if sig.params[first_opt..].iter().any(|p| !p.optional) {
                return Err(RegistryError::OptionalOrder(sig.name.clone()));
            }
        }
        Ok(())
    }

    pub fn action(&self, name: &str) -> Option<&ApiSig> {
        self.actions.iter().find(|a| a.name == name)
    }

    pub fn constraint(&self, name: &str) -> Option<&ApiSig> {
        self.constraints.iter().find(|a| a.name == name)
    }

    /// Documentation block handed to the generator, one entry per line.
    pub fn docs(&self) -> String {
        let mut out = String::from("Actions (use as `do Name(args)`):\n");
        for a in &self.actions {
            out.push_str(&format!("- {}: {}\n", a.signature(), a.doc));
        }
        out.push_str("Conditions (use in if/while/until and inside Sample):\n");
        for c in &self.constraints {
            let tag = if c.field { "" } else { " [not samplable]" };
            out.push_str(&format!("- {}{}: {}\n", c.signature(), tag, c.doc));
        }
        out.push_str("Builtins: do Wait() until cond; do Speak(\"text\"); Sample(cond) as a target.\n");
        out
    }
}
