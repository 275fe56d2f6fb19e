//! Shared vocabulary: workspace geometry, entities, world snapshots and the
//! demonstration / execution traces every other module consumes.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("nothing to resample")]
    NothingToResample,
    #[error("resample rate must be positive, got {0}")]
    BadRate(f64),
    #[error("invalid workspace: {0}")]
    InvalidWorkspace(String),
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn sub(self, other: Point) -> Point {
        Point::new(self.x - other.x, self.y - other.y)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.1}, {:.1})", self.x, self.y)
    }
}

/// Normalizes an angle to `[-pi, pi)`.
pub fn normalize_heading(a: f64) -> f64 {
    let mut h = (a + PI).rem_euclid(2.0 * PI) - PI;
    if h >= PI {
        h -= 2.0 * PI;
    }
    h
}

/// Axis-aligned goal mouth. `team` is the team defending it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalRegion {
    pub id: String,
    pub team: String,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl GoalRegion {
    pub fn center(&self) -> Point {
        Point::new((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }
}

/// Discretization of the workspace used by spatial fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub cols: usize,
    pub rows: usize,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_width(&self) -> f64 {
        (self.x_max - self.x_min) / self.cols as f64
    }

    pub fn cell_height(&self) -> f64 {
        (self.y_max - self.y_min) / self.rows as f64
    }

    /// Row-major index; row 0 sits at `y_min`.
    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.cols + col
    }

    pub fn col_row(&self, index: usize) -> (usize, usize) {
        (index % self.cols, index / self.cols)
    }

    pub fn cell_center(&self, col: usize, row: usize) -> Point {
        Point::new(
            self.x_min + (col as f64 + 0.5) * self.cell_width(),
            self.y_min + (row as f64 + 0.5) * self.cell_height(),
        )
    }

    pub fn cell_of(&self, p: Point) -> Option<(usize, usize)> {
        if p.x < self.x_min || p.x > self.x_max || p.y < self.y_min || p.y > self.y_max {
            return None;
        }
        let col = (((p.x - self.x_min) / self.cell_width()) as usize).min(self.cols - 1);
        let row = (((p.y - self.y_min) / self.cell_height()) as usize).min(self.rows - 1);
        Some((col, row))
    }

    pub fn cell_diagonal(&self) -> f64 {
        self.cell_width().hypot(self.cell_height())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub cols: usize,
    pub rows: usize,
    #[serde(default)]
    pub goals: Vec<GoalRegion>,
}

impl Workspace {
    /// 30 m x 20 m small-sided pitch on a 0.5 m grid, attacking towards +y.
    pub fn pitch() -> Self {
        Workspace {
            x_min: 0.0,
            x_max: 30.0,
            y_min: 0.0,
            y_max: 20.0,
            cols: 60,
            rows: 40,
            goals: vec![
                GoalRegion {
                    id: "goal".into(),
                    team: "away".into(),
                    x_min: 12.0,
                    x_max: 18.0,
                    y_min: 19.5,
                    y_max: 20.0,
                },
                GoalRegion {
                    id: "home_goal".into(),
                    team: "home".into(),
                    x_min: 12.0,
                    x_max: 18.0,
                    y_min: 0.0,
                    y_max: 0.5,
                },
            ],
        }
    }

    pub fn grid(&self) -> Grid {
        Grid {
            x_min: self.x_min,
            x_max: self.x_max,
            y_min: self.y_min,
            y_max: self.y_max,
            cols: self.cols,
            rows: self.rows,
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        let bad = |m: &str| Err(DomainError::InvalidWorkspace(m.to_string()));
        if !(self.x_max > self.x_min) || !(self.y_max > self.y_min) {
            return bad("bounds must satisfy max > min");
        }
        if self.cols < 2 || self.rows < 2 {
            return bad("grid needs at least 2 x 2 cells");
        }
        for g in &self.goals {
            let inside = g.x_min >= self.x_min
                && g.x_max <= self.x_max
                && g.y_min >= self.y_min
                && g.y_max <= self.y_max
                && g.x_min <= g.x_max
                && g.y_min <= g.y_max;
            if !inside {
                return Err(DomainError::InvalidWorkspace(format!(
                    "goal region {} lies outside the workspace",
                    g.id
                )));
            }
        }
        Ok(())
    }

    pub fn goal(&self, id: &str) -> Option<&GoalRegion> {
        self.goals.iter().find(|g| g.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Avatar,
    Teammate,
    Opponent,
    Ball,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    pub role: Role,
    pub team: String,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityState {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
}

impl EntityState {
    pub fn pos(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub tick: u64,
    pub entities: Vec<EntityState>,
    /// Id of the ball holder; `None` while the ball is in flight or loose.
    pub possession: Option<String>,
    pub ball_target: Option<Point>,
}

impl WorldState {
    pub fn get(&self, id: &str) -> Option<&EntityState> {
        self.entities.iter().find(|e| e.id == id)
    }

    pub fn get_mut(&mut self, id: &str) -> Option<&mut EntityState> {
        self.entities.iter_mut().find(|e| e.id == id)
    }

    pub fn position(&self, id: &str) -> Option<Point> {
        self.get(id).map(EntityState::pos)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    OutOfBounds,
    UnknownPossessionHolder,
    BallHoldsBall,
    UnknownEntity,
    MissingEntity,
    BadHeading,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub entity: Option<String>,
    pub message: String,
}

/// Collects every invariant violation of `state` instead of stopping at the first.
pub fn validate_world(
    state: &WorldState,
    ws: &Workspace,
    entities: &[Entity],
) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    let mut push = |kind, entity: Option<&str>, message: String| {
        out.push(Violation {
            kind,
            entity: entity.map(str::to_string),
            message,
        })
    };
    for es in &state.entities {
        if !entities.iter().any(|e| e.id == es.id) {
            push(ViolationKind::UnknownEntity, Some(&es.id), format!("unknown entity id {}", es.id));
        }
        if !ws.contains(es.pos()) || !es.x.is_finite() || !es.y.is_finite() {
            push(
                ViolationKind::OutOfBounds,
                Some(&es.id),
                format!("{} out of bounds at ({}, {})", es.id, es.x, es.y),
            );
        }
        if !(-PI..PI).contains(&es.heading) {
            push(ViolationKind::BadHeading, Some(&es.id), format!("{} heading {} outside [-pi, pi)", es.id, es.heading));
        }
    }
    for e in entities {
        if state.get(&e.id).is_none() {
            push(ViolationKind::MissingEntity, Some(&e.id), format!("no state for entity {}", e.id));
        }
    }
    if let Some(holder) = &state.possession {
        match entities.iter().find(|e| &e.id == holder) {
            None => push(
                ViolationKind::UnknownPossessionHolder,
                Some(holder),
                format!("unknown possession holder {holder}"),
            ),
            Some(e) if e.role == Role::Ball => push(
                ViolationKind::BallHoldsBall,
                Some(holder),
                "possession refers to the ball itself".into(),
            ),
            Some(_) => {}
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventPayload {
    Action {
        verb: String,
        actor: String,
        object: String,
    },
    Annotation {
        x: f64,
        y: f64,
    },
    /// Canonical DSL condition text plus its observed truth value.
    ConditionHint {
        expr: String,
        value: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoEvent {
    pub t: f64,
    #[serde(flatten)]
    pub payload: EventPayload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoToken {
    pub t: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemonstrationTrace {
    pub id: String,
    pub scenario_id: String,
    /// Seconds per simulator tick; converts snapshot ticks to timestamps.
    pub dt: f64,
    pub tokens: Vec<DemoToken>,
    pub events: Vec<DemoEvent>,
    pub snapshots: Vec<WorldState>,
}

impl DemonstrationTrace {
    /// Parses a trace and restores timestamp order with a stable sort.
    pub fn from_json(text: &str) -> Result<Self, DomainError> {
        let mut trace: DemonstrationTrace = serde_json::from_str(text)?;
        trace.sort_stable();
        trace.validate()?;
        Ok(trace)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    pub fn sort_stable(&mut self) {
        self.tokens.sort_by(|a, b| a.t.total_cmp(&b.t));
        self.events.sort_by(|a, b| a.t.total_cmp(&b.t));
        self.snapshots.sort_by_key(|s| s.tick);
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        let bad = |m: String| Err(DomainError::InvalidTrace(m));
        if !(self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        for tok in &self.tokens {
            if !(tok.t >= 0.0) {
                return bad(format!("token {:?} has negative timestamp", tok.text));
            }
            if tok.text.is_empty() || tok.text.chars().any(char::is_whitespace) {
                return bad(format!("token {:?} must be a single non-empty word", tok.text));
            }
        }
        for ev in &self.events {
            if !(ev.t >= 0.0) {
                return bad("event with negative timestamp".into());
            }
        }
        let sorted = self.tokens.windows(2).all(|w| w[0].t <= w[1].t)
            && self.events.windows(2).all(|w| w[0].t <= w[1].t)
            && self.snapshots.windows(2).all(|w| w[0].tick <= w[1].tick);
        if !sorted {
            return bad("tokens, events and snapshots must be sorted".into());
        }
        Ok(())
    }

    /// Action events in timestamp order.
    pub fn actions(&self) -> impl Iterator<Item = (f64, &str, &str, &str)> {
        self.events.iter().filter_map(|e| match &e.payload {
            EventPayload::Action { verb, actor, object } => {
                Some((e.t, verb.as_str(), actor.as_str(), object.as_str()))
            }
            _ => None,
        })
    }
}

/// Keeps the snapshot nearest to every multiple of `1 / hz` (earlier wins ties).
pub fn snapshot_interval_resample(
    trace: &DemonstrationTrace,
    hz: f64,
) -> Result<DemonstrationTrace, DomainError> {
    if !(hz > 0.0) || !hz.is_finite() {
        return Err(DomainError::BadRate(hz));
    }
    let snaps = &trace.snapshots;
    let (first, last) = match (snaps.first(), snaps.last()) {
        (Some(f), Some(l)) => (f.tick as f64 * trace.dt, l.tick as f64 * trace.dt),
        _ => return Err(DomainError::NothingToResample),
    };
    let eps = 1e-9;
    let mut picked = Vec::new();
    let mut cursor = 0usize;
    let mut k = 0u64;
    loop {
        let t = first + k as f64 / hz;
        if t > last + eps {
            break;
        }
        while cursor + 1 < snaps.len() {
            let here = (snaps[cursor].tick as f64 * trace.dt - t).abs();
            let next = (snaps[cursor + 1].tick as f64 * trace.dt - t).abs();
            if next + eps < here {
                cursor += 1;
            } else {
                break;
            }
        }
        picked.push(snaps[cursor].clone());
        k += 1;
    }
    Ok(DemonstrationTrace {
        snapshots: picked,
        ..trace.clone()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolvedArg {
    Entity(String),
    Number(f64),
    Point(Point),
    Text(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionStatus {
    Running,
    Completed,
    Interrupted,
    Cancelled,
    Failed,
    Blocked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub tick: u64,
    pub actor: String,
    pub action: String,
    pub args: Vec<ResolvedArg>,
    pub status: ActionStatus,
    pub end_tick: Option<u64>,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakRecord {
    pub tick: u64,
    pub text: String,
    /// `L<line>` of the Speak statement in the printed program.
    pub line: String,
    pub freeze_ticks: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafValue {
    pub leaf: String,
    pub value: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuardReport {
    pub guard: String,
    pub value: bool,
    pub leaves: Vec<LeafValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeadlockReport {
    pub state: usize,
    pub label: String,
    pub blocked_since: u64,
    pub edges: Vec<GuardReport>,
}

impl fmt::Display for DeadlockReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "deadlock in {} since tick {}: ", self.label, self.blocked_since)?;
        let guards: Vec<_> = self.edges.iter().map(|e| e.guard.as_str()).collect();
        write!(f, "never satisfied: {}", guards.join(" | "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination {
    Completed { tick: u64 },
    MaxTicks { tick: u64 },
    Deadlock { tick: u64, report: DeadlockReport },
    Aborted { tick: u64, error: String },
}

impl Termination {
    pub fn tick(&self) -> u64 {
        match self {
            Termination::Completed { tick }
            | Termination::MaxTicks { tick }
            | Termination::Deadlock { tick, .. }
            | Termination::Aborted { tick, .. } => *tick,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub id: String,
    pub program_id: String,
    pub scenario_id: String,
    pub seed: u64,
    pub dt: f64,
    pub states: Vec<WorldState>,
    pub actions: Vec<ActionRecord>,
    pub speaks: Vec<SpeakRecord>,
    pub termination: Termination,
}

impl ExecutionTrace {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DomainError> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_with_snapshots(n: u64) -> DemonstrationTrace {
        DemonstrationTrace {
            id: "d".into(),
            scenario_id: "s".into(),
            dt: 0.1,
            tokens: vec![],
            events: vec![],
            snapshots: (0..n)
                .map(|tick| WorldState {
                    tick,
                    entities: vec![],
                    possession: None,
                    ball_target: None,
                })
                .collect(),
        }
    }

    #[test]
    fn resample_identity_at_source_rate() {
        let trace = demo_with_snapshots(100);
        let out = snapshot_interval_resample(&trace, 10.0).unwrap();
        assert_eq!(out.snapshots, trace.snapshots);
    }

    #[test]
    fn resample_down_to_one_hz() {
        let trace = demo_with_snapshots(100);
        let out = snapshot_interval_resample(&trace, 1.0).unwrap();
        let ticks: Vec<u64> = out.snapshots.iter().map(|s| s.tick).collect();
        assert_eq!(ticks, vec![0, 10, 20, 30, 40, 50, 60, 70, 80, 90]);
    }

    #[test]
    fn resample_empty_is_error() {
        let trace = demo_with_snapshots(0);
        let err = snapshot_interval_resample(&trace, 1.0).unwrap_err();
        assert_eq!(err.to_string(), "nothing to resample");
    }

    fn pitch_entities() -> Vec<Entity> {
        vec![
            Entity { id: "user".into(), role: Role::Avatar, team: "home".into(), radius: 0.4 },
            Entity { id: "teammate".into(), role: Role::Teammate, team: "home".into(), radius: 0.4 },
            Entity { id: "ball".into(), role: Role::Ball, team: "none".into(), radius: 0.11 },
        ]
    }

    fn state_at(positions: &[(&str, f64, f64)], possession: Option<&str>) -> WorldState {
        WorldState {
            tick: 0,
            entities: positions
                .iter()
                .map(|(id, x, y)| EntityState { id: id.to_string(), x: *x, y: *y, heading: 0.0, speed: 0.0 })
                .collect(),
            possession: possession.map(str::to_string),
            ball_target: None,
        }
    }

    #[test]
    fn valid_world_passes() {
        let s = state_at(&[("user", 1.0, 1.0), ("teammate", 5.0, 5.0), ("ball", 5.0, 5.0)], Some("teammate"));
        assert!(validate_world(&s, &Workspace::pitch(), &pitch_entities()).is_ok());
    }

    #[test]
    fn reports_every_violation() {
        let s = state_at(&[("user", 999.0, 0.0), ("teammate", 5.0, 5.0), ("ball", 5.0, 5.0)], Some("ghost"));
        let v = validate_world(&s, &Workspace::pitch(), &pitch_entities()).unwrap_err();
        let kinds: Vec<_> = v.iter().map(|v| v.kind).collect();
        assert!(kinds.contains(&ViolationKind::OutOfBounds));
        assert!(kinds.contains(&ViolationKind::UnknownPossessionHolder));
        assert!(v.iter().any(|v| v.message.contains("out of bounds")));
        assert!(v.iter().any(|v| v.message.contains("unknown possession holder")));
    }

    #[test]
    fn heading_normalization_range() {
        assert_eq!(normalize_heading(PI), -PI);
        assert!((normalize_heading(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(normalize_heading(0.0), 0.0);
    }

    #[test]
    fn equal_timestamps_keep_input_order() {
        let mut trace = demo_with_snapshots(1);
        for (i, obj) in ["a", "b", "c"].iter().enumerate() {
            trace.events.push(DemoEvent {
                t: if i == 0 { 2.0 } else { 1.0 },
                payload: EventPayload::Action { verb: "pass".into(), actor: "user".into(), object: obj.to_string() },
            });
        }
        let reloaded = DemonstrationTrace::from_json(&trace.to_json()).unwrap();
        let objects: Vec<_> = reloaded.actions().map(|a| a.3.to_string()).collect();
        assert_eq!(objects, vec!["b", "c", "a"]);
        let again = DemonstrationTrace::from_json(&reloaded.to_json()).unwrap();
        assert_eq!(again, reloaded);
    }
}
