//! Merges narration tokens with logged events into a single transcript,
//! injecting bracketed event text where each event happened.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{DemonstrationTrace, EventPayload, ExecutionTrace};
use crate::metrics::DecisionFlowGraph;
use crate::synth::{FeedbackKind, FeedbackSession};

#[derive(Debug, Error, PartialEq)]
pub enum GroundingError {
    #[error("feedback references tick {tick} but the run ends at tick {last}")]
    TickOutOfRange { tick: u64, last: u64 },
    #[error("feedback annotates {0}, which is not in the flow")]
    UnknownElement(String),
    #[error("expected {expected} feedback, got {found}")]
    WrongKind { expected: &'static str, found: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    /// System narration; sorts first on timestamp ties.
    Speak,
    Token,
    Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub text: String,
    pub t: f64,
    /// Index of the source event for injected segments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_event: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundedTranscript {
    pub source: String,
    pub segments: Vec<Segment>,
}

impl GroundedTranscript {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcript serializes")
    }
}

/// Phrase for each known action verb, and the object phrase override.
const TEMPLATES: &[(&str, &str, Option<&str>)] = &[
    ("move", "moved to", None),
    ("pass", "passed to", None),
    ("shoot", "shot toward", Some("the goal")),
    ("call_for_ball", "called for the ball", Some("")),
];

pub fn render_action(verb: &str, actor: &str, object: &str) -> String {
    let (phrase, object) = match TEMPLATES.iter().find(|(v, _, _)| *v == verb) {
        Some((_, phrase, Some(o))) => (*phrase, *o),
        Some((_, phrase, None)) => (*phrase, object),
        None => (verb, object),
    };
    let body = [actor, phrase, object].iter().filter(|s| !s.is_empty()).copied().collect::<Vec<_>>().join(" ");
    format!("[{body}]")
}

pub fn render_event(p: &EventPayload) -> String {
    match p {
        EventPayload::Action { verb, actor, object } => render_action(verb, actor, object),
        EventPayload::Annotation { x, y } => format!("[user marked coordinate ({x:.1}, {y:.1})]"),
        EventPayload::ConditionHint { expr, value } => format!("[observed {expr} = {value}]"),
    }
}

fn merge(mut segs: Vec<Segment>) -> Vec<Segment> {
    // sources arrive in timestamp order per kind, so a stable sort keyed on
    // (t, kind) is the documented merge
    segs.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.kind.cmp(&b.kind)));
    segs
}

pub fn ground(trace: &DemonstrationTrace) -> GroundedTranscript {
    let mut segs: Vec<Segment> = trace
        .tokens
        .iter()
        .map(|tok| Segment { kind: SegmentKind::Token, text: tok.text.clone(), t: tok.t, source_event: None })
        .collect();
    segs.extend(trace.events.iter().enumerate().map(|(i, e)| Segment {
        kind: SegmentKind::Event,
        text: render_event(&e.payload),
        t: e.t,
        source_event: Some(i),
    }));
    GroundedTranscript { source: trace.id.clone(), segments: merge(segs) }
}

pub fn render(t: &GroundedTranscript) -> String {
    t.segments.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join(" ")
}

/// Feedback given while watching a run, anchored by the run's Speak lines.
pub fn ground_feedback(trace: &ExecutionTrace, fb: &FeedbackSession) -> Result<GroundedTranscript, GroundingError> {
    if fb.kind != FeedbackKind::Execution {
        return Err(GroundingError::WrongKind { expected: "execution", found: fb.kind.as_str() });
    }
    let last = trace.states.last().map(|s| s.tick).unwrap_or(0);
    let ticks = fb.pauses.iter().copied().chain(fb.marks.iter().map(|m| m.tick));
    if let Some(tick) = ticks.clone().find(|t| *t > last) {
        return Err(GroundingError::TickOutOfRange { tick, last });
    }
    let dt = trace.dt;
    let mut segs: Vec<Segment> = trace
        .speaks
        .iter()
        .map(|s| Segment {
            kind: SegmentKind::Speak,
            text: format!("[system said: {}]", s.text),
            t: s.tick as f64 * dt,
            source_event: None,
        })
        .collect();
    segs.extend(fb.tokens(dt).into_iter().map(|tok| Segment {
        kind: SegmentKind::Token,
        text: tok.text,
        t: tok.t,
        source_event: None,
    }));
    for (i, p) in fb.pauses.iter().enumerate() {
        segs.push(Segment {
            kind: SegmentKind::Event,
            text: format!("[user paused at tick {p}]"),
            t: *p as f64 * dt,
            source_event: Some(i),
        });
    }
    for (i, m) in fb.marks.iter().enumerate() {
        segs.push(Segment {
            kind: SegmentKind::Event,
            text: render_event(&EventPayload::Annotation { x: m.x, y: m.y }),
            t: m.tick as f64 * dt,
            source_event: Some(fb.pauses.len() + i),
        });
    }
    Ok(GroundedTranscript { source: trace.id.clone(), segments: merge(segs) })
}

/// Feedback given on the decision flow: annotated elements come first, in
/// the order selected, followed by the comment.
pub fn ground_flow_feedback(flow: &DecisionFlowGraph, fb: &FeedbackSession) -> Result<GroundedTranscript, GroundingError> {
    if fb.kind != FeedbackKind::Flow {
        return Err(GroundingError::WrongKind { expected: "flow", found: fb.kind.as_str() });
    }
    let mut segs = Vec::new();
    for (i, id) in fb.annotated.iter().enumerate() {
        let text = if let Some(n) = flow.node(id) {
            format!("[user annotated node {}: {}]", n.id, n.label)
        } else if let Some(e) = flow.edges.iter().find(|e| DecisionFlowGraph::edge_id(e) == *id) {
            let label = |x: &str| flow.node(x).map(|n| n.label.clone()).unwrap_or_default();
            format!("[user annotated edge {} -> {} when {}]", label(&e.src), label(&e.dst), e.guard)
        } else {
            return Err(GroundingError::UnknownElement(id.clone()));
        };
        segs.push(Segment { kind: SegmentKind::Event, text, t: 0.0, source_event: Some(i) });
    }
    segs.extend(fb.tokens(1.0).into_iter().map(|tok| Segment {
        kind: SegmentKind::Token,
        text: tok.text,
        t: tok.t,
        source_event: None,
    }));
    // annotations precede the comment regardless of the token-first rule
    segs.sort_by(|a, b| a.t.total_cmp(&b.t).then(b.kind.cmp(&a.kind)));
    Ok(GroundedTranscript { source: "flow".into(), segments: segs })
}
