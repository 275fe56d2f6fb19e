mod support;

use proptest::prelude::*;

use tacticforge_core::domain::{DemoEvent, DemoToken, DemonstrationTrace, EventPayload};
use tacticforge_core::dsl::{parse, ApiRegistry};
use tacticforge_core::fixtures;
use tacticforge_core::fsm::compile;
use tacticforge_core::grounding::{ground, ground_feedback, ground_flow_feedback, render, GroundingError, SegmentKind};
use tacticforge_core::metrics::extract_flow;
use tacticforge_core::sim::run;
use tacticforge_core::synth::{FeedbackKind, FeedbackSession, Mark};

fn narrated() -> DemonstrationTrace {
    DemonstrationTrace::from_json(&support::fixture_text("demos/narrated_lure.demo.json")).unwrap()
}

#[test]
fn narrated_demo_matches_golden() {
    let text = render(&ground(&narrated()));
    assert_eq!(text, support::fixture_text("golden/narrated_lure.txt").trim_end());
    assert!(text.contains("[user marked coordinate (7.5, 12.0)]"));
}

#[test]
fn recorded_lure_demos_match_goldens() {
    let demos = fixtures::lure_demos();
    support::golden("lure_pass.demo.json", &demos[0].to_json());
    support::golden("lure_shoot.demo.json", &demos[1].to_json());
    support::golden("lure_pass.transcript.txt", &(render(&ground(&demos[0])) + "\n"));
    support::golden("lure_shoot.transcript.txt", &(render(&ground(&demos[1])) + "\n"));
}

#[test]
fn recorded_demo_shows_the_mark_and_the_call() {
    let text = render(&ground(&fixtures::lure_demos()[0]));
    assert!(text.contains("[user marked coordinate (9.0, 10.0)]"), "{text}");
    assert!(text.contains("[user called for the ball]"), "{text}");
    assert!(text.contains("[teammate passed to user]"), "{text}");
    assert!(text.contains("[user passed to teammate]"), "{text}");
}

#[test]
fn grounding_is_byte_stable() {
    let a = ground(&narrated()).to_json();
    let b = ground(&DemonstrationTrace::from_json(&narrated().to_json()).unwrap()).to_json();
    assert_eq!(a, b);
}

fn arb_trace() -> impl Strategy<Value = DemonstrationTrace> {
    let token = (0u32..200, "[a-z]{1,6}").prop_map(|(t, w)| DemoToken { t: t as f64 * 0.1, text: w });
    let event = (0u32..200, 0.0f64..30.0, 0.0f64..20.0, any::<bool>()).prop_map(|(t, x, y, mark)| DemoEvent {
        t: t as f64 * 0.1,
        payload: if mark {
            EventPayload::Annotation { x, y }
        } else {
            EventPayload::Action { verb: "pass".into(), actor: "teammate".into(), object: "user".into() }
        },
    });
    (prop::collection::vec(token, 0..40), prop::collection::vec(event, 0..10)).prop_map(|(tokens, events)| {
        let mut t = DemonstrationTrace { id: "p".into(), scenario_id: "lure".into(), dt: 0.1, tokens, events, snapshots: vec![] };
        t.sort_stable();
        t
    })
}

proptest! {
    #[test]
    fn segments_keep_time_order_and_count(trace in arb_trace()) {
        let g = ground(&trace);
        prop_assert_eq!(g.segments.len(), trace.tokens.len() + trace.events.len());
        prop_assert!(g.segments.windows(2).all(|w| w[0].t <= w[1].t));
        // tokens keep their relative order, as do events
        let toks: Vec<&str> = g.segments.iter().filter(|s| s.kind == SegmentKind::Token).map(|s| s.text.as_str()).collect();
        let src: Vec<&str> = trace.tokens.iter().map(|t| t.text.as_str()).collect();
        prop_assert_eq!(toks, src);
        let evs: Vec<usize> = g.segments.iter().filter_map(|s| s.source_event).collect();
        prop_assert_eq!(evs, (0..trace.events.len()).collect::<Vec<_>>());
        prop_assert_eq!(ground(&trace), g);
    }
}

fn lure_trace() -> tacticforge_core::domain::ExecutionTrace {
    let p = parse(fixtures::LURE, &ApiRegistry::soccer()).unwrap();
    run(&p, &fixtures::scenario("lure_hold").unwrap(), 0, 600)
}

fn execution_feedback(pause: u64) -> FeedbackSession {
    FeedbackSession {
        kind: FeedbackKind::Execution,
        annotated: vec![],
        trace_id: None,
        pauses: vec![pause],
        marks: vec![Mark { tick: pause, x: 21.0, y: 10.0 }],
        text: "go further right".into(),
        text_tick: None,
    }
}

#[test]
fn execution_feedback_interleaves_with_speaks() {
    let trace = lure_trace();
    let fb = execution_feedback(40);
    let g = ground_feedback(&trace, &fb).unwrap();
    assert_eq!(g.segments.len(), trace.speaks.len() + 3 + fb.pauses.len() + fb.marks.len());
    let text = render(&g);
    // the typed words sort ahead of events that share their tick
    assert!(text.contains("[system said: Ask your teammate for the ball.] go further right [user paused at tick 40] [user marked coordinate (21.0, 10.0)] [system said: The defender"), "{text}");
}

#[test]
fn execution_feedback_past_the_run_is_rejected() {
    let trace = lure_trace();
    let last = trace.states.last().unwrap().tick;
    let err = ground_feedback(&trace, &execution_feedback(last + 1)).unwrap_err();
    assert_eq!(err, GroundingError::TickOutOfRange { tick: last + 1, last });
}

#[test]
fn flow_feedback_names_the_selected_node() {
    let p = parse(fixtures::LURE_DETOUR, &ApiRegistry::soccer()).unwrap();
    let flow = extract_flow(&compile(&p));
    let node = flow.nodes.iter().find(|n| n.label == "moveto(goal)").unwrap();
    let fb = FeedbackSession::flow(&[node.id.as_str()], "don't move to the goal");
    let text = render(&ground_flow_feedback(&flow, &fb).unwrap());
    assert_eq!(text, format!("[user annotated node {}: moveto(goal)] don't move to the goal", node.id));
    let bad = FeedbackSession::flow(&["s99"], "x");
    assert_eq!(ground_flow_feedback(&flow, &bad).unwrap_err(), GroundingError::UnknownElement("s99".into()));
}
