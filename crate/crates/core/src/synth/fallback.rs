//! Deterministic synthesizer: common prefix across demonstrations becomes a
//! straight line, the first divergence becomes an `if` on the recorded
//! condition hints, and each side recurses.

use crate::constraint::{canonical_string, Arg, Call, CondExpr, Span};
use crate::domain::{DemonstrationTrace, EventPayload, Point};
use crate::dsl::{parse_condition, print, ApiRegistry, Behavior, BehaviorProgram, Block, Branch, Stmt};

use super::{validate, SynthError};

/// Spread of each demonstrated spot in a generalized MoveTo target.
pub const FALLBACK_SIGMA: f64 = 1.5;
/// Narration within this many seconds of an action becomes its Speak.
pub const SPEAK_WINDOW: f64 = 2.0;

const AVATAR: &str = "user";

#[derive(Debug, Clone)]
struct Step {
    t: f64,
    key: String,
    stmt: Stmt,
    spot: Option<Point>,
}

fn parse_point(s: &str) -> Option<Point> {
    let inner = s.trim().strip_prefix('(')?.strip_suffix(')')?;
    let (x, y) = inner.split_once(',')?;
    Some(Point::new(x.trim().parse().ok()?, y.trim().parse().ok()?))
}

fn do_stmt(name: &str, args: Vec<Arg>) -> Stmt {
    Stmt::Do { call: Call::new(name, args), until: None, span: Span::default() }
}

fn steps_of(demo: &DemonstrationTrace, reg: &ApiRegistry) -> Vec<Step> {
    let annotations: Vec<(f64, Point)> = demo
        .events
        .iter()
        .filter_map(|e| match e.payload {
            EventPayload::Annotation { x, y } => Some((e.t, Point::new(x, y))),
            _ => None,
        })
        .collect();
    let mut out = Vec::new();
    for (t, verb, actor, object) in demo.actions() {
        let step = |key: String, stmt: Stmt| Step { t, key, stmt, spot: None };
        if actor != AVATAR {
            if verb == "pass" && object == AVATAR {
                let cond = CondExpr::call("HasPossession", vec![Arg::name("self")]);
                out.push(step("receive".into(), Stmt::Wait { cond, span: Span::default() }));
            }
            continue;
        }
        match verb {
            "move" => {
                let marked = annotations
                    .iter()
                    .filter(|(at, _)| (at - t).abs() <= SPEAK_WINDOW)
                    .min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs()))
                    .map(|(_, p)| *p);
                let mut s = step("move".into(), do_stmt("MoveTo", vec![]));
                s.spot = marked.or_else(|| parse_point(object));
                if s.spot.is_some() {
                    out.push(s);
                }
            }
            "call_for_ball" => out.push(step("call_for_ball".into(), do_stmt("TriggerTeammatePass", vec![]))),
            "pass" => out.push(step(format!("pass:{object}"), do_stmt("Pass", vec![Arg::name(object)]))),
            "shoot" => out.push(step("shoot".into(), do_stmt("Shoot", vec![Arg::name("goal")]))),
            other => {
                if let Some(sig) = reg.action(other) {
                    let args = if object.is_empty() || sig.max_arity() == 0 { vec![] } else { vec![Arg::name(object)] };
                    out.push(step(format!("{other}:{object}"), do_stmt(&sig.name, args)));
                }
            }
        }
    }
    out
}

fn narration(demo: &DemonstrationTrace, t: f64) -> String {
    demo.tokens
        .iter()
        .filter(|tok| (tok.t - t).abs() <= SPEAK_WINDOW)
        .map(|tok| tok.text.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

fn move_target(spots: &[Point]) -> Arg {
    let mut spots = spots.to_vec();
    spots.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    spots.dedup_by(|a, b| a.dist(*b) < 1e-9);
    let leaves: Vec<CondExpr> = spots
        .iter()
        .map(|p| {
            CondExpr::call("NearPoint", vec![Arg::name("self"), Arg::point(p.x, p.y), Arg::num(FALLBACK_SIGMA)])
        })
        .collect();
    let expr = if leaves.len() == 1 { leaves.into_iter().next().unwrap() } else { CondExpr::or(leaves) };
    Arg::sample(expr)
}

struct Demo<'a> {
    trace: &'a DemonstrationTrace,
    steps: Vec<Step>,
}

fn hint(d: &Demo, after: f64, until: f64, reg: &ApiRegistry) -> Result<CondExpr, SynthError> {
    let found = d
        .trace
        .events
        .iter()
        .filter(|e| e.t > after && e.t <= until)
        .filter_map(|e| match &e.payload {
            EventPayload::ConditionHint { expr, value } => Some((expr, *value)),
            _ => None,
        })
        .last()
        .ok_or(SynthError::AmbiguousBranch)?;
    let cond = parse_condition(found.0, reg)
        .map_err(|e| SynthError::BadHint { expr: found.0.clone(), message: e.to_string() })?;
    Ok(if found.1 { cond } else { CondExpr::not(cond) })
}

fn build(demos: &[&Demo], mut at: usize, reg: &ApiRegistry) -> Result<Block, SynthError> {
    let mut block = Block::new();
    loop {
        let keys: Vec<Option<&str>> = demos.iter().map(|d| d.steps.get(at).map(|s| s.key.as_str())).collect();
        let common = keys[0].is_some() && keys.iter().all(|k| *k == keys[0]);
        if !common {
            break;
        }
        let lead = &demos[0].steps[at];
        let mut stmt = lead.stmt.clone();
        if lead.key == "move" {
            let spots: Vec<Point> = demos.iter().filter_map(|d| d.steps[at].spot).collect();
            if let Stmt::Do { call, .. } = &mut stmt {
                call.args = vec![move_target(&spots)];
            }
        }
        if matches!(stmt, Stmt::Do { .. }) {
            let text = narration(demos[0].trace, lead.t);
            if !text.is_empty() {
                block.push(Stmt::Speak { text, span: Span::default() });
            }
        }
        block.push(stmt);
        at += 1;
    }
    if demos.iter().all(|d| d.steps.len() <= at) {
        return Ok(block);
    }

    // partition by the divergent step, keeping first-seen order
    let mut groups: Vec<(Option<String>, Vec<&Demo>)> = Vec::new();
    for d in demos {
        let k = d.steps.get(at).map(|s| s.key.clone());
        match groups.iter_mut().find(|(g, _)| *g == k) {
            Some((_, v)) => v.push(d),
            None => groups.push((k, vec![d])),
        }
    }
    let mut arms = Vec::new();
    for (_, members) in &groups {
        let d = members[0];
        let after = if at == 0 { f64::NEG_INFINITY } else { d.steps[at - 1].t };
        let until = d.steps.get(at).map(|s| s.t).unwrap_or(f64::INFINITY);
        let guard = hint(d, after, until, reg)?;
        let body = if d.steps.len() <= at {
            vec![Stmt::Terminate { span: Span::default() }]
        } else {
            build(members, at, reg)?
        };
        arms.push((canonical_string(&guard), guard, body));
    }
    arms.sort_by(|a, b| a.0.cmp(&b.0));

    let complementary = arms.len() == 2
        && (arms[1].0 == canonical_string(&CondExpr::not(arms[0].1.clone()))
            || arms[0].0 == canonical_string(&CondExpr::not(arms[1].1.clone())));
    let stmt = if complementary {
        // the positive guard leads; the negated one becomes the else
        let neg = if matches!(arms[0].1, CondExpr::Not(..)) { 0 } else { 1 };
        let other = arms.remove(neg);
        let pos = arms.remove(0);
        Stmt::If {
            branches: vec![Branch { cond: pos.1, body: pos.2, span: Span::default() }],
            otherwise: Some(other.2),
            span: Span::default(),
        }
    } else {
        Stmt::If {
            branches: arms.into_iter().map(|(_, cond, body)| Branch { cond, body, span: Span::default() }).collect(),
            otherwise: None,
            span: Span::default(),
        }
    };
    block.push(stmt);
    Ok(block)
}

pub fn fallback_synthesize(demos: &[DemonstrationTrace], reg: &ApiRegistry) -> Result<BehaviorProgram, SynthError> {
    let first = demos.first().ok_or(SynthError::NoDemonstrations)?;
    if demos.iter().any(|d| d.scenario_id != first.scenario_id) {
        return Err(SynthError::MixedScenarios);
    }
    let prepared: Vec<Demo> = demos.iter().map(|d| Demo { trace: d, steps: steps_of(d, reg) }).collect();
    let refs: Vec<&Demo> = prepared.iter().collect();
    let body = build(&refs, 0, reg)?;
    if body.is_empty() {
        return Err(SynthError::Invalid("demonstrations contain no actions".into()));
    }
    let program = BehaviorProgram {
        behaviors: vec![Behavior { name: "Demonstrated".into(), params: vec![], body, span: Span::default() }],
    };
    validate(&print(&program), reg).map_err(SynthError::Invalid)
}
