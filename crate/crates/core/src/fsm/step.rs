use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{Fsm, FsmCursor, FsmError, SpeakPayload, StateKind, SubState};
use crate::constraint::{canonical_call, canonical_string, Call, CondExpr, Evaluator};
use crate::domain::{DeadlockReport, GuardReport, LeafValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Signal {
    pub tick: u64,
    /// The running action reported completion (any final status).
    pub action_done: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Command {
    Start(Call),
    Continue,
    Idle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FireKind {
    Interrupt,
    Completion,
    Guard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fired {
    pub kind: FireKind,
    pub from: usize,
    /// Index into `fsm.edges` for guard edges.
    pub edge: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub command: Command,
    pub speaks: Vec<SpeakPayload>,
    pub fired: Vec<Fired>,
}

/// Evaluates every leaf (no short circuit) so reports carry a full breakdown.
pub fn eval_guard(guard: &CondExpr, ev: &dyn Evaluator) -> Result<GuardReport, String> {
    fn go(e: &CondExpr, ev: &dyn Evaluator, leaves: &mut Vec<LeafValue>) -> Result<bool, String> {
        Ok(match e {
            CondExpr::Const(b, _) => *b,
            CondExpr::Call(c) => {
                let v = ev.eval_call(c)?;
                leaves.push(LeafValue { leaf: canonical_string(e), value: v });
                v
            }
            CondExpr::Not(inner, _) => !go(inner, ev, leaves)?,
            CondExpr::And(xs, _) => {
                let mut all = true;
                for x in xs {
                    all &= go(x, ev, leaves)?;
                }
                all
            }
            CondExpr::Or(xs, _) => {
                let mut any = false;
                for x in xs {
                    any |= go(x, ev, leaves)?;
                }
                any
            }
        })
    }
    let mut leaves = Vec::new();
    let value = go(guard, ev, &mut leaves)?;
    Ok(GuardReport { guard: canonical_string(guard), value, leaves })
}

fn enter(c: &mut FsmCursor, fsm: &Fsm, state: usize, tick: u64) {
    c.state = state;
    c.ticks_in_state = 0;
    if fsm.states[state].is_action() {
        c.sub = SubState::Acting;
        c.wait_entry_tick = None;
    } else {
        c.sub = SubState::Waiting;
        c.wait_entry_tick = Some(tick);
    }
}

/// Advances the machine by one tick. Order: interrupt of the running action,
/// then its completion, then guard edges in declaration order (first true
/// wins). Wait, branch and loop states resolve within the tick; entering an
/// action, or re-entering a state already visited this tick, ends the tick.
pub fn step(
    fsm: &Fsm,
    cursor: &FsmCursor,
    ev: &dyn Evaluator,
    signal: Signal,
) -> Result<(FsmCursor, StepOutcome), FsmError> {
    let tick = signal.tick;
    let mut c = cursor.clone();
    let mut out = StepOutcome { command: Command::Idle, speaks: Vec::new(), fired: Vec::new() };
    let mut visited = HashSet::new();
    let err = |c: &FsmCursor, message: String| FsmError::Eval {
        state: c.state,
        label: fsm.states[c.state].label.clone(),
        message,
    };
    let mut blocked: Option<Vec<GuardReport>> = None;

    if !c.started {
        c.started = true;
        out.speaks.extend(fsm.entry_speaks.iter().cloned());
        enter(&mut c, fsm, fsm.entry, tick);
        visited.insert(fsm.entry);
        if let StateKind::Action { call, .. } = &fsm.states[fsm.entry].kind {
            out.command = Command::Start(call.clone());
            return Ok(finish(cursor, c, out, None, tick));
        }
    } else {
        c.ticks_in_state += 1;
        visited.insert(c.state);
    }

    loop {
        let state = &fsm.states[c.state];
        match (&state.kind, c.sub) {
            (StateKind::Terminal, _) => {
                out.command = Command::Idle;
                break;
            }
            (StateKind::Action { until, .. }, SubState::Acting) => {
                if let Some(t) = until {
                    let r = eval_guard(t, ev).map_err(|m| err(&c, m))?;
                    if r.value {
                        out.fired.push(Fired { kind: FireKind::Interrupt, from: c.state, edge: None });
                        c.sub = SubState::Waiting;
                        c.wait_entry_tick = Some(tick);
                        continue;
                    }
                }
                if signal.action_done {
                    out.fired.push(Fired { kind: FireKind::Completion, from: c.state, edge: None });
                    c.sub = SubState::Waiting;
                    c.wait_entry_tick = Some(tick);
                    continue;
                }
                out.command = Command::Continue;
                break;
            }
            _ => {
                let mut evals = Vec::new();
                let mut chosen = None;
                for (idx, e) in fsm.outgoing(c.state) {
                    let r = eval_guard(&e.guard, ev).map_err(|m| err(&c, m))?;
                    let hit = r.value;
                    evals.push(r);
                    if hit {
                        chosen = Some(idx);
                        break;
                    }
                }
                let Some(idx) = chosen else {
                    out.command = Command::Idle;
                    blocked = Some(evals);
                    break;
                };
                let e = &fsm.edges[idx];
                out.fired.push(Fired { kind: FireKind::Guard, from: c.state, edge: Some(idx) });
                out.speaks.extend(e.speaks.iter().cloned());
                let revisit = !visited.insert(e.dst);
                enter(&mut c, fsm, e.dst, tick);
                match &fsm.states[e.dst].kind {
                    StateKind::Action { call, .. } => {
                        out.command = Command::Start(call.clone());
                        break;
                    }
                    StateKind::Terminal => {
                        out.command = Command::Idle;
                        break;
                    }
                    _ if revisit => {
                        out.command = Command::Idle;
                        break;
                    }
                    _ => continue,
                }
            }
        }
    }
    Ok(finish(cursor, c, out, blocked, tick))
}

fn finish(
    prev: &FsmCursor,
    mut c: FsmCursor,
    out: StepOutcome,
    blocked: Option<Vec<GuardReport>>,
    tick: u64,
) -> (FsmCursor, StepOutcome) {
    match blocked {
        Some(evals) => {
            let carried = if out.fired.is_empty() && prev.started { prev.blocked_since } else { None };
            c.blocked_since = Some(carried.unwrap_or(tick));
            c.last_evaluations = evals;
        }
        None => {
            c.blocked_since = None;
            c.last_evaluations.clear();
        }
    }
    (c, out)
}

/// Reports a deadlock once the cursor has waited `window` ticks with every
/// outgoing guard false. Running actions never count as blocked.
pub fn detect_deadlock(
    fsm: &Fsm,
    cursor: &FsmCursor,
    recent: &[GuardReport],
    window: u64,
    tick: u64,
) -> Option<DeadlockReport> {
    let window = window.max(1);
    let state = &fsm.states[cursor.state];
    if cursor.sub != SubState::Waiting || matches!(state.kind, StateKind::Terminal) {
        return None;
    }
    let since = cursor.blocked_since?;
    if tick + 1 < since + window {
        return None;
    }
    Some(DeadlockReport {
        state: cursor.state,
        label: state.label.clone(),
        blocked_since: since,
        edges: recent.to_vec(),
    })
}

/// `tick|state|sub|command|fired-edge`
pub fn log_line(tick: u64, fsm: &Fsm, cursor: &FsmCursor, out: &StepOutcome) -> String {
    let sub = match cursor.sub {
        SubState::Acting => "acting",
        SubState::Waiting => "waiting",
    };
    let command = match &out.command {
        Command::Start(call) => format!("start {}", canonical_call(call)),
        Command::Continue => "continue".into(),
        Command::Idle => "idle".into(),
    };
    let fired: Vec<String> = out
        .fired
        .iter()
        .map(|f| match (f.kind, f.edge) {
            (FireKind::Guard, Some(i)) => format!("e{i}"),
            (FireKind::Interrupt, _) => format!("interrupt@s{}", f.from),
            (FireKind::Completion, _) => format!("done@s{}", f.from),
            (FireKind::Guard, None) => "-".into(),
        })
        .collect();
    let fired = if fired.is_empty() { "-".to_string() } else { fired.join(",") };
    format!("{tick}|{}|{sub}|{command}|{fired}", fsm.states[cursor.state].label)
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use crate::dsl::{parse, ApiRegistry};
    use crate::fsm::compile;

    /// Leaf truth table keyed by canonical leaf.
    struct Table(HashMap<String, bool>);

    impl Evaluator for Table {
        fn eval_call(&self, call: &Call) -> Result<bool, String> {
            let key = canonical_string(&CondExpr::Call(call.clone()));
            self.0.get(&key).copied().ok_or(format!("no value for {key}"))
        }
    }

    fn table(pairs: &[(&str, bool)]) -> Table {
        Table(pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect())
    }

    fn machine(src: &str) -> Fsm {
        compile(&parse(src, &ApiRegistry::soccer()).unwrap())
    }

    const INTERRUPT: &str = "behavior B():\n    do MoveTo((20, 10)) until HasPossession(self)\n    do Pass(teammate)\n";

    #[test]
    fn interrupt_moves_past_action_same_tick() {
        let m = machine(INTERRUPT);
        let c0 = FsmCursor::new(&m);
        let quiet = table(&[("haspossession(self)", false)]);
        let (c1, o1) = step(&m, &c0, &quiet, Signal { tick: 0, action_done: false }).unwrap();
        assert!(matches!(o1.command, Command::Start(ref c) if c.name == "MoveTo"));
        let (c2, o2) = step(&m, &c1, &quiet, Signal { tick: 1, action_done: false }).unwrap();
        assert_eq!(o2.command, Command::Continue);
        let hot = table(&[("haspossession(self)", true)]);
        let (_, o3) = step(&m, &c2, &hot, Signal { tick: 2, action_done: true }).unwrap();
        assert_eq!(o3.fired[0].kind, FireKind::Interrupt);
        assert!(matches!(o3.command, Command::Start(ref c) if c.name == "Pass"));
    }

    #[test]
    fn first_declared_edge_wins() {
        let m = machine(
            "behavior B():\n    if HasPossession(self):\n        do Pass(teammate)\n    elif HasPossession(teammate):\n        do TriggerTeammatePass()\n",
        );
        let both = table(&[("haspossession(self)", true), ("haspossession(teammate)", true)]);
        let (_, o) = step(&m, &FsmCursor::new(&m), &both, Signal { tick: 0, action_done: false }).unwrap();
        assert!(matches!(o.command, Command::Start(ref c) if c.name == "Pass"));
    }

    #[test]
    fn terminal_is_idle() {
        let m = machine("behavior B():\n    terminate\n");
        let t = table(&[]);
        let (c1, o1) = step(&m, &FsmCursor::new(&m), &t, Signal { tick: 0, action_done: false }).unwrap();
        assert_eq!(o1.command, Command::Idle);
        let (_, o2) = step(&m, &c1, &t, Signal { tick: 1, action_done: false }).unwrap();
        assert_eq!(o2.command, Command::Idle);
        assert!(o2.fired.is_empty());
    }

    fn run_blocked(m: &Fsm, t: &Table, ticks: u64, window: u64) -> Option<(u64, DeadlockReport)> {
        let mut c = FsmCursor::new(m);
        for tick in 0..ticks {
            let (next, _) = step(m, &c, t, Signal { tick, action_done: false }).unwrap();
            c = next;
            if let Some(r) = detect_deadlock(m, &c, &c.last_evaluations, window, tick) {
                return Some((tick, r));
            }
        }
        None
    }

    #[test]
    fn deadlock_after_window() {
        let m = machine("behavior B():\n    do Wait() until DistanceTo(opponent, self, 1, \"<\")\n");
        let t = table(&[("distanceto(opponent,self,<,1.000)", false)]);
        let (tick, r) = run_blocked(&m, &t, 200, 50).unwrap();
        assert_eq!(tick, 49);
        assert_eq!(r.blocked_since, 0);
        assert_eq!(r.edges[0].guard, "distanceto(opponent,self,<,1.000)");
        assert_eq!(r.edges[0].leaves[0].value, false);
    }

    #[test]
    fn running_action_is_not_deadlock() {
        let m = machine("behavior B():\n    do MoveTo((1, 1))\n");
        assert!(run_blocked(&m, &table(&[]), 300, 50).is_none());
    }

    #[test]
    fn log_line_shape() {
        let m = machine(INTERRUPT);
        let c0 = FsmCursor::new(&m);
        let t = table(&[("haspossession(self)", false)]);
        let (c1, o1) = step(&m, &c0, &t, Signal { tick: 0, action_done: false }).unwrap();
        assert_eq!(log_line(0, &m, &c1, &o1), "0|s0:moveto((20.000,10.000))|acting|start moveto((20.000,10.000))|-");
    }
}
