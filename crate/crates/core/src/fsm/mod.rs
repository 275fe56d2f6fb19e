//! Hierarchical, interrupt-driven state machine compiled from a behavior.
//!
//! Each action state owns an acting sub-state and a waiting sub-state. The
//! interrupt condition moves acting to waiting, as does the completion
//! signal; guard edges leave from waiting.

mod runner;
mod step;

pub use runner::{freeze_ticks, run, ActionProgress, Plant, RunConfig, RunLog, DEFAULT_DEADLOCK_WINDOW};
pub use step::{detect_deadlock, eval_guard, log_line, step, Command, FireKind, Fired, Signal, StepOutcome};

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraint::{canonical_call, canonical_string, Call, CondExpr};
use crate::domain::GuardReport;
use crate::dsl::{BehaviorProgram, Block, Stmt};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FsmError {
    #[error("evaluation failed in state {state} ({label}): {message}")]
    Eval { state: usize, label: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakPayload {
    pub text: String,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StateKind {
    Action { call: Call, until: Option<CondExpr> },
    Wait,
    Branch,
    Loop,
    Terminal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsmState {
    pub id: usize,
    /// Unique within the machine.
    pub label: String,
    pub kind: StateKind,
    pub line: u32,
}

impl FsmState {
    pub fn is_action(&self) -> bool {
        matches!(self.kind, StateKind::Action { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub guard: CondExpr,
    /// Speak lines emitted when this edge fires, in program order.
    pub speaks: Vec<SpeakPayload>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fsm {
    pub states: Vec<FsmState>,
    /// Grouped by source, declaration order within a source.
    pub edges: Vec<Edge>,
    pub entry: usize,
    pub entry_speaks: Vec<SpeakPayload>,
    pub terminal: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubState {
    Acting,
    Waiting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsmCursor {
    pub state: usize,
    pub sub: SubState,
    pub ticks_in_state: u64,
    pub wait_entry_tick: Option<u64>,
    pub started: bool,
    /// First tick of the current run of all-false guard evaluations.
    pub blocked_since: Option<u64>,
    pub last_evaluations: Vec<GuardReport>,
}

impl FsmCursor {
    pub fn new(fsm: &Fsm) -> Self {
        FsmCursor {
            state: fsm.entry,
            sub: SubState::Waiting,
            ticks_in_state: 0,
            wait_entry_tick: None,
            started: false,
            blocked_since: None,
            last_evaluations: Vec::new(),
        }
    }
}

impl Fsm {
    pub fn outgoing(&self, state: usize) -> impl Iterator<Item = (usize, &Edge)> {
        self.edges.iter().enumerate().filter(move |(_, e)| e.src == state)
    }

    pub fn incoming(&self, state: usize) -> impl Iterator<Item = (usize, &Edge)> {
        self.edges.iter().enumerate().filter(move |(_, e)| e.dst == state)
    }

    pub fn action_count(&self) -> usize {
        self.states.iter().filter(|s| s.is_action()).count()
    }

    /// Every Speak payload in the machine.
    pub fn speaks(&self) -> Vec<&SpeakPayload> {
        self.entry_speaks.iter().chain(self.edges.iter().flat_map(|e| &e.speaks)).collect()
    }
}

struct Builder {
    states: Vec<(StateKind, u32)>,
    edges: Vec<Edge>,
    terminal: usize,
}

struct Cont {
    state: usize,
    speaks: Vec<SpeakPayload>,
}

impl Builder {
    fn add(&mut self, kind: StateKind, line: u32) -> usize {
        self.states.push((kind, line));
        self.states.len() - 1
    }

    fn edge(&mut self, src: usize, guard: CondExpr, to: &Cont) {
        self.edges.push(Edge { src, dst: to.state, guard, speaks: to.speaks.clone() });
    }

    fn block(&mut self, block: &Block, next: Cont) -> Cont {
        let mut k = next;
        for s in block.iter().rev() {
            k = self.stmt(s, k);
        }
        k
    }

    fn stmt(&mut self, s: &Stmt, k: Cont) -> Cont {
        let line = s.span().line;
        let fresh = |state| Cont { state, speaks: Vec::new() };
        match s {
            Stmt::Speak { text, .. } => {
                let mut speaks = vec![SpeakPayload { text: text.clone(), line }];
                speaks.extend(k.speaks);
                Cont { state: k.state, speaks }
            }
            Stmt::Do { call, until, .. } => {
                let a = self.add(StateKind::Action { call: call.clone(), until: until.clone() }, line);
                self.edge(a, CondExpr::truth(), &k);
                fresh(a)
            }
            Stmt::Wait { cond, .. } => {
                let w = self.add(StateKind::Wait, line);
                self.edge(w, cond.clone(), &k);
                fresh(w)
            }
            Stmt::Terminate { .. } => fresh(self.terminal),
            Stmt::If { branches, otherwise, .. } => {
                let b = self.add(StateKind::Branch, line);
                let mut entries = Vec::new();
                for br in branches {
                    let c = self.block(&br.body, Cont { state: k.state, speaks: k.speaks.clone() });
                    entries.push((br.cond.clone(), c));
                }
                let negated: Vec<CondExpr> = branches.iter().map(|br| CondExpr::not(br.cond.clone())).collect();
                let rest_guard = if negated.len() == 1 {
                    negated.into_iter().next().unwrap()
                } else {
                    CondExpr::and(negated)
                };
                let rest = match otherwise {
                    Some(o) => self.block(o, k),
                    None => k,
                };
                for (cond, c) in entries {
                    self.edge(b, cond, &c);
                }
                self.edge(b, rest_guard, &rest);
                fresh(b)
            }
            Stmt::While { cond, body, .. } => {
                let l = self.add(StateKind::Loop, line);
                let inner = self.block(body, fresh(l));
                self.edge(l, cond.clone(), &inner);
                if !cond.is_true_literal() {
                    self.edge(l, CondExpr::not(cond.clone()), &k);
                }
                fresh(l)
            }
        }
    }
}

/// Compiles the entry behavior. Total over programs that parsed against a
/// registry; unreachable states are dropped and ids renumbered breadth-first.
pub fn compile(program: &BehaviorProgram) -> Fsm {
    let mut b = Builder { states: Vec::new(), edges: Vec::new(), terminal: 0 };
    b.terminal = b.add(StateKind::Terminal, 0);
    let entry = b.block(&program.entry().body, Cont { state: 0, speaks: Vec::new() });

    // bodies are built before their parents, so group by source; pushes for
    // one source are contiguous and already in declaration order
    let mut by_src: HashMap<usize, Vec<Edge>> = HashMap::new();
    for e in b.edges {
        by_src.entry(e.src).or_default().push(e);
    }

    let mut order = Vec::new();
    let mut index: HashMap<usize, usize> = HashMap::new();
    let mut queue = VecDeque::from([entry.state]);
    index.insert(entry.state, 0);
    while let Some(s) = queue.pop_front() {
        order.push(s);
        for e in by_src.get(&s).into_iter().flatten() {
            if !index.contains_key(&e.dst) {
                index.insert(e.dst, index.len());
                queue.push_back(e.dst);
            }
        }
    }

    let mut states = Vec::new();
    let mut edges = Vec::new();
    for (new_id, old) in order.iter().enumerate() {
        let (kind, line) = b.states[*old].clone();
        let label = format!("s{new_id}:{}", kind_label(&kind));
        states.push(FsmState { id: new_id, label, kind, line });
        for e in by_src.get(old).into_iter().flatten() {
            edges.push(Edge { src: new_id, dst: index[&e.dst], guard: e.guard.clone(), speaks: e.speaks.clone() });
        }
    }
    Fsm {
        states,
        edges,
        entry: 0,
        entry_speaks: entry.speaks,
        terminal: index.get(&b.terminal).copied(),
    }
}

/// Canonical node label: the action with canonical args, or the state kind.
pub fn kind_label(kind: &StateKind) -> String {
    match kind {
        StateKind::Action { call, .. } => canonical_call(call),
        StateKind::Wait => "wait()".into(),
        StateKind::Branch => "branch".into(),
        StateKind::Loop => "loop".into(),
        StateKind::Terminal => "end".into(),
    }
}

pub fn guard_label(e: &Edge) -> String {
    canonical_string(&e.guard)
}
