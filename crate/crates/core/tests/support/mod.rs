//! Shared test rigs: a random program generator, a deterministic toy plant
//! and an independent tree-walking interpreter used as the FSM oracle.
#![allow(dead_code)]

use std::collections::hash_map::DefaultHasher;
use std::collections::HashSet;
use std::hash::{Hash, Hasher};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tacticforge_core::constraint::{canonical_call, Arg, Call, CondExpr, Evaluator, Span};
use tacticforge_core::domain::{ResolvedArg, Termination};
use tacticforge_core::dsl::{parse, print, ApiRegistry, Behavior, BehaviorProgram, Block, Branch, Stmt};
use tacticforge_core::fsm::{ActionProgress, Plant, RunConfig, RunLog};

pub fn hash_of(parts: &impl Hash) -> u64 {
    let mut h = DefaultHasher::new();
    parts.hash(&mut h);
    h.finish()
}

// ---------------------------------------------------------------- programs

const LEAVES: [&str; 5] = ["has_self", "has_mate", "close", "left", "near"];

fn leaf(rng: &mut ChaCha8Rng) -> CondExpr {
    let s = |n: &str| Arg::name(n);
    match LEAVES[rng.gen_range(0..LEAVES.len())] {
        "has_self" => CondExpr::call("HasPossession", vec![s("self")]),
        "has_mate" => CondExpr::call("HasPossession", vec![s("teammate")]),
        "close" => CondExpr::call("DistanceTo", vec![s("opponent"), s("self"), Arg::num(3.0), Arg::text("<")]),
        "left" => CondExpr::call("SideOf", vec![s("self"), s("opponent"), s("horizontal"), s("left")]),
        _ => CondExpr::call("NearPoint", vec![s("self"), Arg::point(10.0, 5.0), Arg::num(2.0)]),
    }
}

pub fn random_cond(rng: &mut ChaCha8Rng, depth: u32) -> CondExpr {
    let roll = rng.gen_range(0..10);
    if depth == 0 || roll < 5 {
        return match rng.gen_range(0..12) {
            0 => CondExpr::truth(),
            1 => CondExpr::Const(false, Span::default()),
            _ => leaf(rng),
        };
    }
    match roll {
        5 | 6 => CondExpr::not(random_cond(rng, depth - 1)),
        7 | 8 => CondExpr::and((0..rng.gen_range(2..4)).map(|_| random_cond(rng, depth - 1)).collect()),
        _ => CondExpr::or((0..rng.gen_range(2..4)).map(|_| random_cond(rng, depth - 1)).collect()),
    }
}

fn random_action(rng: &mut ChaCha8Rng) -> Call {
    match rng.gen_range(0..4) {
        0 => Call::new("MoveTo", vec![Arg::point(rng.gen_range(1..29) as f64, rng.gen_range(1..19) as f64)]),
        1 => Call::new("Pass", vec![Arg::name("teammate")]),
        2 => Call::new("Shoot", vec![Arg::name("goal")]),
        _ => Call::new("TriggerTeammatePass", vec![]),
    }
}

const WORDS: [&str; 8] = ["go", "wide", "now", "hold", "press", "shoot", "back", "left"];

fn random_block(rng: &mut ChaCha8Rng, depth: u32) -> Block {
    let n = rng.gen_range(1..5);
    let sp = Span::default;
    (0..n)
        .map(|_| {
            let roll = if depth == 0 { rng.gen_range(0..6) } else { rng.gen_range(0..10) };
            match roll {
                0..=2 => Stmt::Do {
                    call: random_action(rng),
                    until: rng.gen_bool(0.3).then(|| random_cond(rng, 1)),
                    span: sp(),
                },
                3 => Stmt::Wait { cond: random_cond(rng, 2), span: sp() },
                4 | 5 => {
                    let words: Vec<&str> = (0..rng.gen_range(1..8)).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect();
                    Stmt::Speak { text: words.join(" "), span: sp() }
                }
                6 | 7 => Stmt::If {
                    branches: (0..rng.gen_range(1..3))
                        .map(|_| Branch { cond: random_cond(rng, 2), body: random_block(rng, depth - 1), span: sp() })
                        .collect(),
                    otherwise: rng.gen_bool(0.5).then(|| random_block(rng, depth - 1)),
                    span: sp(),
                },
                8 => Stmt::While { cond: random_cond(rng, 2), body: random_block(rng, depth - 1), span: sp() },
                _ => {
                    if rng.gen_bool(0.3) {
                        Stmt::Terminate { span: sp() }
                    } else {
                        Stmt::Wait { cond: random_cond(rng, 1), span: sp() }
                    }
                }
            }
        })
        .collect()
}

/// A random well-formed soccer program, reparsed so spans are real.
pub fn random_program(seed: u64) -> BehaviorProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let body = random_block(&mut rng, 3);
    let p = BehaviorProgram {
        behaviors: vec![Behavior { name: "Random".into(), params: vec![], body, span: Span::default() }],
    };
    let text = print(&p);
    parse(&text, &ApiRegistry::soccer()).unwrap_or_else(|e| panic!("generated program fails to parse: {e}\n{text}"))
}

// ------------------------------------------------------------------- plant

/// Leaf truth is a hash of (seed, tick, leaf); actions finish after a
/// hashed number of ticks. Nothing about the world is physical.
#[derive(Debug, Clone)]
pub struct ToyPlant {
    pub seed: u64,
    pub tick: u64,
    pub running: Option<(String, u64, u64)>,
    pub calls: Vec<String>,
}

impl ToyPlant {
    pub fn new(seed: u64) -> Self {
        ToyPlant { seed, tick: 0, running: None, calls: vec![] }
    }
}

impl Evaluator for ToyPlant {
    fn eval_call(&self, call: &Call) -> Result<bool, String> {
        Ok(hash_of(&(self.seed, self.tick, canonical_call(call))) % 100 < 45)
    }
}

impl Plant for ToyPlant {
    fn tick(&self) -> u64 {
        self.tick
    }

    fn evaluator(&self) -> &dyn Evaluator {
        self
    }

    fn progress(&self) -> ActionProgress {
        match &self.running {
            None => ActionProgress::Idle,
            Some((_, start, dur)) if self.tick < start + dur => ActionProgress::Running,
            Some(_) => ActionProgress::Done(tacticforge_core::domain::ActionStatus::Completed, None),
        }
    }

    fn start(&mut self, call: &Call) -> Result<Vec<ResolvedArg>, String> {
        let c = canonical_call(call);
        let dur = 1 + hash_of(&(self.seed, self.tick, &c)) % 6;
        self.calls.push(format!("start {c}@{}", self.tick));
        self.running = Some((c, self.tick, dur));
        Ok(vec![])
    }

    fn stop(&mut self) {
        self.running = None;
    }

    fn advance(&mut self) -> Result<(), String> {
        self.tick += 1;
        Ok(())
    }

    fn freeze(&mut self, ticks: u32) {
        self.tick += ticks as u64;
    }
}

// ------------------------------------------------------------ tree walker

#[derive(Debug, Clone, PartialEq)]
pub enum Ev {
    Start(u64, String),
    Speak(u64, String),
    End(String, u64),
}

fn end_of(t: &Termination) -> Ev {
    let kind = match t {
        Termination::Completed { .. } => "completed",
        Termination::MaxTicks { .. } => "max_ticks",
        Termination::Deadlock { .. } => "deadlock",
        Termination::Aborted { .. } => "aborted",
    };
    Ev::End(kind.into(), t.tick())
}

/// Flattens an FSM run log into the comparison sequence.
pub fn log_events(log: &RunLog) -> Vec<Ev> {
    let mut evs: Vec<(u64, u8, usize, Ev)> = Vec::new();
    for (i, a) in log.actions.iter().enumerate() {
        evs.push((a.tick, 1, i, Ev::Start(a.tick, a.action.clone())));
    }
    for (i, s) in log.speaks.iter().enumerate() {
        evs.push((s.tick, 0, i, Ev::Speak(s.tick, s.text.clone())));
    }
    evs.sort_by_key(|e| (e.0, e.1, e.2));
    let mut out: Vec<Ev> = evs.into_iter().map(|e| e.3).collect();
    out.push(end_of(&log.termination));
    out
}

fn eval(e: &CondExpr, ev: &dyn Evaluator) -> bool {
    match e {
        CondExpr::Const(b, _) => *b,
        CondExpr::Call(c) => ev.eval_call(c).expect("toy evaluator is total"),
        CondExpr::Not(x, _) => !eval(x, ev),
        CondExpr::And(xs, _) => xs.iter().all(|x| eval(x, ev)),
        CondExpr::Or(xs, _) => xs.iter().any(|x| eval(x, ev)),
    }
}

struct Frame<'a> {
    block: &'a Block,
    at: usize,
    /// Body of the While at the parent frame's position.
    loop_body: bool,
}

enum Outcome {
    Start(Call),
    Continue,
    Idle,
    Blocked,
    Done,
}

struct Walker<'a> {
    frames: Vec<Frame<'a>>,
    acting: Option<Option<&'a CondExpr>>,
}

impl<'a> Walker<'a> {
    /// The statement the walk is positioned at, unwinding finished blocks.
    fn current(&mut self) -> Option<&'a Stmt> {
        loop {
            let top = self.frames.last()?;
            if top.at < top.block.len() {
                return Some(&top.block[top.at]);
            }
            let done = self.frames.pop().unwrap();
            // a finished loop body leaves the parent on the While itself
            if !done.loop_body {
                if let Some(parent) = self.frames.last_mut() {
                    parent.at += 1;
                }
            }
        }
    }

    fn advance(&mut self) {
        self.frames.last_mut().unwrap().at += 1;
    }

    /// One tick: the outcome, the speaks passed, and whether anything moved
    /// (an interrupt, a completion or a resolved control statement).
    fn step(&mut self, ev: &dyn Evaluator, action_done: bool) -> (Outcome, Vec<String>, bool) {
        let mut speaks = Vec::new();
        let mut moved = false;
        let mut visited: HashSet<*const Stmt> = HashSet::new();

        if let Some(until) = self.acting {
            let interrupted = until.map(|u| eval(u, ev)).unwrap_or(false);
            if !interrupted && !action_done {
                return (Outcome::Continue, speaks, false);
            }
            moved = true;
            self.acting = None;
            self.advance();
        }

        loop {
            let Some(s) = self.current() else { return (Outcome::Done, speaks, moved) };
            match s {
                Stmt::Speak { text, .. } => {
                    speaks.push(text.clone());
                    self.advance();
                }
                Stmt::Terminate { .. } => return (Outcome::Done, speaks, moved),
                Stmt::Do { call, until, .. } => {
                    self.acting = Some(until.as_ref());
                    return (Outcome::Start(call.clone()), speaks, moved);
                }
                Stmt::Wait { cond, .. } => {
                    if !visited.insert(s as *const Stmt) {
                        return (Outcome::Idle, speaks, moved);
                    }
                    if !eval(cond, ev) {
                        return (Outcome::Blocked, speaks, moved);
                    }
                    self.advance();
                    moved = true;
                }
                Stmt::If { branches, otherwise, .. } => {
                    if !visited.insert(s as *const Stmt) {
                        return (Outcome::Idle, speaks, moved);
                    }
                    let body = branches.iter().find(|b| eval(&b.cond, ev)).map(|b| &b.body).or(otherwise.as_ref());
                    match body {
                        Some(b) => self.frames.push(Frame { block: b, at: 0, loop_body: false }),
                        None => self.advance(),
                    }
                    moved = true;
                }
                Stmt::While { cond, body, .. } => {
                    if !visited.insert(s as *const Stmt) {
                        return (Outcome::Idle, speaks, moved);
                    }
                    if eval(cond, ev) {
                        self.frames.push(Frame { block: body, at: 0, loop_body: true });
                    } else {
                        self.advance();
                    }
                    moved = true;
                }
            }
        }
    }
}

/// Runs the entry behavior directly off the syntax tree, with the same tick
/// contract as the compiled machine, and records the comparison sequence.
pub fn walk(program: &BehaviorProgram, plant: &mut dyn Plant, cfg: &RunConfig) -> Vec<Ev> {
    let mut w = Walker { frames: vec![Frame { block: &program.entry().body, at: 0, loop_body: false }], acting: None };
    let mut out = Vec::new();
    let mut blocked_since: Option<u64> = None;
    let mut first = true;
    loop {
        let tick = plant.tick();
        if tick >= cfg.max_ticks {
            out.push(Ev::End("max_ticks".into(), tick));
            return out;
        }
        let done = w.acting.is_some() && matches!(plant.progress(), ActionProgress::Done(..));
        let (outcome, speaks, moved) = w.step(plant.evaluator(), done);
        let mut freeze = 0;
        for s in speaks {
            freeze += (s.split_whitespace().count() as u32).div_ceil(3);
            out.push(Ev::Speak(tick, s));
        }
        match &outcome {
            Outcome::Start(call) => {
                plant.stop();
                plant.start(call).expect("toy plant accepts everything");
                out.push(Ev::Start(tick, call.name.clone()));
            }
            Outcome::Continue => {}
            _ => plant.stop(),
        }
        if matches!(outcome, Outcome::Blocked) {
            let since = if moved || first { tick } else { blocked_since.unwrap_or(tick) };
            blocked_since = Some(since);
            if tick + 1 >= since + cfg.window.max(1) {
                out.push(Ev::End("deadlock".into(), tick));
                return out;
            }
        } else {
            blocked_since = None;
        }
        if matches!(outcome, Outcome::Done) {
            out.push(Ev::End("completed".into(), tick));
            return out;
        }
        first = false;
        plant.advance().expect("toy plant advances");
        if freeze > 0 {
            plant.freeze(freeze);
        }
    }
}

// ----------------------------------------------------------------- goldens

/// Compares `actual` with a file under `fixtures/golden`; `UPDATE_GOLDEN=1`
/// rewrites it first.
pub fn golden(name: &str, actual: &str) {
    let path = format!("{}/fixtures/golden/{name}", env!("CARGO_MANIFEST_DIR"));
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    assert!(expected == actual, "{name} drifted from its golden file");
}

pub fn fixture_text(rel: &str) -> String {
    let path = format!("{}/fixtures/{rel}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}
