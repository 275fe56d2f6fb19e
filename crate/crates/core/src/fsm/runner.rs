use crate::constraint::{canonical_call, Call, Evaluator};
use crate::domain::{ActionRecord, ActionStatus, ResolvedArg, SpeakRecord, Termination};

use super::step::{detect_deadlock, log_line, step, Command, FireKind, Signal};
use super::{Fsm, FsmCursor, StateKind};

pub const DEFAULT_DEADLOCK_WINDOW: u64 = 100;

#[derive(Debug, Clone, PartialEq)]
pub enum ActionProgress {
    Idle,
    Running,
    Done(ActionStatus, Option<String>),
}

/// The world an FSM drives: a soccer arena, a manufacturing cell, a test rig.
pub trait Plant {
    fn tick(&self) -> u64;
    fn evaluator(&self) -> &dyn Evaluator;
    fn progress(&self) -> ActionProgress;
    /// Begins an action; returns its resolved arguments.
    fn start(&mut self, call: &Call) -> Result<Vec<ResolvedArg>, String>;
    /// Cancels whatever the controlled agent is doing.
    fn stop(&mut self);
    /// Advances the world by one tick.
    fn advance(&mut self) -> Result<(), String>;
    /// Holds the world still for `ticks` ticks while narration plays.
    fn freeze(&mut self, ticks: u32);
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub max_ticks: u64,
    pub window: u64,
    pub actor: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { max_ticks: 600, window: DEFAULT_DEADLOCK_WINDOW, actor: "user".into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub actions: Vec<ActionRecord>,
    pub speaks: Vec<SpeakRecord>,
    pub termination: Termination,
    pub debug: Vec<String>,
}

/// Caption duration in ticks: one tick per three words, rounded up.
pub fn freeze_ticks(text: &str) -> u32 {
    let words = text.split_whitespace().count() as u32;
    words.div_ceil(3)
}

pub fn run(fsm: &Fsm, plant: &mut dyn Plant, cfg: &RunConfig) -> RunLog {
    let mut cursor = FsmCursor::new(fsm);
    let mut actions: Vec<ActionRecord> = Vec::new();
    let mut speaks = Vec::new();
    let mut debug = Vec::new();
    let mut open: Option<usize> = None;

    let close = |actions: &mut Vec<ActionRecord>, open: &mut Option<usize>, status, detail, tick| {
        if let Some(i) = open.take() {
            actions[i].status = status;
            actions[i].detail = detail;
            actions[i].end_tick = Some(tick);
        }
    };

    let termination = loop {
        let tick = plant.tick();
        if tick >= cfg.max_ticks {
            break Termination::MaxTicks { tick };
        }
        let progress = plant.progress();
        let done = open.is_some() && matches!(progress, ActionProgress::Done(..));
        let (next, out) = match step(fsm, &cursor, plant.evaluator(), Signal { tick, action_done: done }) {
            Ok(v) => v,
            Err(e) => {
                plant.stop();
                break Termination::Aborted { tick, error: e.to_string() };
            }
        };
        for f in &out.fired {
            match f.kind {
                FireKind::Interrupt => close(&mut actions, &mut open, ActionStatus::Interrupted, None, tick),
                FireKind::Completion => {
                    let (status, detail) = match &progress {
                        ActionProgress::Done(s, d) => (*s, d.clone()),
                        _ => (ActionStatus::Completed, None),
                    };
                    close(&mut actions, &mut open, status, detail, tick)
                }
                FireKind::Guard => {}
            }
        }
        match &out.command {
            Command::Start(call) => {
                close(&mut actions, &mut open, ActionStatus::Cancelled, None, tick);
                plant.stop();
                match plant.start(call) {
                    Ok(args) => {
                        actions.push(ActionRecord {
                            tick,
                            actor: cfg.actor.clone(),
                            action: call.name.clone(),
                            args,
                            status: ActionStatus::Running,
                            end_tick: None,
                            detail: Some(canonical_call(call)),
                        });
                        open = Some(actions.len() - 1);
                    }
                    Err(e) => {
                        break Termination::Aborted { tick, error: e };
                    }
                }
            }
            Command::Idle => {
                close(&mut actions, &mut open, ActionStatus::Cancelled, None, tick);
                plant.stop();
            }
            Command::Continue => {}
        }
        let mut freeze = 0;
        for s in &out.speaks {
            let f = freeze_ticks(&s.text);
            freeze += f;
            speaks.push(SpeakRecord { tick, text: s.text.clone(), line: format!("L{}", s.line), freeze_ticks: f });
        }
        debug.push(log_line(tick, fsm, &next, &out));
        cursor = next;
        if let Some(report) = detect_deadlock(fsm, &cursor, &cursor.last_evaluations, cfg.window, tick) {
            break Termination::Deadlock { tick, report };
        }
        if matches!(fsm.states[cursor.state].kind, StateKind::Terminal) {
            break Termination::Completed { tick };
        }
        if let Err(e) = plant.advance() {
            break Termination::Aborted { tick, error: e };
        }
        if freeze > 0 {
            plant.freeze(freeze);
        }
    };
    RunLog { actions, speaks, termination, debug }
}
