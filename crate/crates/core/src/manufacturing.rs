//! A tiny assembly cell: one robot, one worker, a supply station. Shows the
//! FSM runtime driving a non-soccer world through the same `Plant` seam.

use serde::{Deserialize, Serialize};

use crate::constraint::{Arg, Call, Evaluator};
use crate::domain::{ActionStatus, ResolvedArg};
use crate::fsm::{ActionProgress, Plant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellConfig {
    /// Parts in the worker's bucket at tick 0.
    pub initial_parts: u32,
    /// A full bucket holds this many parts.
    pub full_parts: u32,
    /// The worker uses one part every this many ticks.
    pub ticks_per_part: u64,
    pub travel_ticks: u64,
    pub pick_ticks: u64,
    pub swap_ticks: u64,
    /// The worker is ready once the robot has waited this long at the station.
    pub ready_after: u64,
    pub stations: Vec<String>,
}

impl Default for CellConfig {
    fn default() -> Self {
        CellConfig {
            initial_parts: 14,
            full_parts: 30,
            ticks_per_part: 10,
            travel_ticks: 20,
            pick_ticks: 10,
            swap_ticks: 15,
            ready_after: 10,
            stations: vec!["Dock".into(), "SupplyStation".into(), "WorkerStation".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Task {
    Travel { to: String, left: u64 },
    Pick { item: String, left: u64 },
    Swap { left: u64 },
}

/// Snapshot of the cell for logs and assertions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellState {
    pub tick: u64,
    pub robot_at: String,
    pub carrying: Option<String>,
    pub parts: u32,
    pub swaps: u32,
}

pub struct Cell {
    cfg: CellConfig,
    tick: u64,
    robot_at: String,
    carrying: Option<String>,
    parts: u32,
    consumed_at: u64,
    idle_at_station: u64,
    swaps: u32,
    task: Option<Task>,
    status: ActionProgress,
    history: Vec<CellState>,
}

impl Cell {
    pub fn new(cfg: CellConfig) -> Self {
        let mut c = Cell {
            robot_at: cfg.stations.first().cloned().unwrap_or_else(|| "Dock".into()),
            parts: cfg.initial_parts,
            cfg,
            tick: 0,
            carrying: None,
            consumed_at: 0,
            idle_at_station: 0,
            swaps: 0,
            task: None,
            status: ActionProgress::Idle,
            history: Vec::new(),
        };
        c.history.push(c.state());
        c
    }

    pub fn state(&self) -> CellState {
        CellState {
            tick: self.tick,
            robot_at: self.robot_at.clone(),
            carrying: self.carrying.clone(),
            parts: self.parts,
            swaps: self.swaps,
        }
    }

    pub fn history(&self) -> &[CellState] {
        &self.history
    }

    fn station(&self, arg: Option<&Arg>) -> Result<String, String> {
        let name = arg.and_then(Arg::as_symbol).ok_or("expected a station name")?;
        if self.cfg.stations.iter().any(|s| s == name) {
            Ok(name.to_string())
        } else {
            Err(format!("unknown station {name}"))
        }
    }
}

impl Evaluator for Cell {
    fn eval_call(&self, call: &Call) -> Result<bool, String> {
        match call.name.as_str() {
            "BelowThreshold" => {
                let container = call.args.first().and_then(Arg::as_symbol).unwrap_or_default();
                if container != "worker_bucket" {
                    return Err(format!("unknown container {container}"));
                }
                match call.args.get(1) {
                    Some(Arg::Number(n, _)) => Ok((self.parts as f64) < *n),
                    _ => Err("BelowThreshold needs a level".into()),
                }
            }
            "HumanReady" => Ok(self.robot_at == "WorkerStation"
                && self.task.is_none()
                && self.idle_at_station >= self.cfg.ready_after),
            other => Err(format!("unknown constraint {other}")),
        }
    }
}

impl Plant for Cell {
    fn tick(&self) -> u64 {
        self.tick
    }

    fn evaluator(&self) -> &dyn Evaluator {
        self
    }

    fn progress(&self) -> ActionProgress {
        self.status.clone()
    }

    fn start(&mut self, call: &Call) -> Result<Vec<ResolvedArg>, String> {
        self.status = ActionProgress::Running;
        let sym = |i: usize| call.args.get(i).and_then(Arg::as_symbol).unwrap_or_default().to_string();
        match call.name.as_str() {
            "goTo" => {
                let to = self.station(call.args.first())?;
                let left = if to == self.robot_at { 0 } else { self.cfg.travel_ticks };
                self.task = Some(Task::Travel { to: to.clone(), left });
                Ok(vec![ResolvedArg::Entity(to)])
            }
            "pick" => {
                let at = self.station(call.args.get(1))?;
                if at != self.robot_at {
                    self.status = ActionProgress::Done(ActionStatus::Failed, Some(format!("robot is not at {at}")));
                } else {
                    self.task = Some(Task::Pick { item: sym(0), left: self.cfg.pick_ticks });
                }
                Ok(vec![ResolvedArg::Entity(sym(0)), ResolvedArg::Entity(at)])
            }
            "swapBuckets" => {
                let at = self.station(call.args.get(2))?;
                if at != self.robot_at || self.carrying.as_deref() != Some(sym(0).as_str()) {
                    self.status = ActionProgress::Done(ActionStatus::Failed, Some("nothing to swap here".into()));
                } else {
                    self.task = Some(Task::Swap { left: self.cfg.swap_ticks });
                }
                Ok(vec![ResolvedArg::Entity(sym(0)), ResolvedArg::Entity(sym(1)), ResolvedArg::Entity(at)])
            }
            other => Err(format!("unsupported action {other}")),
        }
    }

    fn stop(&mut self) {
        self.task = None;
        self.status = ActionProgress::Idle;
    }

    fn advance(&mut self) -> Result<(), String> {
        self.tick += 1;
        if self.tick - self.consumed_at >= self.cfg.ticks_per_part {
            self.parts = self.parts.saturating_sub(1);
            self.consumed_at = self.tick;
        }
        let mut finished = false;
        match &mut self.task {
            Some(Task::Travel { to, left }) => {
                *left = left.saturating_sub(1);
                if *left == 0 {
                    self.robot_at = to.clone();
                    finished = true;
                }
            }
            Some(Task::Pick { item, left }) => {
                *left -= 1;
                if *left == 0 {
                    self.carrying = Some(item.clone());
                    finished = true;
                }
            }
            Some(Task::Swap { left }) => {
                *left -= 1;
                if *left == 0 {
                    self.carrying = None;
                    self.parts = self.cfg.full_parts;
                    self.consumed_at = self.tick;
                    self.swaps += 1;
                    finished = true;
                }
            }
            None => {}
        }
        if finished {
            self.task = None;
            self.status = ActionProgress::Done(ActionStatus::Completed, None);
        }
        if self.task.is_none() && self.robot_at == "WorkerStation" {
            self.idle_at_station += 1;
        } else {
            self.idle_at_station = 0;
        }
        self.history.push(self.state());
        Ok(())
    }

    fn freeze(&mut self, ticks: u32) {
        for _ in 0..ticks {
            self.tick += 1;
            self.consumed_at += 1;
            self.history.push(self.state());
        }
    }
}
