use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::constraint::{field, normalize, Arg, Call, Constraint, Evaluator, Sampler, Scene};
use crate::domain::{normalize_heading, ActionStatus, Point, ResolvedArg, Role, WorldState};
use crate::fsm::{ActionProgress, Plant};

use super::{Rule, Scenario};

#[derive(Debug, Clone, PartialEq)]
enum Active {
    MoveTo { target: Point },
    Pass { receiver: String },
    Shoot,
    Trigger,
}

#[derive(Debug, Clone, PartialEq)]
enum Purpose {
    AvatarPass { receiver: String },
    Shot { clear: bool },
    AgentPass,
}

#[derive(Debug, Clone, PartialEq)]
struct Flight {
    target: Point,
    speed: f64,
    purpose: Purpose,
}

/// A kick by anyone other than the avatar, reported for demonstration capture.
#[derive(Debug, Clone, PartialEq)]
pub struct KickEvent {
    pub tick: u64,
    pub verb: String,
    pub actor: String,
    pub object: String,
}

pub struct Arena {
    scenario: Scenario,
    world: WorldState,
    avatar: String,
    ball: String,
    waypoint: Vec<usize>,
    active: Option<Active>,
    status: ActionProgress,
    flight: Option<Flight>,
    pass_request: bool,
    rng: ChaCha8Rng,
    states: Vec<WorldState>,
    samples: Vec<Point>,
    kicks: Vec<KickEvent>,
}

fn step_toward(from: Point, to: Point, max: f64) -> (Point, f64) {
    let d = from.dist(to);
    if d <= max {
        (to, d)
    } else {
        let k = max / d;
        (Point::new(from.x + (to.x - from.x) * k, from.y + (to.y - from.y) * k), max)
    }
}

impl Arena {
    pub fn new(scenario: Scenario, seed: u64) -> Self {
        let avatar = scenario.avatar().id.clone();
        let ball = scenario.ball().id.clone();
        let world = scenario.initial.clone();
        let waypoint = vec![0; scenario.scripts.len()];
        Arena {
            states: vec![world.clone()],
            scenario,
            world,
            avatar,
            ball,
            waypoint,
            active: None,
            status: ActionProgress::Idle,
            flight: None,
            pass_request: false,
            rng: ChaCha8Rng::seed_from_u64(seed),
            samples: Vec::new(),
            kicks: Vec::new(),
        }
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn states(&self) -> &[WorldState] {
        &self.states
    }

    pub fn into_states(self) -> Vec<WorldState> {
        self.states
    }

    /// Targets drawn by sampled MoveTo calls, in order.
    pub fn samples(&self) -> &[Point] {
        &self.samples
    }

    pub fn kicks(&self) -> &[KickEvent] {
        &self.kicks
    }

    fn scene(&self) -> Scene<'_> {
        Scene::new(&self.scenario.workspace, &self.scenario.entities, &self.world)
    }

    fn team_of(&self, id: &str) -> Option<&str> {
        self.scenario.entities.iter().find(|e| e.id == id).map(|e| e.team.as_str())
    }

    fn finish(&mut self, status: ActionStatus, detail: Option<String>) {
        self.status = ActionProgress::Done(status, detail);
    }

    fn resolve_target(&mut self, arg: &Arg) -> Result<Point, String> {
        match arg {
            Arg::Point(x, y, _) => Ok(Point::new(*x, *y)),
            Arg::Name(n, _) => self.scene().resolve_point(n).map(|(p, _)| p).map_err(|e| e.to_string()),
            Arg::Sample(expr, _) => {
                let f = field(expr, &self.scene()).map_err(|e| e.to_string())?;
                let f = normalize(&f).map_err(|e| e.to_string())?;
                let p = Sampler::new(&f).map_err(|e| e.to_string())?.draw(&mut self.rng);
                self.samples.push(p);
                Ok(p)
            }
            other => Err(format!("MoveTo cannot target a {}", other.kind_name())),
        }
    }

    fn kick(&mut self, target: Point, speed: f64, purpose: Purpose) {
        self.world.possession = None;
        self.world.ball_target = Some(target);
        self.flight = Some(Flight { target, speed, purpose });
    }

    fn move_entity(&mut self, id: &str, target: Point, speed: f64) -> f64 {
        let dt = self.scenario.config.dt;
        let Some(e) = self.world.get_mut(id) else { return f64::INFINITY };
        let (p, moved) = step_toward(e.pos(), target, speed * dt);
        if moved > 0.0 {
            e.heading = normalize_heading((p.y - e.y).atan2(p.x - e.x));
        }
        e.x = p.x;
        e.y = p.y;
        e.speed = moved / dt;
        p.dist(target)
    }

    fn clamp(&self, p: Point) -> Point {
        let w = &self.scenario.workspace;
        Point::new(p.x.clamp(w.x_min, w.x_max), p.y.clamp(w.y_min, w.y_max))
    }

    fn agents(&mut self) {
        let eps = self.scenario.config.arrival_eps;
        let avatar_team = self.team_of(&self.avatar).unwrap_or_default().to_string();
        if self.pass_request {
            let holder = self.world.possession.clone().filter(|h| *h != self.avatar);
            let willing = holder.as_deref().is_some_and(|h| {
                self.team_of(h) == Some(avatar_team.as_str())
                    && self.scenario.scripts.iter().all(|s| s.entity != h || s.passes_on_request)
            });
            if let (Some(h), true) = (holder, willing) {
                let to = self.world.position(&self.avatar).expect("avatar exists");
                self.kick(to, self.scenario.config.pass_speed, Purpose::AgentPass);
                self.pass_request = false;
                self.kicks.push(KickEvent {
                    tick: self.world.tick,
                    verb: "pass".into(),
                    actor: h.clone(),
                    object: self.avatar.clone(),
                });
                if self.active == Some(Active::Trigger) {
                    self.finish(ActionStatus::Completed, Some(format!("{h} passed")));
                }
            }
        }
        for i in 0..self.scenario.scripts.len() {
            let script = self.scenario.scripts[i].clone();
            let id = script.entity.as_str();

            let mut decided = None;
            for rule in &script.rules {
                match rule {
                    Rule::ChaseBallHolder { radius, speed } => {
                        let Some(h) = self.world.possession.clone() else { continue };
                        if self.team_of(&h) == self.team_of(id) {
                            continue;
                        }
                        let (hp, me) = (self.world.position(&h), self.world.position(id));
                        if let (Some(hp), Some(me)) = (hp, me) {
                            if hp.dist(me) <= *radius {
                                decided = Some(Some((hp, *speed)));
                                break;
                            }
                        }
                    }
                    Rule::HoldPosition => {
                        decided = Some(None);
                        break;
                    }
                    Rule::MarkEntity { target, dx, dy, speed } => {
                        if let Some(tp) = self.world.position(target) {
                            decided = Some(Some((self.clamp(Point::new(tp.x + dx, tp.y + dy)), *speed)));
                            break;
                        }
                    }
                }
            }
            let plan = match decided {
                Some(p) => p,
                None => script.waypoints.get(self.waypoint[i]).map(|w| (Point::new(w.x, w.y), w.speed)),
            };
            match plan {
                Some((target, speed)) => {
                    let left = self.move_entity(id, target, speed);
                    if decided.is_none() && left <= eps {
                        self.waypoint[i] += 1;
                    }
                }
                None => {
                    if let Some(e) = self.world.get_mut(id) {
                        e.speed = 0.0;
                    }
                }
            }
        }
    }

    fn avatar_motion(&mut self) {
        let id = self.avatar.clone();
        match (&self.active, &self.status) {
            (Some(Active::MoveTo { target }), ActionProgress::Running) => {
                let target = *target;
                let left = self.move_entity(&id, target, self.scenario.config.player_speed);
                if left <= self.scenario.config.arrival_eps {
                    self.finish(ActionStatus::Completed, None);
                }
            }
            _ => {
                if let Some(e) = self.world.get_mut(&id) {
                    e.speed = 0.0;
                }
            }
        }
    }

    fn catcher(&self, at: Point) -> Option<String> {
        let r = self.scenario.config.catch_radius;
        let mut best: Option<(f64, &str)> = None;
        for e in &self.scenario.entities {
            if e.role == Role::Ball {
                continue;
            }
            if let Some(p) = self.world.position(&e.id) {
                let d = p.dist(at);
                if d <= r && best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, &e.id));
                }
            }
        }
        best.map(|(_, id)| id.to_string())
    }

    fn ball_motion(&mut self) {
        let ball = self.ball.clone();
        let dt = self.scenario.config.dt;
        if let Some(f) = self.flight.clone() {
            let pos = self.world.position(&ball).expect("ball exists");
            let step = f.speed * dt;
            let arrived = pos.dist(f.target) <= step + 1e-9;
            let next = if arrived { f.target } else { step_toward(pos, f.target, step).0 };
            let b = self.world.get_mut(&ball).expect("ball exists");
            b.heading = normalize_heading((next.y - b.y).atan2(next.x - b.x));
            b.x = next.x;
            b.y = next.y;
            b.speed = f.speed;
            if !arrived {
                return;
            }
            self.flight = None;
            self.world.ball_target = None;
            let caught = self.catcher(next);
            self.world.possession = caught.clone();
            if let Some(b) = self.world.get_mut(&ball) {
                b.speed = 0.0;
            }
            match f.purpose {
                Purpose::AvatarPass { receiver } if matches!(self.active, Some(Active::Pass { .. })) => {
                    match caught {
                        Some(c) if c == receiver => self.finish(ActionStatus::Completed, None),
                        Some(c) => self.finish(ActionStatus::Failed, Some(format!("intercepted by {c}"))),
                        None => self.finish(ActionStatus::Failed, Some("not received".into())),
                    }
                }
                Purpose::Shot { clear } if self.active == Some(Active::Shoot) => {
                    if clear {
                        self.finish(ActionStatus::Completed, Some("on target".into()));
                    } else {
                        let by = caught.unwrap_or_else(|| "defender".into());
                        self.finish(ActionStatus::Blocked, Some(format!("blocked by {by}")));
                    }
                }
                _ => {}
            }
            self.settle_ball();
            return;
        }
        if self.world.possession.is_none() {
            let at = self.world.position(&ball).expect("ball exists");
            self.world.possession = self.catcher(at);
        }
        self.settle_ball();
    }

    fn settle_ball(&mut self) {
        if let Some(h) = self.world.possession.clone() {
            let p = self.world.position(&h).expect("holder exists");
            let b = self.world.get_mut(&self.ball).expect("ball exists");
            b.x = p.x;
            b.y = p.y;
            b.speed = 0.0;
        }
    }
}

impl Evaluator for Arena {
    fn eval_call(&self, call: &Call) -> Result<bool, String> {
        self.scene().eval_call(call)
    }
}

impl Plant for Arena {
    fn tick(&self) -> u64 {
        self.world.tick
    }

    fn evaluator(&self) -> &dyn Evaluator {
        self
    }

    fn progress(&self) -> ActionProgress {
        self.status.clone()
    }

    fn start(&mut self, call: &Call) -> Result<Vec<ResolvedArg>, String> {
        let holds = self.world.possession.as_deref() == Some(self.avatar.as_str());
        self.status = ActionProgress::Running;
        match call.name.as_str() {
            "MoveTo" => {
                let arg = call.args.first().ok_or("MoveTo needs a target")?;
                let target = self.resolve_target(arg)?;
                if !self.scenario.workspace.contains(target) {
                    return Err(format!("MoveTo target {target} out of bounds"));
                }
                self.active = Some(Active::MoveTo { target });
                if self.world.position(&self.avatar).expect("avatar").dist(target) <= self.scenario.config.arrival_eps {
                    self.finish(ActionStatus::Completed, None);
                }
                Ok(vec![ResolvedArg::Point(target)])
            }
            "Pass" => {
                let receiver = call.args.first().and_then(Arg::as_symbol).ok_or("Pass needs a receiver")?.to_string();
                let to = self.scene().resolve_point(&receiver).map_err(|e| e.to_string())?.0;
                self.active = Some(Active::Pass { receiver: receiver.clone() });
                if holds {
                    let speed = self.scenario.config.pass_speed;
                    self.kick(to, speed, Purpose::AvatarPass { receiver: receiver.clone() });
                } else {
                    self.finish(ActionStatus::Failed, Some("not in possession".into()));
                }
                Ok(vec![ResolvedArg::Entity(receiver)])
            }
            "Shoot" => {
                let goal = call.args.first().and_then(Arg::as_symbol).unwrap_or("goal").to_string();
                let target = self.scene().resolve_point(&goal).map_err(|e| e.to_string())?.0;
                self.active = Some(Active::Shoot);
                if holds {
                    let lane = Constraint::PassingLane {
                        passer: self.avatar.clone(),
                        receiver: goal.clone(),
                        width: self.scenario.config.lane_width,
                    };
                    let clear = lane.eval(&self.scene()).map_err(|e| e.to_string())?;
                    let aim = if clear { target } else { self.first_blocker(target).unwrap_or(target) };
                    let speed = self.scenario.config.shot_speed;
                    self.kick(aim, speed, Purpose::Shot { clear });
                } else {
                    self.finish(ActionStatus::Failed, Some("not in possession".into()));
                }
                Ok(vec![ResolvedArg::Entity(goal)])
            }
            "TriggerTeammatePass" => {
                self.active = Some(Active::Trigger);
                let mine = self.team_of(&self.avatar).map(str::to_string);
                let holder_is_mate = self
                    .world
                    .possession
                    .as_deref()
                    .is_some_and(|h| h != self.avatar && self.team_of(h).map(str::to_string) == mine);
                if holder_is_mate {
                    self.pass_request = true;
                } else {
                    self.finish(ActionStatus::Failed, Some("no teammate has the ball".into()));
                }
                Ok(vec![])
            }
            other => Err(format!("unsupported action {other}")),
        }
    }

    fn stop(&mut self) {
        self.active = None;
        self.status = ActionProgress::Idle;
        self.pass_request = false;
    }

    fn advance(&mut self) -> Result<(), String> {
        self.agents();
        self.avatar_motion();
        self.ball_motion();
        self.world.tick += 1;
        self.states.push(self.world.clone());
        Ok(())
    }

    fn freeze(&mut self, ticks: u32) {
        for _ in 0..ticks {
            self.world.tick += 1;
            self.states.push(self.world.clone());
        }
    }
}

impl Arena {
    /// Nearest opponent standing in the shooting lane toward `target`.
    fn first_blocker(&self, target: Point) -> Option<Point> {
        let me = self.world.position(&self.avatar)?;
        let team = self.team_of(&self.avatar)?;
        let half = self.scenario.config.lane_width / 2.0;
        self.scenario
            .entities
            .iter()
            .filter(|e| e.role != Role::Ball && e.team != team)
            .filter_map(|e| self.world.position(&e.id).map(|p| (p, e.radius)))
            .filter(|(p, r)| crate::constraint::segment_distance(*p, me, target) < r + half)
            .map(|(p, _)| p)
            .min_by(|a, b| a.dist(me).total_cmp(&b.dist(me)))
    }
}
