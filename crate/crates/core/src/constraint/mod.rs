//! Boolean spatial predicates over a world state and their soft field
//! counterparts on the workspace grid.

mod expr;
mod field;

pub use expr::{canonical_arg, canonical_call, canonical_string, Arg, Call, CondExpr, Span};
pub use field::{
    field, field_of_leaf, normalize, sample, sample_many, Sampler, SpatialField, COMPLEMENT_TOL,
};

use thiserror::Error;

use crate::domain::{Entity, Point, Role, Workspace, WorldState};

/// Logistic ramp width for distance and side fields, metres.
pub const SIGMA_EDGE: f64 = 1.0;
/// Tolerance of the `==` distance comparison, metres.
pub const EQ_TOLERANCE: f64 = 0.25;
/// Default passing lane width, metres.
pub const DEFAULT_LANE_WIDTH: f64 = 2.0;
/// Field value inside an occlusion cone / in the clear.
pub const LANE_BLOCKED: f64 = 0.05;
pub const LANE_OPEN: f64 = 0.95;
/// Angular soft edge of an occlusion cone (radians). The shift pushes the
/// ramp outside the geometric cone so shadowed cells stay near the floor.
pub const LANE_ANGLE_SHIFT: f64 = 0.15;
pub const LANE_ANGLE_SCALE: f64 = 0.05;
/// Depth ramp (metres): cells nearer the passer than the blocker are open.
pub const LANE_DEPTH_SCALE: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstraintError {
    #[error("unknown constraint {name}")]
    UnknownConstraint { name: String },
    #[error("bad arguments to {name}: {message}")]
    BadArgs { name: String, message: String },
    #[error("unknown entity id {id} in {leaf}")]
    UnknownEntity { id: String, leaf: String },
    #[error("{leaf} has no field form")]
    NoFieldForm { leaf: String },
    #[error("complement undefined over super-unit field")]
    ComplementUndefined,
    #[error("unsatisfiable constraint field")]
    Unsatisfiable,
    #[error("field is not normalized")]
    NotNormalized,
    #[error("field grids differ")]
    GridMismatch,
    #[error("field contains non-finite values")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

impl CmpOp {
    pub fn parse(s: &str) -> Option<CmpOp> {
        Some(match s {
            "<" => CmpOp::Lt,
            "<=" | "≤" => CmpOp::Le,
            ">" => CmpOp::Gt,
            ">=" | "≥" => CmpOp::Ge,
            "==" => CmpOp::Eq,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
    Above,
    Below,
}

impl Side {
    fn parse(axis: &str, side: &str) -> Option<Side> {
        match (axis, side) {
            ("horizontal", "left") => Some(Side::Left),
            ("horizontal", "right") => Some(Side::Right),
            ("vertical", "above") => Some(Side::Above),
            ("vertical", "below") => Some(Side::Below),
            _ => None,
        }
    }

    fn axis(self) -> &'static str {
        match self {
            Side::Left | Side::Right => "horizontal",
            Side::Above | Side::Below => "vertical",
        }
    }

    fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
            Side::Above => "above",
            Side::Below => "below",
        }
    }
}

/// Typed view of a constraint leaf.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    HasPossession { entity: String },
    DistanceTo { obj: String, reference: String, d: f64, op: CmpOp },
    SideOf { obj: String, reference: String, side: Side },
    PassingLane { passer: String, receiver: String, width: f64 },
    NearPoint { obj: String, point: Point, sigma: f64 },
}

pub(crate) fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl Constraint {
    pub fn from_call(c: &Call) -> Result<Constraint, ConstraintError> {
        let bad = |m: &str| ConstraintError::BadArgs { name: c.name.clone(), message: m.to_string() };
        let name = |i: usize| -> Result<String, ConstraintError> {
            match c.args.get(i) {
                Some(Arg::Name(s, _)) => Ok(s.clone()),
                _ => Err(bad(&format!("argument {} must be an entity name", i + 1))),
            }
        };
        let number = |i: usize| -> Result<f64, ConstraintError> {
            match c.args.get(i) {
                Some(Arg::Number(v, _)) if v.is_finite() => Ok(*v),
                _ => Err(bad(&format!("argument {} must be a number", i + 1))),
            }
        };
        let symbol = |i: usize| -> Result<String, ConstraintError> {
            c.args
                .get(i)
                .and_then(Arg::as_symbol)
                .map(str::to_string)
                .ok_or_else(|| bad(&format!("argument {} must be a symbol", i + 1)))
        };
        let arity = |lo: usize, hi: usize| {
            if c.args.len() < lo || c.args.len() > hi {
                Err(bad(&format!("expected {lo}..={hi} arguments, got {}", c.args.len())))
            } else {
                Ok(())
            }
        };
        match c.name.as_str() {
            "HasPossession" => {
                arity(1, 1)?;
                Ok(Constraint::HasPossession { entity: name(0)? })
            }
            "DistanceTo" => {
                arity(4, 4)?;
                let op = symbol(3)?;
                let op = CmpOp::parse(&op).ok_or_else(|| bad(&format!("unknown comparison {op}")))?;
                let d = number(2)?;
                if d < 0.0 {
                    return Err(bad("distance must be non-negative"));
                }
                Ok(Constraint::DistanceTo { obj: name(0)?, reference: name(1)?, d, op })
            }
            "SideOf" => {
                arity(4, 4)?;
                let (axis, side) = (symbol(2)?, symbol(3)?);
                let side = Side::parse(&axis, &side)
                    .ok_or_else(|| bad(&format!("side {side} does not belong to axis {axis}")))?;
                Ok(Constraint::SideOf { obj: name(0)?, reference: name(1)?, side })
            }
            "PassingLane" => {
                arity(2, 3)?;
                let width = if c.args.len() == 3 { number(2)? } else { DEFAULT_LANE_WIDTH };
                if width <= 0.0 {
                    return Err(bad("lane width must be positive"));
                }
                Ok(Constraint::PassingLane { passer: name(0)?, receiver: name(1)?, width })
            }
            "NearPoint" => {
                arity(3, 3)?;
                let point = match &c.args[1] {
                    Arg::Point(x, y, _) => Point::new(*x, *y),
                    _ => return Err(bad("argument 2 must be a point")),
                };
                let sigma = number(2)?;
                if sigma <= 0.0 {
                    return Err(bad("sigma must be positive"));
                }
                Ok(Constraint::NearPoint { obj: name(0)?, point, sigma })
            }
            _ => Err(ConstraintError::UnknownConstraint { name: c.name.clone() }),
        }
    }

    pub fn canonical(&self) -> String {
        use expr::fmt_num;
        match self {
            Constraint::HasPossession { entity } => format!("haspossession({entity})"),
            Constraint::DistanceTo { obj, reference, d, op } => {
                format!("distanceto({obj},{reference},{},{})", op.as_str(), fmt_num(*d))
            }
            Constraint::SideOf { obj, reference, side } => {
                format!("sideof({obj},{reference},{},{})", side.axis(), side.name())
            }
            Constraint::PassingLane { passer, receiver, width } => {
                format!("passinglane({passer},{receiver},{})", fmt_num(*width))
            }
            Constraint::NearPoint { obj, point, sigma } => format!(
                "nearpoint({obj},({},{}),{})",
                fmt_num(point.x),
                fmt_num(point.y),
                fmt_num(*sigma)
            ),
        }
    }

    pub fn eval(&self, scene: &Scene) -> Result<bool, ConstraintError> {
        let leaf = || self.canonical();
        match self {
            Constraint::HasPossession { entity } => {
                let e = scene.entity(entity, &leaf)?;
                Ok(scene.state.possession.as_deref() == Some(e.id.as_str()))
            }
            Constraint::DistanceTo { obj, reference, d, op } => {
                let (a, _) = scene.resolve(obj, &leaf)?;
                let (b, _) = scene.resolve(reference, &leaf)?;
                let dist = a.dist(b);
                Ok(match op {
                    CmpOp::Lt => dist < *d,
                    CmpOp::Le => dist <= *d,
                    CmpOp::Gt => dist > *d,
                    CmpOp::Ge => dist >= *d,
                    CmpOp::Eq => (dist - d).abs() <= EQ_TOLERANCE,
                })
            }
            Constraint::SideOf { obj, reference, side } => {
                let (p, r_obj) = scene.resolve(obj, &leaf)?;
                let (q, r_ref) = scene.resolve(reference, &leaf)?;
                let o = r_obj + r_ref;
                Ok(match side {
                    Side::Left => p.x < q.x - o,
                    Side::Right => p.x > q.x + o,
                    Side::Above => p.y > q.y + o,
                    Side::Below => p.y < q.y - o,
                })
            }
            Constraint::PassingLane { passer, receiver, width } => {
                let (a, _) = scene.resolve(passer, &leaf)?;
                let (b, _) = scene.resolve(receiver, &leaf)?;
                let blockers = scene.lane_blockers(passer, receiver, &leaf)?;
                Ok(blockers.iter().all(|(o, r)| segment_distance(*o, a, b) >= r + width / 2.0))
            }
            Constraint::NearPoint { obj, point, sigma } => {
                let (p, _) = scene.resolve(obj, &leaf)?;
                Ok(p.dist(*point) <= 2.0 * sigma)
            }
        }
    }

    /// Value of the soft field when the leaf's free variable sits at `p`.
    pub(crate) fn field_fn(
        &self,
        scene: &Scene,
    ) -> Result<Box<dyn Fn(Point) -> f64>, ConstraintError> {
        let leaf = || self.canonical();
        match self.clone() {
            Constraint::HasPossession { .. } => Err(ConstraintError::NoFieldForm { leaf: leaf() }),
            Constraint::DistanceTo { obj, reference, d, op } => {
                scene.resolve(&obj, &leaf)?;
                let (q, _) = scene.resolve(&reference, &leaf)?;
                Ok(Box::new(move |p: Point| {
                    let dist = p.dist(q);
                    match op {
                        CmpOp::Lt | CmpOp::Le => logistic((d - dist) / SIGMA_EDGE),
                        CmpOp::Gt | CmpOp::Ge => logistic((dist - d) / SIGMA_EDGE),
                        CmpOp::Eq => logistic((EQ_TOLERANCE - (dist - d).abs()) / SIGMA_EDGE),
                    }
                }))
            }
            Constraint::SideOf { obj, reference, side } => {
                let (_, r_obj) = scene.resolve(&obj, &leaf)?;
                let (q, r_ref) = scene.resolve(&reference, &leaf)?;
                let o = r_obj + r_ref;
                Ok(Box::new(move |p: Point| match side {
                    Side::Left => logistic(((q.x - o) - p.x) / SIGMA_EDGE),
                    Side::Right => logistic((p.x - (q.x + o)) / SIGMA_EDGE),
                    Side::Above => logistic((p.y - (q.y + o)) / SIGMA_EDGE),
                    Side::Below => logistic(((q.y - o) - p.y) / SIGMA_EDGE),
                }))
            }
            Constraint::PassingLane { passer, receiver, width } => {
                let (a, _) = scene.resolve(&passer, &leaf)?;
                scene.resolve(&receiver, &leaf)?;
                let blockers = scene.lane_blockers(&passer, &receiver, &leaf)?;
                Ok(Box::new(move |p: Point| {
                    let open: f64 = blockers.iter().map(|(o, r)| lane_openness(a, *o, r + width / 2.0, p)).product();
                    LANE_BLOCKED + (LANE_OPEN - LANE_BLOCKED) * open
                }))
            }
            Constraint::NearPoint { obj, point, sigma } => {
                scene.resolve(&obj, &leaf)?;
                Ok(Box::new(move |p: Point| {
                    let d2 = (p.x - point.x).powi(2) + (p.y - point.y).powi(2);
                    (-d2 / (2.0 * sigma * sigma)).exp()
                }))
            }
        }
    }
}

/// Openness in [0, 1] of the pass `a -> p` with respect to one blocker disc
/// at `o` of effective radius `r_eff`. Low only inside the shadow cone
/// behind the blocker as seen from `a`.
pub fn lane_openness(a: Point, o: Point, r_eff: f64, p: Point) -> f64 {
    let u = o.sub(a);
    let v = p.sub(a);
    let d = u.norm();
    let half = if d > r_eff { (r_eff / d).asin() } else { std::f64::consts::PI };
    let theta = if v.norm() == 0.0 {
        std::f64::consts::PI
    } else {
        (u.x * v.y - u.y * v.x).abs().atan2(u.x * v.x + u.y * v.y)
    };
    let angular = logistic((theta - half - LANE_ANGLE_SHIFT) / LANE_ANGLE_SCALE);
    let in_front = logistic(((d - r_eff) - v.norm()) / LANE_DEPTH_SCALE);
    1.0 - (1.0 - angular) * (1.0 - in_front)
}

/// Distance from `o` to the segment `a`-`b`.
pub fn segment_distance(o: Point, a: Point, b: Point) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.x * ab.x + ab.y * ab.y;
    if len2 == 0.0 {
        return o.dist(a);
    }
    let t = (((o.x - a.x) * ab.x + (o.y - a.y) * ab.y) / len2).clamp(0.0, 1.0);
    o.dist(Point::new(a.x + t * ab.x, a.y + t * ab.y))
}

/// A world snapshot plus the static context needed to resolve names.
#[derive(Clone, Copy)]
pub struct Scene<'a> {
    pub ws: &'a Workspace,
    pub entities: &'a [Entity],
    pub state: &'a WorldState,
}

impl<'a> Scene<'a> {
    pub fn new(ws: &'a Workspace, entities: &'a [Entity], state: &'a WorldState) -> Self {
        Scene { ws, entities, state }
    }

    pub fn avatar(&self) -> Option<&'a Entity> {
        self.entities.iter().find(|e| e.role == Role::Avatar)
    }

    fn entity(&self, name: &str, leaf: &dyn Fn() -> String) -> Result<&'a Entity, ConstraintError> {
        let found = if name == "self" {
            self.avatar()
        } else {
            self.entities.iter().find(|e| e.id == name)
        };
        found.ok_or_else(|| ConstraintError::UnknownEntity { id: name.to_string(), leaf: leaf() })
    }

    /// Position and radius of an entity or goal name. `goal` is the goal
    /// the avatar attacks.
    pub fn resolve_point(&self, name: &str) -> Result<(Point, f64), ConstraintError> {
        self.resolve(name, &|| name.to_string())
    }

    fn resolve(&self, name: &str, leaf: &dyn Fn() -> String) -> Result<(Point, f64), ConstraintError> {
        if let Ok(e) = self.entity(name, leaf) {
            let p = self
                .state
                .position(&e.id)
                .ok_or_else(|| ConstraintError::UnknownEntity { id: e.id.clone(), leaf: leaf() })?;
            return Ok((p, e.radius));
        }
        if name == "goal" {
            if let Some(team) = self.avatar().map(|a| a.team.clone()) {
                if let Some(g) = self.ws.goals.iter().find(|g| g.team != team) {
                    return Ok((g.center(), 0.0));
                }
            }
        }
        if let Some(g) = self.ws.goal(name) {
            return Ok((g.center(), 0.0));
        }
        Err(ConstraintError::UnknownEntity { id: name.to_string(), leaf: leaf() })
    }

    /// Opponents of the passer that could cut the lane, with radii.
    fn lane_blockers(
        &self,
        passer: &str,
        receiver: &str,
        leaf: &dyn Fn() -> String,
    ) -> Result<Vec<(Point, f64)>, ConstraintError> {
        let p = self.entity(passer, leaf)?;
        let r_id = self.entity(receiver, leaf).ok().map(|e| e.id.clone());
        let mut out = Vec::new();
        for e in self.entities {
            if e.role == Role::Ball || e.team == p.team || e.id == p.id || Some(&e.id) == r_id.as_ref() {
                continue;
            }
            if let Some(pos) = self.state.position(&e.id) {
                out.push((pos, e.radius));
            }
        }
        Ok(out)
    }

    pub fn eval(&self, expr: &CondExpr) -> Result<bool, ConstraintError> {
        eval_bool(expr, self)
    }
}

/// Evaluates a leaf call to a boolean. Implemented by every world the FSM
/// can run against.
pub trait Evaluator {
    fn eval_call(&self, call: &Call) -> Result<bool, String>;
}

impl Evaluator for Scene<'_> {
    fn eval_call(&self, call: &Call) -> Result<bool, String> {
        Constraint::from_call(call).and_then(|c| c.eval(self)).map_err(|e| e.to_string())
    }
}

/// Short-circuit boolean evaluation.
pub fn eval_bool(expr: &CondExpr, scene: &Scene) -> Result<bool, ConstraintError> {
    Ok(match expr {
        CondExpr::Const(b, _) => *b,
        CondExpr::Call(c) => Constraint::from_call(c)?.eval(scene)?,
        CondExpr::Not(inner, _) => !eval_bool(inner, scene)?,
        CondExpr::And(xs, _) => {
            for x in xs {
                if !eval_bool(x, scene)? {
                    return Ok(false);
                }
            }
            true
        }
        CondExpr::Or(xs, _) => {
            for x in xs {
                if eval_bool(x, scene)? {
                    return Ok(true);
                }
            }
            false
        }
    })
}
