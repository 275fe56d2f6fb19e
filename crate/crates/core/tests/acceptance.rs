//! One line per acceptance criterion. Runs without the libtest harness so
//! the report always prints; exits non-zero if any line fails.

mod support;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use tacticforge_core::constraint::{field, normalize, sample_many, Sampler, Scene, SpatialField};
use tacticforge_core::domain::{ActionStatus, Grid, Point, Termination, Workspace};
use tacticforge_core::dsl::{parse, parse_condition, print, ApiRegistry, BehaviorProgram, Block, Stmt};
use tacticforge_core::fixtures;
use tacticforge_core::fsm::{compile, RunConfig};
use tacticforge_core::grounding::{ground, ground_flow_feedback, render};
use tacticforge_core::manufacturing::{Cell, CellConfig};
use tacticforge_core::metrics::{
    completeness, correctness, extract_flow, AliasMap, DecisionFlowGraph, FlowEdge, FlowNode, Rubric, RubricScore,
};
use tacticforge_core::sim::run;
use tacticforge_core::synth::{
    fallback_synthesize, repair, repair_bundle, DiffKind, FeedbackSession, RepairInput, ScriptedClient, DEFAULT_ATTEMPTS,
};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn soccer() -> ApiRegistry {
    ApiRegistry::soccer()
}

fn program(src: &str) -> BehaviorProgram {
    parse(src, &soccer()).unwrap()
}

fn random_field(rng: &mut ChaCha8Rng, grid: Grid) -> SpatialField {
    SpatialField { grid, values: (0..grid.len()).map(|_| rng.gen::<f64>()).collect(), normalized: false }
}

fn max_gap(a: &SpatialField, b: &SpatialField) -> f64 {
    a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn algebra() -> Check {
    const TOL: f64 = 1e-12;
    let grid = Workspace::pitch().grid();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let fields: Vec<SpatialField> = (0..1000).map(|_| random_field(&mut rng, grid)).collect();
    let mut worst = 0.0f64;
    for i in 0..fields.len() {
        let (a, b, c) = (&fields[i], &fields[(i + 1) % 1000], &fields[(i + 2) % 1000]);
        let ab = a.and(b).unwrap();
        let a_or_b = a.or(b).unwrap();
        worst = worst.max(max_gap(&ab, &b.and(a).unwrap()));
        worst = worst.max(max_gap(&a_or_b, &b.or(a).unwrap()));
        worst = worst.max(max_gap(&ab.and(c).unwrap(), &a.and(&b.and(c).unwrap()).unwrap()));
        worst = worst.max(max_gap(&a_or_b.or(c).unwrap(), &a.or(&b.or(c).unwrap()).unwrap()));
        worst = worst.max(max_gap(&a.complement().unwrap().complement().unwrap(), a));
        let n = normalize(a).unwrap();
        worst = worst.max(max_gap(&normalize(&n).unwrap(), &n));
        for k in 0..a.values.len() {
            let (x, y) = (a.values[k], b.values[k]);
            ensure!(ab.values[k] <= x.min(y) + TOL, "product above min at field {i} cell {k}");
            ensure!(a_or_b.values[k] >= x.max(y) - TOL, "sum below max at field {i} cell {k}");
        }
    }
    ensure!(worst <= TOL, "largest identity gap {worst:e}");
    Ok(format!("1000 fields, largest gap {worst:.1e}"))
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Pointwise lane × (left + right) for the lure start, written out by hand:
/// teammate passes from (15, 4), defender at (15, 10) with radius 0.4 and a
/// 2 m lane, user radius 0.4.
fn fig3_oracle(p: Point) -> f64 {
    let (ax, ay, ox, oy) = (15.0, 4.0, 15.0, 10.0);
    let r_eff = 0.4 + 1.0;
    let (ux, uy, vx, vy) = (ox - ax, oy - ay, p.x - ax, p.y - ay);
    let d = (ux * ux + uy * uy).sqrt();
    let half = (r_eff / d).asin();
    let vn = (vx * vx + vy * vy).sqrt();
    let theta = if vn == 0.0 { std::f64::consts::PI } else { (ux * vy - uy * vx).abs().atan2(ux * vx + uy * vy) };
    let angular = logistic((theta - half - 0.15) / 0.05);
    let in_front = logistic(((d - r_eff) - vn) / 0.5);
    let open = 1.0 - (1.0 - angular) * (1.0 - in_front);
    let lane = 0.05 + 0.9 * open;
    let left = logistic((ox - 0.8) - p.x);
    let right = logistic(p.x - (ox + 0.8));
    lane * (left + right)
}

fn in_shadow(p: Point) -> bool {
    let (a, o) = (Point::new(15.0, 4.0), Point::new(15.0, 10.0));
    let d = a.dist(o);
    let half = (1.4f64 / d).asin();
    let (ux, uy, vx, vy) = (o.x - a.x, o.y - a.y, p.x - a.x, p.y - a.y);
    let theta = (ux * vy - uy * vx).abs().atan2(ux * vx + uy * vy);
    theta < half && a.dist(p) > d
}

fn fig3() -> Check {
    let sc = fixtures::scenario("lure_hold").unwrap();
    let scene = Scene::new(&sc.workspace, &sc.entities, &sc.initial);
    let cond = parse_condition(
        "PassingLane(teammate, self) and (SideOf(self, opponent, horizontal, left) or SideOf(self, opponent, horizontal, right))",
        &soccer(),
    )
    .unwrap();
    let f = normalize(&field(&cond, &scene).unwrap()).unwrap();
    let grid = f.grid;
    let raw = SpatialField::from_fn(grid, fig3_oracle);
    let oracle = normalize(&raw).unwrap();
    let gap = max_gap(&f, &oracle);
    ensure!(gap <= 1e-12, "engine and oracle differ by {gap:e}");
    let mut order: Vec<usize> = (0..f.values.len()).collect();
    order.sort_by(|a, b| f.values[*b].total_cmp(&f.values[*a]));
    let x_of = |i: usize| {
        let (c, r) = grid.col_row(i);
        grid.cell_center(c, r).x
    };
    let best = x_of(order[0]);
    let other_flank = order.iter().copied().find(|i| (x_of(*i) < 15.0) != (best < 15.0)).unwrap();
    let other = f.values[other_flank];
    ensure!((other - f.values[order[0]]).abs() <= 1e-12, "flanks are not mirror peaks");
    ensure!((x_of(order[0]) < 15.0) != (x_of(order[1]) < 15.0) || f.values[order[1]] == other, "top two cells share a flank");
    let peak = f.max();
    let mut shadow = 0;
    let mut worst = 0.0f64;
    for i in 0..f.values.len() {
        let (c, r) = grid.col_row(i);
        if in_shadow(grid.cell_center(c, r)) {
            shadow += 1;
            worst = worst.max(f.values[i] / peak);
        }
    }
    ensure!(shadow > 50, "only {shadow} cone cells");
    ensure!(worst < 0.2, "a cone cell carries {:.1}% of the peak", worst * 100.0);
    Ok(format!("oracle gap {gap:.1e}, {shadow} cone cells at most {:.1}% of peak", worst * 100.0))
}

fn sampling() -> Check {
    let grid = Grid { x_min: 0.0, x_max: 2.0, y_min: 0.0, y_max: 2.0, cols: 2, rows: 2 };
    let f = normalize(&SpatialField { grid, values: vec![1.0, 2.0, 3.0, 4.0], normalized: false }).unwrap();
    let s = Sampler::new(&f).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut counts = [0usize; 4];
    for _ in 0..40_000 {
        counts[s.cell(&mut rng)] += 1;
    }
    let stat: f64 = counts.iter().zip(&f.values).map(|(c, p)| (*c as f64 - p * 40_000.0).powi(2) / (p * 40_000.0)).sum();
    let p = 1.0 - ChiSquared::new(3.0).unwrap().cdf(stat);
    ensure!(p > 0.001, "chi-square p = {p}");
    let a = serde_json::to_string(&sample_many(&f, 11, 1000).unwrap()).unwrap();
    let b = serde_json::to_string(&sample_many(&f, 11, 1000).unwrap()).unwrap();
    ensure!(a == b, "same seed gave different draws");
    Ok(format!("p = {p:.3}, counts {counts:?}"))
}

fn oracle() -> Check {
    let cfg = RunConfig { max_ticks: 100, window: 12, actor: "user".into() };
    let mut events = 0;
    for seed in 0..200u64 {
        let p = support::random_program(seed);
        let world = support::hash_of(&("world", seed));
        let (mut a, mut b) = (support::ToyPlant::new(world), support::ToyPlant::new(world));
        let log = tacticforge_core::fsm::run(&compile(&p), &mut a, &cfg);
        let got = support::log_events(&log);
        let want = support::walk(&p, &mut b, &cfg);
        ensure!(got == want, "program seed {seed} diverges");
        ensure!(a.calls == b.calls, "program seed {seed}: different plant calls");
        events += got.len();
    }
    Ok(format!("200 programs, {events} events agree"))
}

fn running_example() -> Check {
    let lure = program(fixtures::LURE);
    for (scenario, action, line) in
        [("lure_chase", "Pass", "The defender followed you"), ("lure_hold", "Shoot", "The defender did not budge")]
    {
        let sc = fixtures::scenario(scenario).unwrap();
        for seed in 0..20 {
            let t = run(&lure, &sc, seed, 600);
            let names: Vec<&str> = t.actions.iter().map(|a| a.action.as_str()).collect();
            ensure!(names == ["MoveTo", "TriggerTeammatePass", action], "{scenario} seed {seed}: {names:?}");
            let speaks: Vec<&str> = t.speaks.iter().map(|s| s.text.as_str()).collect();
            ensure!(speaks.len() == 3 && speaks[2].starts_with(line), "{scenario} seed {seed}: {speaks:?}");
            ensure!(t.speaks.windows(2).all(|w| w[0].tick <= w[1].tick), "{scenario} seed {seed}: speaks out of order");
        }
        let golden = support::fixture_text(&format!("golden/{scenario}_s0.trace.json"));
        ensure!(run(&lure, &sc, 0, 600).to_json() == golden, "{scenario} drifted from its golden trace");
    }
    Ok("20 seeds per branch, goldens stable".into())
}

fn interrupt() -> Check {
    let t = run(&program(fixtures::INTERRUPT), &fixtures::scenario("lure_chase").unwrap(), 0, 600);
    let first = &t.actions[0];
    ensure!(first.action == "MoveTo" && first.status == ActionStatus::Interrupted, "first action {first:?}");
    let cut = first.end_tick.unwrap();
    ensure!(t.actions.get(1).map(|a| a.tick) == Some(cut), "successor did not start on tick {cut}");
    let dist = |tick: u64| {
        let s = t.states.iter().find(|s| s.tick == tick).unwrap();
        s.position("user").unwrap().dist(s.position("opponent").unwrap())
    };
    ensure!(dist(cut) < 2.0 && dist(cut - 1) >= 2.0, "guard did not flip at {cut}");
    Ok(format!("MoveTo cut at tick {cut}, successor started the same tick"))
}

fn deadlock() -> Check {
    let sc = fixtures::scenario("static").unwrap();
    let t = run(&program(fixtures::DEADLOCK), &sc, 0, 600);
    let Termination::Deadlock { tick, report } = &t.termination else {
        return Err(format!("ended with {:?}", t.termination));
    };
    let w = sc.config.deadlock_window;
    ensure!(*tick <= report.blocked_since + w + 1, "reported at {tick}, blocked since {}", report.blocked_since);
    let guards: Vec<&str> = report.edges.iter().map(|e| e.guard.as_str()).collect();
    ensure!(guards == ["distanceto(opponent,self,<,1.000)"], "guards {guards:?}");
    Ok(format!("blocked at {}, reported at {tick}, W = {w}", report.blocked_since))
}

fn metrics() -> Check {
    let r = Rubric { statements: vec!["s".into(); 4] };
    let c = correctness(&r, &RubricScore { values: vec![2, 2, 2, 1] }).unwrap();
    ensure!(c == 87.5, "correctness {c}");
    let node = |id: &str, l: &str| FlowNode { id: id.into(), label: l.into(), desc: String::new() };
    let edge = |s: &str, d: &str| FlowEdge { src: s.into(), dst: d.into(), guard: "true".into(), desc: String::new() };
    let gt = DecisionFlowGraph {
        nodes: vec![node("a", "x()"), node("b", "y()"), node("c", "z()")],
        edges: vec![edge("a", "b"), edge("b", "c")],
    };
    let sys = DecisionFlowGraph {
        nodes: vec![node("1", "x()"), node("2", "y()"), node("3", "w()")],
        edges: vec![edge("1", "2"), edge("2", "3")],
    };
    let k = completeness(&sys, &gt, &AliasMap::new()).unwrap();
    ensure!(k == 60.0, "completeness {k}");
    let mut corpus: Vec<DecisionFlowGraph> = [
        fixtures::LURE,
        fixtures::OVERLAP,
        fixtures::DISTRIBUTE,
        fixtures::DEADLOCK,
        fixtures::INTERRUPT,
        fixtures::LURE_DETOUR,
    ]
    .iter()
    .map(|s| extract_flow(&compile(&program(s))))
    .collect();
    corpus.push(extract_flow(&compile(&parse(fixtures::MANUFACTURING, &ApiRegistry::manufacturing()).unwrap())));
    corpus.push(DecisionFlowGraph::from_json(fixtures::LURE_GROUND_TRUTH).unwrap());
    for g in &corpus {
        ensure!(completeness(g, g, &AliasMap::new()) == Ok(100.0), "a corpus graph is incomplete against itself");
    }
    Ok(format!("87.5, 60.0, {} corpus graphs at 100", corpus.len()))
}

fn grounding() -> Check {
    let text = support::fixture_text("demos/narrated_lure.demo.json");
    let trace = tacticforge_core::domain::DemonstrationTrace::from_json(&text).unwrap();
    let out = render(&ground(&trace));
    let golden = support::fixture_text("golden/narrated_lure.txt");
    ensure!(out == golden.trim_end(), "rendered {out:?}");
    ensure!(out.contains("[user marked coordinate (7.5, 12.0)]"), "mark missing");
    ensure!(ground(&trace).to_json() == ground(&trace).to_json(), "grounding is not byte-stable");
    Ok(format!("{} characters match", out.len()))
}

fn count_ifs(b: &Block) -> usize {
    b.iter()
        .map(|s| match s {
            Stmt::If { branches, otherwise, .. } => {
                1 + branches.iter().map(|br| count_ifs(&br.body)).sum::<usize>() + otherwise.as_ref().map_or(0, count_ifs)
            }
            Stmt::While { body, .. } => count_ifs(body),
            _ => 0,
        })
        .sum()
}

fn fallback() -> Check {
    let p = fallback_synthesize(&fixtures::lure_demos(), &soccer()).map_err(|e| e.to_string())?;
    ensure!(print(&p) == support::fixture_text("golden/lure_fallback.tact"), "fallback drifted from its golden program");
    let ifs: usize = p.behaviors.iter().map(|b| count_ifs(&b.body)).sum();
    ensure!(ifs == 1, "{ifs} If statements");
    let gt = DecisionFlowGraph::from_json(fixtures::LURE_GROUND_TRUTH).unwrap();
    let k = completeness(&extract_flow(&compile(&p)), &gt, &AliasMap::new()).unwrap();
    ensure!(k == 100.0, "completeness {k}");
    Ok("golden program, one If, completeness 100".into())
}

fn repair_loop() -> Check {
    let p = program(fixtures::LURE_DETOUR);
    let flow = extract_flow(&compile(&p));
    let node = flow.nodes.iter().find(|n| n.label == "moveto(goal)").unwrap().id.clone();
    let fb = FeedbackSession::flow(&[node.as_str()], "don't move to the goal");
    let g = ground_flow_feedback(&flow, &fb).map_err(|e| e.to_string())?;
    let demos: Vec<_> = fixtures::lure_demos().iter().map(ground).collect();
    let client = ScriptedClient::new([support::fixture_text("golden/lure_fallback.tact")]);
    let input = RepairInput { program: &p, feedback: &fb, grounded_feedback: &g, demos: &demos };
    let (q, prov) = repair(&input, &soccer(), &client, DEFAULT_ATTEMPTS, 0).map_err(|e| e.to_string())?;
    ensure!(extract_flow(&compile(&q)).nodes.iter().all(|n| n.label != "moveto(goal)"), "node survived");
    let diff = prov.diff.unwrap_or_default();
    ensure!(diff.len() == 1 && diff.ops[0].kind == DiffKind::Removed, "diff {diff:?}");
    let bundle = repair_bundle(&input, &soccer());
    let rendered: Vec<String> = demos.iter().map(render).collect();
    ensure!(bundle.transcripts == rendered, "bundle lacks the demonstrations");
    ensure!(rendered.iter().all(|t| prov.attempts[0].prompt.contains(t.as_str())), "prompt lacks the demonstrations");
    Ok(format!("removed {:?}, {} transcripts in the bundle", diff.ops[0].old.as_deref().unwrap_or(""), rendered.len()))
}

fn generalization() -> Check {
    let sc = fixtures::scenario("lure_hold").unwrap();
    let grid = sc.workspace.grid();
    let lure = program(fixtures::LURE);
    let mut cells = std::collections::BTreeSet::new();
    let mut left = 0;
    for seed in 0..20 {
        let t = run(&lure, &sc, seed, 600);
        let tacticforge_core::domain::ResolvedArg::Point(p) = &t.actions[0].args[0] else {
            return Err(format!("seed {seed}: MoveTo target not a point"));
        };
        cells.insert(grid.cell_of(*p).unwrap());
        left += usize::from(p.x < 15.0);
    }
    ensure!(cells.len() >= 2, "{} distinct cells", cells.len());
    ensure!((4..=16).contains(&left), "left flank {left}/20");
    Ok(format!("{} distinct cells, {left}/20 on the left flank", cells.len()))
}

const CELL_SPEAKS: [&str; 5] = [
    "the worker's bucket is running low",
    "pick up another bucket",
    "Return to the worker's station.",
    "Wait until the worker permits",
    "The worker gave permission.",
];

fn cross_domain() -> Check {
    let reg = ApiRegistry::manufacturing();
    let p = parse(fixtures::MANUFACTURING, &reg).map_err(|e| e.to_string())?;
    ensure!(parse(fixtures::MANUFACTURING, &soccer()).is_err(), "soccer registry accepted the cell program");
    let mut cell = Cell::new(CellConfig::default());
    let log = tacticforge_core::fsm::run(&compile(&p), &mut cell, &RunConfig { max_ticks: 400, ..RunConfig::default() });
    ensure!(matches!(log.termination, Termination::MaxTicks { .. }), "ended with {:?}", log.termination);
    ensure!(log.speaks.len() >= 5, "{} speaks", log.speaks.len());
    for (s, want) in log.speaks.iter().zip(CELL_SPEAKS) {
        ensure!(s.text.starts_with(want), "speak {:?} where {want:?} was due", s.text);
    }
    ensure!(cell.state().swaps >= 1, "no bucket swap");
    Ok(format!("{} swaps, {} speaks in order, ran all 400 ticks", cell.state().swaps, log.speaks.len()))
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Check); 13] = [
        ("constraint algebra", Duration::from_secs(10), algebra),
        ("lure field reconstruction", Duration::from_secs(5), fig3),
        ("sampling statistics", Duration::from_secs(5), sampling),
        ("fsm / tree-walker equivalence", Duration::from_secs(60), oracle),
        ("running example end to end", Duration::from_secs(10), running_example),
        ("interrupt semantics", Duration::from_secs(5), interrupt),
        ("deadlock attribution", Duration::from_secs(5), deadlock),
        ("metrics exactness", Duration::from_secs(5), metrics),
        ("grounding golden", Duration::from_secs(5), grounding),
        ("fallback synthesis", Duration::from_secs(5), fallback),
        ("repair loop with stub client", Duration::from_secs(5), repair_loop),
        ("generalization across seeds", Duration::from_secs(10), generalization),
        ("cross-domain retargeting", Duration::from_secs(5), cross_domain),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, limit, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(d) if took > limit => Err(format!("{d}; took {took:.2?}, limit {limit:?}")),
            o => o,
        };
        match outcome {
            Ok(detail) => println!("PASS  {name:<32} {took:>9.2?}  {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name:<32} {took:>9.2?}  {why}");
            }
        }
    }
    println!("{} of 13 criteria pass", 13 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
