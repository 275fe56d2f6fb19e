use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use tacticforge_core::constraint::{field, normalize, Scene};
use tacticforge_core::domain::{DemonstrationTrace, ExecutionTrace};
use tacticforge_core::dsl::{parse, parse_condition, print, walk_stmts, ApiRegistry, BehaviorProgram, ParseError, Stmt};
use tacticforge_core::fsm::compile;
use tacticforge_core::grounding::{ground, ground_feedback, ground_flow_feedback, render, GroundedTranscript};
use tacticforge_core::metrics::{
    completeness, correctness, export_dot, export_json, extract_flow, minimize, AliasMap, DecisionFlowGraph, Rubric,
    RubricScore,
};
use tacticforge_core::sim;
use tacticforge_core::synth::{
    self, apply_structured_edit, diff_programs, fallback_synthesize, EchoClient, EditOp, FeedbackKind, FeedbackSession,
    GenClient, Provenance, RepairInput,
};

use crate::config::Config;
use crate::live::LiveClient;
use crate::{load_registry, load_scenario};

#[derive(Parser)]
#[command(name = "tacticforge", version, about = "Teach, inspect and repair behavior programs")]
pub struct Cli {
    /// Print failures as one JSON object on stderr.
    #[arg(long, global = true)]
    pub json_errors: bool,
    /// Path to tacticforge.toml.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClientArg {
    Stub,
    Live,
}

#[derive(Subcommand)]
pub enum Cmd {
    /// Parse a program and summarize it.
    Parse {
        file: PathBuf,
        /// `soccer`, `manufacturing`, or a registry JSON file.
        #[arg(long, default_value = "soccer")]
        registry: String,
    },
    /// Compile to a state machine and print its size.
    Compile {
        file: PathBuf,
        #[arg(long, default_value = "soccer")]
        registry: String,
    },
    /// Export the decision flow.
    Flow {
        file: PathBuf,
        #[arg(long, default_value = "soccer")]
        registry: String,
        #[arg(long, conflicts_with = "json")]
        dot: bool,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        minimize: bool,
    },
    /// Execute a program in the arena.
    Run {
        file: PathBuf,
        /// Bundled scenario id or scenario JSON file.
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 600)]
        max_ticks: u64,
        /// Write the execution trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Compose a condition into a spatial field over the scenario start.
    Field {
        expr: String,
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        normalize: bool,
    },
    /// Render a demonstration as a grounded transcript.
    Ground { demo: PathBuf },
    /// Synthesize a program from demonstrations.
    Synthesize {
        #[arg(long, num_args = 1.., required = true)]
        demos: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "stub")]
        client: ClientArg,
        #[arg(long, default_value = "soccer")]
        registry: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        provenance: Option<PathBuf>,
    },
    /// Repair a program from feedback.
    Repair {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        feedback: PathBuf,
        #[arg(long, num_args = 1..)]
        demos: Vec<PathBuf>,
        /// Execution trace the feedback refers to.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Structured edits (JSON list) applied by the stub client.
        #[arg(long)]
        edits: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "stub")]
        client: ClientArg,
        #[arg(long, default_value = "soccer")]
        registry: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        provenance: Option<PathBuf>,
    },
    /// Completeness of a flow against ground truth, or rubric correctness.
    Score {
        #[arg(long, requires = "gt", conflicts_with_all = ["rubric", "scores"])]
        flow: Option<PathBuf>,
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        alias: Option<PathBuf>,
        #[arg(long, requires = "scores")]
        rubric: Option<PathBuf>,
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_program(path: &Path, reg: &ApiRegistry) -> anyhow::Result<BehaviorProgram> {
    Ok(parse(&read(path)?, reg)?)
}

fn load_demos(paths: &[PathBuf]) -> anyhow::Result<Vec<DemonstrationTrace>> {
    paths
        .iter()
        .map(|p| DemonstrationTrace::from_json(&read(p)?).with_context(|| format!("demonstration {}", p.display())))
        .collect()
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn client(kind: ClientArg, cfg: &Config) -> anyhow::Result<Box<dyn GenClient>> {
    Ok(match kind {
        ClientArg::Stub => Box::new(EchoClient),
        ClientArg::Live => Box::new(LiveClient::new(&cfg.client)?),
    })
}

fn save_provenance(path: Option<&Path>, prov: &Provenance) -> anyhow::Result<()> {
    if let Some(p) = path {
        std::fs::write(p, serde_json::to_string_pretty(prov)?)?;
    }
    Ok(())
}

fn summarize(p: &BehaviorProgram) -> String {
    let mut out = String::new();
    for b in &p.behaviors {
        let (mut stmts, mut actions) = (0, std::collections::BTreeSet::new());
        walk_stmts(&b.body, &mut |s| {
            stmts += 1;
            if let Stmt::Do { call, .. } = s {
                actions.insert(call.name.clone());
            }
        });
        let actions: Vec<String> = actions.into_iter().collect();
        out.push_str(&format!("behavior {}: {stmts} statements, actions {}\n", b.name, actions.join(", ")));
    }
    out
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = Config::load(cli.config.as_deref())?;
    match cli.cmd {
        Cmd::Parse { file, registry } => {
            let p = load_program(&file, &load_registry(&registry)?)?;
            print!("{}", summarize(&p));
        }
        Cmd::Compile { file, registry } => {
            let fsm = compile(&load_program(&file, &load_registry(&registry)?)?);
            println!("states {}", fsm.states.len());
            println!("action states {}", fsm.action_count());
            println!("edges {}", fsm.edges.len());
            println!("speaks {}", fsm.speaks().len());
        }
        Cmd::Flow { file, registry, dot, json: _, minimize: min } => {
            let flow = extract_flow(&compile(&load_program(&file, &load_registry(&registry)?)?));
            let flow = if min { minimize(&flow) } else { flow };
            if dot {
                print!("{}", export_dot(&flow));
            } else {
                println!("{}", export_json(&flow));
            }
        }
        Cmd::Run { file, scenario, seed, max_ticks, trace } => {
            let sc = load_scenario(&scenario)?;
            let t = sim::run(&load_program(&file, &ApiRegistry::soccer())?, &sc, seed, max_ticks);
            for a in &t.actions {
                let end = a.end_tick.map_or("-".to_string(), |e| e.to_string());
                println!("{:>5} {:>5}  {:<20} {:?}", a.tick, end, a.action, a.status);
            }
            for s in &t.speaks {
                println!("{:>5}        say {:?}", s.tick, s.text);
            }
            println!("termination {}", serde_json::to_string(&t.termination)?);
            if let Some(p) = trace {
                std::fs::write(&p, t.to_json()).with_context(|| format!("writing {}", p.display()))?;
            }
        }
        Cmd::Field { expr, scenario, csv, normalize: norm } => {
            let sc = load_scenario(&scenario)?;
            let cond = parse_condition(&expr, &ApiRegistry::soccer())?;
            let scene = Scene::new(&sc.workspace, &sc.entities, &sc.initial);
            let f = field(&cond, &scene)?;
            let f = if norm { normalize(&f)? } else { f };
            let (c, r) = f.grid.col_row(f.argmax());
            let best = f.grid.cell_center(c, r);
            println!("cells {} sum {:.6} max {:.6} at ({:.2}, {:.2})", f.values.len(), f.sum(), f.max(), best.x, best.y);
            if let Some(p) = csv {
                std::fs::write(&p, f.to_csv()).with_context(|| format!("writing {}", p.display()))?;
            }
        }
        Cmd::Ground { demo } => {
            let d = DemonstrationTrace::from_json(&read(&demo)?)?;
            println!("{}", render(&ground(&d)));
        }
        Cmd::Synthesize { demos, client: kind, registry, seed, out, provenance } => {
            let reg = load_registry(&registry)?;
            let demos = load_demos(&demos)?;
            let (p, prov) = match kind {
                ClientArg::Stub => {
                    let p = fallback_synthesize(&demos, &reg)?;
                    let prov = Provenance {
                        operation: "synthesize".into(),
                        template: "fallback".into(),
                        seed,
                        attempts: vec![],
                        diff: None,
                        note: Some("deterministic fallback synthesizer".into()),
                    };
                    (p, prov)
                }
                ClientArg::Live => {
                    let ts: Vec<GroundedTranscript> = demos.iter().map(ground).collect();
                    synth::synthesize(&ts, &reg, client(kind, &cfg)?.as_ref(), cfg.client.attempts, seed)?
                }
            };
            save_provenance(provenance.as_deref(), &prov)?;
            emit(out.as_deref(), &print(&p))?;
        }
        Cmd::Repair { program, feedback, demos, trace, edits, client: kind, registry, seed, out, provenance } => {
            let reg = load_registry(&registry)?;
            let p = load_program(&program, &reg)?;
            let fb: FeedbackSession = read_json(&feedback)?;
            let grounded = match fb.kind {
                FeedbackKind::Flow => ground_flow_feedback(&extract_flow(&compile(&p)), &fb)?,
                FeedbackKind::Execution => {
                    let Some(t) = trace else { bail!("execution feedback needs --trace") };
                    ground_feedback(&ExecutionTrace::from_json(&read(&t)?)?, &fb)?
                }
            };
            let ts: Vec<GroundedTranscript> = load_demos(&demos)?.iter().map(ground).collect();
            let (q, prov) = match (kind, edits) {
                (ClientArg::Stub, Some(e)) => {
                    let ops: Vec<EditOp> = read_json(&e)?;
                    let q = apply_structured_edit(&p, &ops, &reg)?;
                    let prov = Provenance {
                        operation: "repair".into(),
                        template: "structured-edit".into(),
                        seed,
                        attempts: vec![],
                        diff: Some(diff_programs(&p, &q)),
                        note: Some(serde_json::to_string(&ops)?),
                    };
                    (q, prov)
                }
                _ => {
                    let input = RepairInput { program: &p, feedback: &fb, grounded_feedback: &grounded, demos: &ts };
                    synth::repair(&input, &reg, client(kind, &cfg)?.as_ref(), cfg.client.attempts, seed)?
                }
            };
            let n = prov.diff.as_ref().map_or(0, |d| d.len());
            eprintln!("{n} statement edit(s)");
            save_provenance(provenance.as_deref(), &prov)?;
            emit(out.as_deref(), &print(&q))?;
        }
        Cmd::Score { flow, gt, alias, rubric, scores } => match (flow, gt, rubric, scores) {
            (Some(f), Some(g), None, None) => {
                let sys = DecisionFlowGraph::from_json(&read(&f)?)?;
                let gt = DecisionFlowGraph::from_json(&read(&g)?)?;
                let aliases: AliasMap = match alias {
                    Some(a) => read_json(&a)?,
                    None => AliasMap::new(),
                };
                println!("{:?}", completeness(&sys, &gt, &aliases)?);
            }
            (None, None, Some(r), Some(s)) => {
                let r: Rubric = read_json(&r)?;
                let s: RubricScore = read_json(&s)?;
                println!("{:?}", correctness(&r, &s)?);
            }
            _ => bail!("give --flow with --gt, or --rubric with --scores"),
        },
        Cmd::Serve { port, static_dir, data } => {
            let mut cfg = cfg;
            cfg.port = port.unwrap_or(cfg.port);
            cfg.static_dir = static_dir.or(cfg.static_dir);
            cfg.data_dir = data.unwrap_or(cfg.data_dir);
            let live: Arc<dyn GenClient> = Arc::new(LiveClient::new(&cfg.client)?);
            tokio::runtime::Runtime::new()?.block_on(crate::api::serve(cfg, live))?;
        }
    }
    Ok(())
}

/// The error as a JSON diagnostic; parse errors carry their position.
pub fn error_json(e: &anyhow::Error) -> serde_json::Value {
    if let Some(p) = e.downcast_ref::<ParseError>() {
        let s = p.span();
        return json!({ "error": p.class(), "message": p.to_string(), "line": s.line, "col": s.col });
    }
    let chain: Vec<String> = e.chain().map(|c| c.to_string()).collect();
    json!({ "error": "failed", "message": chain.join(": ") })
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let json_errors = cli.json_errors;
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if json_errors {
                eprintln!("{}", error_json(&e));
            } else {
                eprintln!("error: {e:#}");
            }
            ExitCode::FAILURE
        }
    }
}
