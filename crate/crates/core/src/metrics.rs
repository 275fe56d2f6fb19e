//! Decision-flow graphs and the two alignment scores: rubric correctness
//! and graph completeness.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraint::canonical_string;
use crate::fsm::{kind_label, Fsm, StateKind};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("ground truth graph is empty")]
    EmptyGroundTruth,
    #[error("rubric has no statements")]
    EmptyRubric,
    #[error("rubric has {expected} statements but {found} scores were given")]
    ScoreCount { expected: usize, found: usize },
    #[error("score {0} is not one of 0, 1, 2")]
    BadScore(u8),
    #[error("edge {src}->{dst} references a missing node")]
    DanglingEdge { src: String, dst: String },
    #[error("duplicate node id {0}")]
    DuplicateNode(String),
    #[error("invalid graph JSON: {0}")]
    Json(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowNode {
    pub id: String,
    pub label: String,
    #[serde(default)]
    pub desc: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowEdge {
    pub src: String,
    pub dst: String,
    pub guard: String,
    #[serde(default)]
    pub desc: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionFlowGraph {
    pub nodes: Vec<FlowNode>,
    pub edges: Vec<FlowEdge>,
}

impl DecisionFlowGraph {
    pub fn node(&self, id: &str) -> Option<&FlowNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Edge id as used by feedback annotations.
    pub fn edge_id(e: &FlowEdge) -> String {
        format!("{}->{}", e.src, e.dst)
    }

    pub fn has_element(&self, id: &str) -> bool {
        self.node(id).is_some() || self.edges.iter().any(|e| Self::edge_id(e) == id)
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        let mut seen = std::collections::HashSet::new();
        for n in &self.nodes {
            if !seen.insert(n.id.as_str()) {
                return Err(MetricsError::DuplicateNode(n.id.clone()));
            }
        }
        for e in &self.edges {
            if !seen.contains(e.src.as_str()) || !seen.contains(e.dst.as_str()) {
                return Err(MetricsError::DanglingEdge { src: e.src.clone(), dst: e.dst.clone() });
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, MetricsError> {
        let g: DecisionFlowGraph = serde_json::from_str(text).map_err(|e| MetricsError::Json(e.to_string()))?;
        g.validate()?;
        Ok(g)
    }

    /// Nodes sorted by label then id, edges by (src, dst, guard).
    pub fn sorted(&self) -> DecisionFlowGraph {
        let mut g = self.clone();
        g.nodes.sort_by(|a, b| (&a.label, &a.id).cmp(&(&b.label, &b.id)));
        g.edges.sort_by(|a, b| (&a.src, &a.dst, &a.guard).cmp(&(&b.src, &b.dst, &b.guard)));
        g
    }
}

fn node_id(i: usize) -> String {
    format!("s{i}")
}

/// One node per FSM state and one edge per transition. An action with an
/// `until` condition also gets an interrupt edge, guarded by that condition,
/// to each of its successors.
pub fn extract_flow(fsm: &Fsm) -> DecisionFlowGraph {
    let mut nodes = Vec::new();
    for s in &fsm.states {
        let mut texts: Vec<&str> = fsm.incoming(s.id).flat_map(|(_, e)| e.speaks.iter().map(|p| p.text.as_str())).collect();
        if s.id == fsm.entry {
            texts.splice(0..0, fsm.entry_speaks.iter().map(|p| p.text.as_str()));
        }
        let label = kind_label(&s.kind);
        let desc = if texts.is_empty() { label.clone() } else { texts.join(" ") };
        nodes.push(FlowNode { id: node_id(s.id), label, desc });
    }
    let mut edges = Vec::new();
    for e in &fsm.edges {
        let guard = canonical_string(&e.guard);
        let desc = match e.speaks.first() {
            Some(p) => p.text.clone(),
            None => guard.clone(),
        };
        edges.push(FlowEdge { src: node_id(e.src), dst: node_id(e.dst), guard, desc });
        if let StateKind::Action { until: Some(u), .. } = &fsm.states[e.src].kind {
            let guard = canonical_string(u);
            edges.push(FlowEdge { src: node_id(e.src), dst: node_id(e.dst), desc: format!("interrupted: {guard}"), guard });
        }
    }
    DecisionFlowGraph { nodes, edges }
}

/// Merges chains joined by a single always-true edge whose target has no
/// other way in.
pub fn minimize(g: &DecisionFlowGraph) -> DecisionFlowGraph {
    let mut g = g.clone();
    loop {
        let candidate = g.edges.iter().position(|e| {
            e.guard == "true"
                && e.src != e.dst
                && g.edges.iter().filter(|x| x.src == e.src).count() == 1
                && g.edges.iter().filter(|x| x.dst == e.dst).count() == 1
        });
        let Some(i) = candidate else { break };
        let e = g.edges.remove(i);
        let b = g.nodes.iter().position(|n| n.id == e.dst).expect("validated edge");
        let b = g.nodes.remove(b);
        let a = g.nodes.iter_mut().find(|n| n.id == e.src).expect("validated edge");
        a.label = format!("{} ; {}", a.label, b.label);
        a.desc = format!("{} {}", a.desc, b.desc);
        for x in &mut g.edges {
            if x.src == b.id {
                x.src = a.id.clone();
            }
        }
    }
    g
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

pub fn export_dot(g: &DecisionFlowGraph) -> String {
    let g = g.sorted();
    let mut out = String::from("digraph flow {\n");
    for n in &g.nodes {
        out.push_str(&format!("  \"{}\" [label=\"{}\"];\n", dot_escape(&n.id), dot_escape(&n.label)));
    }
    for e in &g.edges {
        out.push_str(&format!(
            "  \"{}\" -> \"{}\" [label=\"{}\"];\n",
            dot_escape(&e.src),
            dot_escape(&e.dst),
            dot_escape(&e.guard)
        ));
    }
    out.push_str("}\n");
    out
}

pub fn export_json(g: &DecisionFlowGraph) -> String {
    serde_json::to_string_pretty(&g.sorted()).expect("graph serializes")
}

/// User-supplied label equivalences, e.g. `"shoot" -> "shoot(goal)"`.
pub type AliasMap = HashMap<String, String>;

fn alias<'a>(aliases: &'a AliasMap, s: &'a str) -> &'a str {
    aliases.get(s).map(String::as_str).unwrap_or(s)
}

fn element_counts(g: &DecisionFlowGraph, aliases: &AliasMap) -> (BTreeMap<String, usize>, BTreeMap<(String, String, String), usize>) {
    let labels: HashMap<&str, &str> = g.nodes.iter().map(|n| (n.id.as_str(), alias(aliases, &n.label))).collect();
    let mut nodes = BTreeMap::new();
    for n in &g.nodes {
        *nodes.entry(alias(aliases, &n.label).to_string()).or_insert(0) += 1;
    }
    let mut edges = BTreeMap::new();
    for e in &g.edges {
        let key = (
            labels.get(e.src.as_str()).copied().unwrap_or(&e.src).to_string(),
            labels.get(e.dst.as_str()).copied().unwrap_or(&e.dst).to_string(),
            alias(aliases, &e.guard).to_string(),
        );
        *edges.entry(key).or_insert(0) += 1;
    }
    (nodes, edges)
}

/// Percentage of ground-truth nodes and edges present in the system graph.
/// Identity is by label, so node ids do not matter; repeated labels are
/// matched as a multiset.
pub fn completeness(sys: &DecisionFlowGraph, gt: &DecisionFlowGraph, aliases: &AliasMap) -> Result<f64, MetricsError> {
    let total = gt.nodes.len() + gt.edges.len();
    if total == 0 {
        return Err(MetricsError::EmptyGroundTruth);
    }
    let (sn, se) = element_counts(sys, aliases);
    let (gn, ge) = element_counts(gt, aliases);
    let hit_n: usize = gn.iter().map(|(k, c)| (*c).min(sn.get(k).copied().unwrap_or(0))).sum();
    let hit_e: usize = ge.iter().map(|(k, c)| (*c).min(se.get(k).copied().unwrap_or(0))).sum();
    Ok((hit_n + hit_e) as f64 / total as f64 * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rubric {
    pub statements: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubricScore {
    pub values: Vec<u8>,
}

pub fn correctness(rubric: &Rubric, score: &RubricScore) -> Result<f64, MetricsError> {
    if rubric.statements.is_empty() {
        return Err(MetricsError::EmptyRubric);
    }
    if score.values.len() != rubric.statements.len() {
        return Err(MetricsError::ScoreCount { expected: rubric.statements.len(), found: score.values.len() });
    }
    if let Some(v) = score.values.iter().find(|v| **v > 2) {
        return Err(MetricsError::BadScore(*v));
    }
    let s: u32 = score.values.iter().map(|v| *v as u32).sum();
    let s_max = 2 * rubric.statements.len() as u32;
    Ok(s as f64 / s_max as f64 * 100.0)
}
