mod support;

use proptest::prelude::*;

use tacticforge_core::dsl::{parse, ApiRegistry};
use tacticforge_core::fixtures;
use tacticforge_core::fsm::compile;
use tacticforge_core::metrics::{
    completeness, correctness, export_dot, export_json, extract_flow, minimize, AliasMap, DecisionFlowGraph, FlowEdge,
    FlowNode, Rubric, RubricScore,
};

fn flows() -> Vec<(&'static str, DecisionFlowGraph)> {
    let soccer = ApiRegistry::soccer();
    let mut out: Vec<(&str, DecisionFlowGraph)> = [
        ("lure", fixtures::LURE),
        ("overlap", fixtures::OVERLAP),
        ("distribute", fixtures::DISTRIBUTE),
        ("deadlock", fixtures::DEADLOCK),
        ("interrupt", fixtures::INTERRUPT),
        ("lure_detour", fixtures::LURE_DETOUR),
    ]
    .into_iter()
    .map(|(n, src)| (n, extract_flow(&compile(&parse(src, &soccer).unwrap()))))
    .collect();
    let m = parse(fixtures::MANUFACTURING, &ApiRegistry::manufacturing()).unwrap();
    out.push(("manufacturing", extract_flow(&compile(&m))));
    out.push(("lure_gt", DecisionFlowGraph::from_json(fixtures::LURE_GROUND_TRUTH).unwrap()));
    out
}

fn none() -> AliasMap {
    AliasMap::new()
}

#[test]
fn a_graph_is_complete_against_itself() {
    for (name, g) in flows() {
        g.validate().unwrap();
        assert_eq!(completeness(&g, &g, &none()), Ok(100.0), "{name}");
    }
}

#[test]
fn flows_are_deterministic() {
    for ((n, a), (_, b)) in flows().into_iter().zip(flows()) {
        assert_eq!(export_json(&a), export_json(&b), "{n}");
    }
}

#[test]
fn json_export_round_trips() {
    for (name, g) in flows() {
        let back = DecisionFlowGraph::from_json(&export_json(&g)).unwrap();
        assert_eq!(back, g.sorted(), "{name}");
    }
}

#[test]
fn dot_lists_every_element() {
    for (name, g) in flows() {
        let dot = export_dot(&g);
        assert!(dot.starts_with("digraph flow {\n") && dot.ends_with("}\n"), "{name}");
        assert_eq!(dot.matches(" -> ").count(), g.edges.len(), "{name}");
        assert_eq!(dot.lines().count(), g.nodes.len() + g.edges.len() + 2, "{name}");
    }
}

#[test]
fn minimize_is_idempotent_and_valid() {
    for (name, g) in flows() {
        let m = minimize(&g);
        m.validate().unwrap();
        assert!(m.nodes.len() <= g.nodes.len(), "{name}");
        assert_eq!(g.nodes.len() - m.nodes.len(), g.edges.len() - m.edges.len(), "{name}: one edge goes with each merged node");
        assert_eq!(minimize(&m), m, "{name}");
    }
}

#[test]
fn minimize_merges_a_plain_chain() {
    let node = |id: &str, label: &str| FlowNode { id: id.into(), label: label.into(), desc: label.into() };
    let edge = |s: &str, d: &str, g: &str| FlowEdge { src: s.into(), dst: d.into(), guard: g.into(), desc: String::new() };
    let g = DecisionFlowGraph {
        nodes: vec![node("a", "x()"), node("b", "y()"), node("c", "z()")],
        edges: vec![edge("a", "b", "true"), edge("b", "c", "haspossession(self)")],
    };
    let m = minimize(&g);
    assert_eq!(m.nodes.len(), 2);
    assert_eq!(m.nodes[0].label, "x() ; y()");
    assert_eq!(m.edges, vec![edge("a", "c", "haspossession(self)")]);
}

#[test]
fn rubric_scores() {
    let r = Rubric { statements: (0..4).map(|i| format!("statement {i}")).collect() };
    assert_eq!(correctness(&r, &RubricScore { values: vec![2, 2, 2, 1] }), Ok(87.5));
    assert_eq!(correctness(&r, &RubricScore { values: vec![2; 4] }), Ok(100.0));
    assert!(correctness(&r, &RubricScore { values: vec![2; 3] }).is_err());
}

fn lure_gt() -> DecisionFlowGraph {
    DecisionFlowGraph::from_json(fixtures::LURE_GROUND_TRUTH).unwrap()
}

/// Keeps the elements whose mask bit is set; edges also need both ends.
fn subgraph(g: &DecisionFlowGraph, mask: &[bool]) -> DecisionFlowGraph {
    let nodes: Vec<FlowNode> = g.nodes.iter().zip(mask).filter(|(_, k)| **k).map(|(n, _)| n.clone()).collect();
    let edges = g
        .edges
        .iter()
        .zip(&mask[g.nodes.len()..])
        .filter(|(e, k)| **k && nodes.iter().any(|n| n.id == e.src) && nodes.iter().any(|n| n.id == e.dst))
        .map(|(e, _)| e.clone())
        .collect();
    DecisionFlowGraph { nodes, edges }
}

proptest! {
    #[test]
    fn correctness_stays_in_range(values in prop::collection::vec(0u8..=2, 1..40)) {
        let r = Rubric { statements: vec!["s".into(); values.len()] };
        let c = correctness(&r, &RubricScore { values: values.clone() }).unwrap();
        prop_assert!((0.0..=100.0).contains(&c));
        let sum: u32 = values.iter().map(|v| *v as u32).sum();
        prop_assert!((c - sum as f64 * 50.0 / values.len() as f64).abs() < 1e-9);
    }

    #[test]
    fn completeness_is_monotone(bits in prop::collection::vec(any::<bool>(), 64), more in prop::collection::vec(any::<bool>(), 64)) {
        let gt = lure_gt();
        let n = gt.nodes.len() + gt.edges.len();
        let small: Vec<bool> = bits[..n].to_vec();
        let large: Vec<bool> = small.iter().zip(&more[..n]).map(|(a, b)| *a || *b).collect();
        let cs = completeness(&subgraph(&gt, &small), &gt, &none()).unwrap();
        let cl = completeness(&subgraph(&gt, &large), &gt, &none()).unwrap();
        prop_assert!(cs <= cl);
        prop_assert!((0.0..=100.0).contains(&cs));
    }

    #[test]
    fn completeness_ignores_node_ids(salt in any::<u64>()) {
        let gt = lure_gt();
        let sys = extract_flow(&compile(&parse(fixtures::LURE, &ApiRegistry::soccer()).unwrap()));
        let rename = |id: &str| format!("n{}", support::hash_of(&(salt, id)));
        let mut renamed = sys.clone();
        for n in &mut renamed.nodes {
            n.id = rename(&n.id);
        }
        for e in &mut renamed.edges {
            e.src = rename(&e.src);
            e.dst = rename(&e.dst);
        }
        renamed.nodes.reverse();
        prop_assert_eq!(completeness(&renamed, &gt, &none()), completeness(&sys, &gt, &none()));
    }
}
