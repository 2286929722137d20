//! Graph renderings: a JSON document that round-trips, and Graphviz DOT.

use std::fmt::Write as _;

use mfh_core::lattice::{ArchKind, Code, Edge, FacetSpec, LatticeGraph, Node, NodeKind, TaskSpec};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NodeRecord {
    id: usize,
    name: String,
    kind: String,
    /// Human-readable form of `code`; ignored on import.
    label: String,
    code: Code,
    level: usize,
    facet: Option<usize>,
    spec: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GraphDocument {
    facets: FacetSpec,
    arch_kind: ArchKind,
    input_dim: usize,
    learned_combination: bool,
    tasks: Vec<TaskSpec>,
    nodes: Vec<NodeRecord>,
    edges: Vec<Edge>,
}

pub fn export_json(graph: &LatticeGraph) -> String {
    let doc = GraphDocument {
        facets: graph.facets.clone(),
        arch_kind: graph.arch.clone(),
        input_dim: graph.input_dim,
        learned_combination: graph.learned_combination,
        tasks: graph.tasks.clone(),
        nodes: graph
            .nodes
            .iter()
            .map(|n| NodeRecord {
                id: n.id,
                name: n.name.clone(),
                kind: n.kind.tag().to_string(),
                label: n.code.label(&graph.facets),
                code: n.code.clone(),
                level: n.level,
                facet: n.facet,
                spec: n.kind.clone(),
            })
            .collect(),
        edges: graph.edges.clone(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("graph documents always serialize");
    text.push('\n');
    text
}

pub fn import_json(text: &str) -> Result<LatticeGraph> {
    let doc: GraphDocument = serde_json::from_str(text).map_err(Error::json("graph json"))?;
    let mut nodes = Vec::with_capacity(doc.nodes.len());
    for (i, r) in doc.nodes.into_iter().enumerate() {
        if r.id != i {
            return Err(Error::Schema(format!("node record {i} carries id {}", r.id)));
        }
        if r.kind != r.spec.tag() {
            return Err(Error::Schema(format!("node {i} is tagged {:?} but its spec is a {}", r.kind, r.spec.tag())));
        }
        nodes.push(Node {
            id: r.id,
            name: r.name,
            kind: r.spec,
            code: r.code,
            facet: r.facet,
            level: r.level,
        });
    }
    Ok(LatticeGraph {
        facets: doc.facets,
        tasks: doc.tasks,
        arch: doc.arch_kind,
        input_dim: doc.input_dim,
        learned_combination: doc.learned_combination,
        nodes,
        edges: doc.edges,
    })
}

fn shape(kind: &NodeKind) -> &'static str {
    match kind {
        NodeKind::Switcher(_) => "box",
        NodeKind::Mlp(_) => "ellipse",
        NodeKind::Tower { .. } => "doubleoctagon",
        NodeKind::Bias { .. } => "diamond",
    }
}

fn detail(kind: &NodeKind) -> String {
    match kind {
        NodeKind::Switcher(s) => s.kind.name(),
        NodeKind::Mlp(m) if m.is_identity() => "pass".into(),
        NodeKind::Mlp(m) | NodeKind::Tower { mlp: m, .. } | NodeKind::Bias { mlp: m, .. } => {
            let widths: Vec<String> = m.layer_sizes.iter().map(|w| w.to_string()).collect();
            format!("[{}]", widths.join(","))
        }
    }
}

fn quote(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// One `n<id>` statement per node in id order, then one statement per edge.
/// Edges out of switchers are labelled with their child slot.
pub fn export_dot(graph: &LatticeGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"{}\" {{", quote(&graph.arch.name()));
    let _ = writeln!(out, "  rankdir=BT;");
    for n in &graph.nodes {
        let _ = writeln!(
            out,
            "  n{} [label=\"{}\\n{} {}\\n{}\", shape={}];",
            n.id,
            quote(&n.name),
            n.kind.tag(),
            detail(&n.kind),
            quote(&n.code.label(&graph.facets)),
            shape(&n.kind)
        );
    }
    for e in &graph.edges {
        if matches!(graph.nodes[e.from].kind, NodeKind::Switcher(_)) {
            let _ = writeln!(out, "  n{} -> n{} [label=\"{}\"];", e.from, e.to, e.branch);
        } else {
            let _ = writeln!(out, "  n{} -> n{};", e.from, e.to);
        }
    }
    out.push_str("}\n");
    out
}
