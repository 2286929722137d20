use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::build::retained_codes;
use super::facet::FacetSpec;
use super::graph::{ArchKind, LatticeGraph, NodeKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub node: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node {
            Some(id) => write!(f, "node {}: {}", id, self.message),
            None => f.write_str(&self.message),
        }
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

struct Report(Vec<Violation>);

impl Report {
    fn at(&mut self, node: usize, message: String) {
        self.0.push(Violation {
            node: Some(node),
            message,
        });
    }

    fn global(&mut self, message: String) {
        self.0.push(Violation { node: None, message });
    }
}

/// Structural checks on a constructed graph. Returns every violation found;
/// an empty list means the graph is well formed.
pub fn validate_graph(graph: &LatticeGraph, facets: &FacetSpec) -> Vec<Violation> {
    let mut r = Report(Vec::new());
    let n = graph.nodes.len();
    if graph.facets != *facets {
        r.global("graph was built over a different facet spec".into());
    }
    for (i, node) in graph.nodes.iter().enumerate() {
        if node.id != i {
            r.at(i, alloc::format!("stored id {} does not match position", node.id));
        }
    }
    for e in &graph.edges {
        if e.from >= n || e.to >= n {
            r.global(alloc::format!("edge {} -> {} points outside the graph", e.from, e.to));
        }
    }
    if !r.0.is_empty() {
        return r.0;
    }

    // Acyclicity by Kahn's algorithm.
    let mut indeg = vec![0usize; n];
    for e in &graph.edges {
        indeg[e.to] += 1;
    }
    let mut ready: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut seen = 0;
    while let Some(v) = ready.pop() {
        seen += 1;
        for e in graph.edges.iter().filter(|e| e.from == v) {
            indeg[e.to] -= 1;
            if indeg[e.to] == 0 {
                ready.push(e.to);
            }
        }
    }
    if seen != n {
        r.global("graph contains a cycle".into());
        return r.0;
    }
    for e in &graph.edges {
        if e.from >= e.to {
            r.at(e.to, alloc::format!("edge from {} breaks the topological node order", e.from));
        }
    }

    let is_bias = |i: usize| matches!(graph.nodes[i].kind, NodeKind::Bias { .. });
    let roots: Vec<usize> = (0..n)
        .filter(|&i| !is_bias(i) && !graph.edges.iter().any(|e| e.to == i))
        .collect();
    if roots.len() != 1 {
        r.global(alloc::format!("expected exactly one root, found {:?}", roots));
    }
    let root = roots.first().copied();
    if let Some(root) = root {
        let node = &graph.nodes[root];
        if !node.code.is_empty() || !matches!(node.kind, NodeKind::Switcher(_) | NodeKind::Mlp(_)) {
            r.at(root, "root must be a switcher with the empty code".into());
        }
        let mut reach = vec![false; n];
        reach[root] = true;
        for i in 0..n {
            if is_bias(i) {
                reach[i] = true;
            }
        }
        for e in &graph.edges {
            if reach[e.from] && !is_bias(e.from) {
                reach[e.to] = true;
            }
        }
        for i in (0..n).filter(|&i| !reach[i]) {
            r.at(i, alloc::format!("{} is not reachable from the root", graph.nodes[i].name));
        }
    }
    let mut feeds = vec![false; n];
    for i in (0..n).rev() {
        feeds[i] = matches!(graph.nodes[i].kind, NodeKind::Tower { .. })
            || graph.edges.iter().any(|e| e.from == i && feeds[e.to]);
    }
    for i in (0..n).filter(|&i| !feeds[i]) {
        r.at(i, alloc::format!("{} lies on no path to a tower", graph.nodes[i].name));
    }

    for (i, node) in graph.nodes.iter().enumerate() {
        let out = graph.outbound(i);
        match &node.kind {
            NodeKind::Switcher(spec) => {
                if out.len() < 2 {
                    r.at(i, alloc::format!("switcher has {} branches, needs at least 2", out.len()));
                }
                if spec.child_ids.len() != out.len() {
                    r.at(i, "switcher children disagree with outbound edges".into());
                }
                for e in &out {
                    match spec.child_ids.get(e.branch) {
                        Some(id) if *id == graph.nodes[e.to].name => {}
                        _ => r.at(i, alloc::format!("branch {} does not name node {}", e.branch, e.to)),
                    }
                }
            }
            NodeKind::Tower { .. } if !out.is_empty() => r.at(i, "towers must be sinks".into()),
            _ => {}
        }
        let inbound = graph.inbound(i);
        for e in &inbound {
            let src = &graph.nodes[e.from].kind;
            if let NodeKind::Bias { .. } = src {
                if !matches!(node.kind, NodeKind::Tower { .. }) {
                    r.at(i, "bias nodes may only feed towers".into());
                }
                continue;
            }
            if src.output_dim() != node.kind.input_dim() {
                r.at(
                    i,
                    alloc::format!("input width {} but node {} emits {}", node.kind.input_dim(), e.from, src.output_dim()),
                );
            }
        }
    }

    // Towers and their in-degree.
    let (depth, body, bias) = match &graph.arch {
        ArchKind::Biasnet { bias_facet, body } => (body_depth(body), body.as_ref(), Some(*bias_facet)),
        other => (body_depth(other), other, None),
    };
    for (ti, task) in graph.tasks.iter().enumerate() {
        let towers: Vec<usize> = (0..n)
            .filter(|&i| matches!(graph.nodes[i].kind, NodeKind::Tower { task: t, .. } if t == ti))
            .collect();
        let Some(&tower) = towers.first() else {
            r.global(alloc::format!("task {:?} has no tower", task.name));
            continue;
        };
        if towers.len() > 1 {
            r.global(alloc::format!("task {:?} has {} towers", task.name, towers.len()));
        }
        let expected = match (body, depth) {
            (ArchKind::Mfh { .. }, Some(d)) => binomial(task.code.len(), d.min(task.code.len())),
            _ => 1,
        };
        let got = graph.body_in_degree(tower);
        if got != expected {
            r.at(tower, alloc::format!("tower in-degree {} but the attachment rule gives {}", got, expected));
        }
        if bias.is_some() && !graph.inbound(tower).iter().any(|e| is_bias(e.from)) {
            r.at(tower, "tower does not receive the bias logit".into());
        }
    }

    if let (ArchKind::Mfh { .. }, Some(d)) = (body, depth) {
        let active: Vec<usize> = facets.all_facets().into_iter().filter(|f| Some(*f) != bias).collect();
        for size in 1..=d {
            let Ok(expected) = retained_codes(facets, &active, &graph.tasks, size, d) else {
                r.global(alloc::format!("depth {} is out of range", d));
                break;
            };
            let got = graph
                .nodes
                .iter()
                .filter(|nd| nd.code.len() == size && nd.kind.tag() == "mlp" && nd.name.starts_with("mlp:"))
                .count();
            if got != expected.len() {
                r.global(alloc::format!("{} code nodes of size {}, expected {}", got, size, expected.len()));
            }
        }
    }
    r.0
}

fn body_depth(arch: &ArchKind) -> Option<usize> {
    match arch {
        ArchKind::Mfh { depth } => Some(*depth),
        _ => None,
    }
}
