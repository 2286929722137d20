use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::facet::{Code, FacetSpec};
use super::task::TaskSpec;
use crate::mlp::MlpSpec;
use crate::switcher::SwitcherSpec;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum ArchKind {
    Flat,
    Hmtl { permutation: Vec<usize> },
    Mfh { depth: usize },
    Biasnet { bias_facet: usize, body: Box<ArchKind> },
}

impl ArchKind {
    pub fn name(&self) -> String {
        match self {
            ArchKind::Flat => "flat".into(),
            ArchKind::Hmtl { .. } => "hmtl".into(),
            ArchKind::Mfh { depth } => alloc::format!("mfh-d{}", depth),
            ArchKind::Biasnet { body, .. } => alloc::format!("biasnet-{}", body.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Switcher(SwitcherSpec),
    Mlp(MlpSpec),
    Tower { task: usize, mlp: MlpSpec },
    /// Side tower reading the one-hot partition of `facet`; its scalar output
    /// is added to the logit of every tower it feeds.
    Bias { facet: usize, mlp: MlpSpec },
}

impl NodeKind {
    pub fn tag(&self) -> &'static str {
        match self {
            NodeKind::Switcher(_) => "switcher",
            NodeKind::Mlp(_) => "mlp",
            NodeKind::Tower { .. } => "tower",
            NodeKind::Bias { .. } => "bias",
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            NodeKind::Switcher(s) => s.output_dim(),
            NodeKind::Mlp(m) | NodeKind::Tower { mlp: m, .. } | NodeKind::Bias { mlp: m, .. } => m.output_dim(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            NodeKind::Switcher(s) => s.input_dim,
            NodeKind::Mlp(m) | NodeKind::Tower { mlp: m, .. } | NodeKind::Bias { mlp: m, .. } => m.input_dim,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            NodeKind::Switcher(s) => crate::switcher::switcher_param_count(s),
            NodeKind::Mlp(m) | NodeKind::Tower { mlp: m, .. } | NodeKind::Bias { mlp: m, .. } => m.param_count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub name: String,
    pub kind: NodeKind,
    pub code: Code,
    /// Set on facet-level nodes whose partition is still pending.
    pub facet: Option<usize>,
    pub level: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    /// Child slot of the source switcher; 0 for single-output sources.
    pub branch: usize,
}

/// The macro structure of a model. Node ids equal positions in `nodes`, and
/// nodes are stored in a topological order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeGraph {
    pub facets: FacetSpec,
    pub tasks: Vec<TaskSpec>,
    #[serde(rename = "arch_kind")]
    pub arch: ArchKind,
    pub input_dim: usize,
    /// Multi-inbound nodes weight each inbound branch by a learned scalar
    /// (initialized to 1) instead of a plain sum.
    pub learned_combination: bool,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

impl LatticeGraph {
    pub fn inbound(&self, node: usize) -> Vec<Edge> {
        self.edges.iter().copied().filter(|e| e.to == node).collect()
    }

    pub fn outbound(&self, node: usize) -> Vec<Edge> {
        self.edges.iter().copied().filter(|e| e.from == node).collect()
    }

    pub fn root(&self) -> Option<usize> {
        self.nodes
            .iter()
            .find(|n| !matches!(n.kind, NodeKind::Bias { .. }) && !self.edges.iter().any(|e| e.to == n.id))
            .map(|n| n.id)
    }

    pub fn tower_of_task(&self, task: usize) -> Option<usize> {
        self.nodes
            .iter()
            .find(|n| matches!(n.kind, NodeKind::Tower { task: t, .. } if t == task))
            .map(|n| n.id)
    }

    pub fn node_by_name(&self, name: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.name == name)
    }

    /// In-degree of a tower counting only body (non-bias) inbound edges.
    pub fn body_in_degree(&self, node: usize) -> usize {
        self.edges
            .iter()
            .filter(|e| e.to == node && !matches!(self.nodes[e.from].kind, NodeKind::Bias { .. }))
            .count()
    }

    pub fn count_kind(&self, tag: &str) -> usize {
        self.nodes.iter().filter(|n| n.kind.tag() == tag).count()
    }

    /// Ancestors of `targets` including the targets themselves, as a mask.
    pub fn ancestor_mask(&self, targets: &[usize]) -> Vec<bool> {
        let mut mask = alloc::vec![false; self.nodes.len()];
        let mut stack: Vec<usize> = targets.to_vec();
        while let Some(n) = stack.pop() {
            if mask[n] {
                continue;
            }
            mask[n] = true;
            for e in &self.edges {
                if e.to == n && !mask[e.from] {
                    stack.push(e.from);
                }
            }
        }
        mask
    }

    pub fn param_count(&self) -> usize {
        let base: usize = self.nodes.iter().map(|n| n.kind.param_count()).sum();
        if self.learned_combination {
            base + self.combination_slots().iter().map(|(_, k)| k).sum::<usize>()
        } else {
            base
        }
    }

    /// Nodes with more than one body inbound edge, with their inbound count.
    pub fn combination_slots(&self) -> Vec<(usize, usize)> {
        self.nodes
            .iter()
            .filter_map(|n| {
                let k = self.body_in_degree(n.id);
                (k > 1).then_some((n.id, k))
            })
            .collect()
    }
}
