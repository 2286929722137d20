use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};
use crate::lattice::{validate_graph, Code, LatticeGraph, NodeKind};
use crate::matrix::Matrix;
use crate::mlp::{init_mlp, mlp_backward, mlp_forward, MlpCache, MlpParams, MlpSpec};
use crate::params::Parameters;
use crate::seed::{derive_seed, name_salt};
use crate::switcher::{init_switcher, switcher_backward, switcher_forward, SwitcherCache, SwitcherParams, SwitcherSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeParams {
    Mlp(MlpParams),
    Switcher(SwitcherParams),
}

impl Parameters for NodeParams {
    fn zeros_like(&self) -> Self {
        match self {
            NodeParams::Mlp(p) => NodeParams::Mlp(p.zeros_like()),
            NodeParams::Switcher(p) => NodeParams::Switcher(p.zeros_like()),
        }
    }

    fn slices(&self) -> Vec<&[f64]> {
        match self {
            NodeParams::Mlp(p) => p.slices(),
            NodeParams::Switcher(p) => p.slices(),
        }
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            NodeParams::Mlp(p) => p.slices_mut(),
            NodeParams::Switcher(p) => p.slices_mut(),
        }
    }
}

/// Every learnable of a model, keyed by node id. Nodes without parameters
/// (zero-layer MLPs, zero-layer shared bottoms) have no entry.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub nodes: BTreeMap<usize, NodeParams>,
    /// Per multi-inbound node, one weight per body inbound edge in edge
    /// order. Empty unless the graph asks for learned combination.
    #[serde(default)]
    pub combination: BTreeMap<usize, Vec<f64>>,
}

impl ModelParams {
    /// Parameter count per entry in walk order: nodes first, then
    /// combination weights, each paired with its node id.
    pub fn layout(&self) -> Vec<(usize, usize)> {
        self.nodes
            .iter()
            .map(|(&id, p)| (id, p.param_count()))
            .chain(self.combination.iter().map(|(&id, w)| (id, w.len())))
            .collect()
    }

    /// Checks keys and shapes against the graph.
    pub fn check(&self, graph: &LatticeGraph) -> Result<()> {
        let expected = parameterized_nodes(graph);
        let keys: Vec<usize> = self.nodes.keys().copied().collect();
        if keys != expected {
            bail!(Contract, "parameters cover nodes {:?}, the graph needs {:?}", keys, expected);
        }
        for (&id, p) in &self.nodes {
            let ok = match (&graph.nodes[id].kind, p) {
                (NodeKind::Switcher(spec), NodeParams::Switcher(sp)) => {
                    init_switcher(spec).map(|z| z.same_layout(sp)).unwrap_or(false)
                }
                (NodeKind::Mlp(m) | NodeKind::Tower { mlp: m, .. } | NodeKind::Bias { mlp: m, .. }, NodeParams::Mlp(mp)) => {
                    mp.matches(m)
                }
                _ => false,
            };
            if !ok {
                bail!(Dimension, "parameters of node {} do not match its spec", id);
            }
        }
        let slots: BTreeMap<usize, usize> = if graph.learned_combination {
            graph.combination_slots().into_iter().collect()
        } else {
            BTreeMap::new()
        };
        if self.combination.len() != slots.len()
            || self.combination.iter().any(|(id, w)| slots.get(id) != Some(&w.len()))
        {
            bail!(Contract, "combination weights do not match the graph's multi-inbound nodes");
        }
        Ok(())
    }
}

impl Parameters for ModelParams {
    fn zeros_like(&self) -> Self {
        Self {
            nodes: self.nodes.iter().map(|(&k, p)| (k, p.zeros_like())).collect(),
            combination: self.combination.iter().map(|(&k, w)| (k, vec![0.0; w.len()])).collect(),
        }
    }

    fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for p in self.nodes.values() {
            out.extend(p.slices());
        }
        for w in self.combination.values() {
            out.push(&w[..]);
        }
        out
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for p in self.nodes.values_mut() {
            out.extend(p.slices_mut());
        }
        for w in self.combination.values_mut() {
            out.push(&mut w[..]);
        }
        out
    }
}

/// Ids of nodes that own at least one learnable scalar.
pub fn parameterized_nodes(graph: &LatticeGraph) -> Vec<usize> {
    graph
        .nodes
        .iter()
        .filter(|n| n.kind.param_count() > 0)
        .map(|n| n.id)
        .collect()
}

fn seeded_mlp(spec: &MlpSpec, seed: u64) -> MlpSpec {
    MlpSpec { seed, ..spec.clone() }
}

/// Deterministic initialization; each node is seeded from `seed` and its
/// name. Combination weights start at 1.
pub fn init_model(graph: &LatticeGraph, seed: u64) -> Result<ModelParams> {
    let violations = validate_graph(graph, &graph.facets);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| alloc::format!("{}", v)).collect();
        bail!(Contract, "graph is not valid: {}", list.join("; "));
    }
    let mut nodes = BTreeMap::new();
    for id in parameterized_nodes(graph) {
        let node = &graph.nodes[id];
        let node_seed = derive_seed(seed, name_salt(&node.name));
        let p = match &node.kind {
            NodeKind::Switcher(spec) => NodeParams::Switcher(init_switcher(&SwitcherSpec {
                seed: node_seed,
                ..spec.clone()
            })?),
            NodeKind::Mlp(m) | NodeKind::Tower { mlp: m, .. } | NodeKind::Bias { mlp: m, .. } => {
                NodeParams::Mlp(init_mlp(&seeded_mlp(m, node_seed))?)
            }
        };
        nodes.insert(id, p);
    }
    let combination = if graph.learned_combination {
        graph.combination_slots().into_iter().map(|(id, k)| (id, vec![1.0; k])).collect()
    } else {
        BTreeMap::new()
    };
    Ok(ModelParams { nodes, combination })
}

enum NodeCache {
    Mlp(MlpCache),
    Switcher(SwitcherCache),
}

/// Intermediate values of one forward pass, consumed by [`model_backward`].
pub struct ModelCache {
    batch: usize,
    active: Vec<bool>,
    outputs: Vec<Vec<Matrix>>,
    caches: Vec<Option<NodeCache>>,
}

fn empty_mlp(spec: &MlpSpec) -> MlpParams {
    MlpParams {
        input_dim: spec.input_dim,
        layers: Vec::new(),
    }
}

fn mlp_params<'a>(params: &'a ModelParams, id: usize, spec: &MlpSpec, scratch: &'a mut Option<MlpParams>) -> Result<&'a MlpParams> {
    match params.nodes.get(&id) {
        Some(NodeParams::Mlp(p)) => Ok(p),
        Some(_) => bail!(Contract, "node {} holds switcher parameters", id),
        None if spec.param_count() == 0 => Ok(scratch.insert(empty_mlp(spec))),
        None => bail!(Contract, "node {} has no parameters", id),
    }
}

fn switcher_params<'a>(
    params: &'a ModelParams,
    id: usize,
    spec: &SwitcherSpec,
    scratch: &'a mut Option<SwitcherParams>,
) -> Result<&'a SwitcherParams> {
    match params.nodes.get(&id) {
        Some(NodeParams::Switcher(p)) => Ok(p),
        Some(_) => bail!(Contract, "node {} holds MLP parameters", id),
        None if crate::switcher::switcher_param_count(spec) == 0 => Ok(scratch.insert(init_switcher(spec)?)),
        None => bail!(Contract, "node {} has no parameters", id),
    }
}

fn one_hot(regions: &[Code], facet: usize, width: usize, batch: usize) -> Result<Matrix> {
    if regions.len() != batch {
        bail!(Dimension, "bias input needs {} region codes, got {}", batch, regions.len());
    }
    let mut m = Matrix::zeros(batch, width);
    for (r, code) in regions.iter().enumerate() {
        match code.partition_of(facet) {
            Some(p) if p < width => m.set(r, p, 1.0),
            _ => bail!(Data, "sample {} has no partition for facet {}", r, facet),
        }
    }
    Ok(m)
}

/// Body inbound edges of `id` (bias edges excluded) in edge order.
fn body_inbound(graph: &LatticeGraph, id: usize) -> Vec<(usize, usize)> {
    graph
        .edges
        .iter()
        .filter(|e| e.to == id && !matches!(graph.nodes[e.from].kind, NodeKind::Bias { .. }))
        .map(|e| (e.from, e.branch))
        .collect()
}

fn source_output(graph: &LatticeGraph, outputs: &[Vec<Matrix>], from: usize, branch: usize) -> Matrix {
    match graph.nodes[from].kind {
        NodeKind::Switcher(_) => outputs[from][branch].clone(),
        _ => outputs[from][0].clone(),
    }
}

/// Evaluates the nodes flagged in `active` (all nodes when `None`) in
/// topological order. Returns one logit column per task, `None` for towers
/// that were not evaluated. `regions` is only read by bias nodes.
pub fn forward_subset(
    graph: &LatticeGraph,
    params: &ModelParams,
    x: &Matrix,
    regions: &[Code],
    active: Option<&[bool]>,
) -> Result<(Vec<Option<Vec<f64>>>, ModelCache)> {
    if x.cols() != graph.input_dim {
        bail!(Dimension, "model expects {} features, got {}", graph.input_dim, x.cols());
    }
    let n = graph.nodes.len();
    let active: Vec<bool> = match active {
        Some(a) if a.len() == n => a.to_vec(),
        Some(a) => bail!(Contract, "active mask has {} entries for {} nodes", a.len(), n),
        None => vec![true; n],
    };
    let batch = x.rows();
    let mut outputs: Vec<Vec<Matrix>> = vec![Vec::new(); n];
    let mut caches: Vec<Option<NodeCache>> = (0..n).map(|_| None).collect();
    let mut logits: Vec<Option<Vec<f64>>> = vec![None; graph.tasks.len()];
    for node in &graph.nodes {
        let id = node.id;
        if !active[id] {
            continue;
        }
        let input = match &node.kind {
            NodeKind::Bias { facet, mlp } => one_hot(regions, *facet, mlp.input_dim, batch)?,
            _ => {
                let inbound = body_inbound(graph, id);
                if inbound.is_empty() {
                    x.clone()
                } else {
                    let weights = params.combination.get(&id);
                    let mut sum: Option<Matrix> = None;
                    for (k, &(from, branch)) in inbound.iter().enumerate() {
                        if !active[from] {
                            bail!(Contract, "node {} is active but its input {} is not", id, from);
                        }
                        let part = source_output(graph, &outputs, from, branch);
                        let w = weights.map_or(1.0, |w| w[k]);
                        match sum.as_mut() {
                            None => sum = Some(if weights.is_some() { part.scale(w) } else { part }),
                            Some(s) => s.scaled_add_assign(w, &part)?,
                        }
                    }
                    sum.expect("at least one inbound edge")
                }
            }
        };
        match &node.kind {
            NodeKind::Switcher(spec) => {
                let mut scratch = None;
                let p = switcher_params(params, id, spec, &mut scratch)?;
                let (outs, cache) = switcher_forward(spec, p, &input)?;
                outputs[id] = outs;
                caches[id] = Some(NodeCache::Switcher(cache));
            }
            NodeKind::Mlp(spec) | NodeKind::Tower { mlp: spec, .. } | NodeKind::Bias { mlp: spec, .. } => {
                let mut scratch = None;
                let p = mlp_params(params, id, spec, &mut scratch)?;
                let (y, cache) = mlp_forward(p, &input)?;
                outputs[id] = vec![y];
                caches[id] = Some(NodeCache::Mlp(cache));
            }
        }
        if let NodeKind::Tower { task, .. } = node.kind {
            let mut z: Vec<f64> = outputs[id][0].data().to_vec();
            for e in graph.edges.iter().filter(|e| e.to == id) {
                if matches!(graph.nodes[e.from].kind, NodeKind::Bias { .. }) && active[e.from] {
                    for (zi, b) in z.iter_mut().zip(outputs[e.from][0].data()) {
                        *zi += b;
                    }
                }
            }
            logits[task] = Some(z);
        }
    }
    Ok((
        logits,
        ModelCache {
            batch,
            active,
            outputs,
            caches,
        },
    ))
}

/// Full forward pass: one logit (or raw regression value) column per task.
pub fn model_forward(graph: &LatticeGraph, params: &ModelParams, x: &Matrix, regions: &[Code]) -> Result<(Vec<Vec<f64>>, ModelCache)> {
    let (logits, cache) = forward_subset(graph, params, x, regions, None)?;
    Ok((logits.into_iter().map(|l| l.unwrap_or_default()).collect(), cache))
}

fn accumulate(slot: &mut Option<Matrix>, scale: f64, value: &Matrix) -> Result<()> {
    match slot {
        Some(m) => m.scaled_add_assign(scale, value),
        None => {
            *slot = Some(if scale == 1.0 { value.clone() } else { value.scale(scale) });
            Ok(())
        }
    }
}

/// Reverse pass for the logit gradients `d_logits` (one optional column per
/// task). Returns gradients laid out like `params`.
pub fn model_backward(
    graph: &LatticeGraph,
    params: &ModelParams,
    cache: &ModelCache,
    d_logits: &[Option<Vec<f64>>],
) -> Result<ModelParams> {
    if d_logits.len() != graph.tasks.len() || cache.outputs.len() != graph.nodes.len() {
        bail!(Contract, "backward inputs do not match the graph");
    }
    let mut grads = params.zeros_like();
    let n = graph.nodes.len();
    let mut d_out: Vec<Vec<Option<Matrix>>> = graph
        .nodes
        .iter()
        .map(|node| match &node.kind {
            NodeKind::Switcher(spec) => vec![None; spec.child_count()],
            _ => vec![None],
        })
        .collect();
    for id in (0..n).rev() {
        if !cache.active[id] {
            continue;
        }
        let node = &graph.nodes[id];
        if let NodeKind::Tower { task, .. } = node.kind {
            if let Some(d) = &d_logits[task] {
                if d.len() != cache.batch {
                    bail!(Dimension, "logit gradient for task {} has {} rows, batch is {}", task, d.len(), cache.batch);
                }
                d_out[id][0] = Some(Matrix::from_vec(cache.batch, 1, d.clone())?);
            }
        }
        if d_out[id].iter().all(Option::is_none) {
            continue;
        }
        let dx = match (&node.kind, cache.caches[id].as_ref()) {
            (NodeKind::Switcher(spec), Some(NodeCache::Switcher(c))) => {
                let mut scratch = None;
                let p = switcher_params(params, id, spec, &mut scratch)?;
                let (g, dx) = switcher_backward(spec, p, c, &d_out[id])?;
                if let Some(NodeParams::Switcher(slot)) = grads.nodes.get_mut(&id) {
                    *slot = g;
                }
                dx
            }
            (NodeKind::Mlp(spec) | NodeKind::Tower { mlp: spec, .. } | NodeKind::Bias { mlp: spec, .. }, Some(NodeCache::Mlp(c))) => {
                let mut scratch = None;
                let p = mlp_params(params, id, spec, &mut scratch)?;
                let dy = d_out[id][0].clone().expect("checked above");
                let (g, dx) = mlp_backward(p, c, &dy)?;
                if let Some(NodeParams::Mlp(slot)) = grads.nodes.get_mut(&id) {
                    *slot = g;
                }
                if matches!(node.kind, NodeKind::Tower { .. }) {
                    for e in graph.edges.iter().filter(|e| e.to == id) {
                        if matches!(graph.nodes[e.from].kind, NodeKind::Bias { .. }) && cache.active[e.from] {
                            accumulate(&mut d_out[e.from][0], 1.0, &dy)?;
                        }
                    }
                }
                dx
            }
            _ => return Err(Error::Contract(alloc::format!("cache of node {} has the wrong kind", id))),
        };
        if matches!(node.kind, NodeKind::Bias { .. }) {
            continue;
        }
        let inbound = body_inbound(graph, id);
        let weights = params.combination.get(&id);
        for (k, &(from, branch)) in inbound.iter().enumerate() {
            let slot = match graph.nodes[from].kind {
                NodeKind::Switcher(_) => branch,
                _ => 0,
            };
            let w = weights.map_or(1.0, |w| w[k]);
            accumulate(&mut d_out[from][slot], w, &dx)?;
            if weights.is_some() {
                let part = &cache.outputs[from][slot];
                let dw: f64 = dx.data().iter().zip(part.data()).map(|(a, b)| a * b).sum();
                if let Some(gw) = grads.combination.get_mut(&id) {
                    gw[k] += dw;
                }
            }
        }
    }
    Ok(grads)
}
