//! Graph builders for flat, hierarchical, multi-faceted and biasnet models.
//!
//! Every builder first lays out a draft of roles and links, then
//! [`finalize`] prunes nodes that feed no tower, collapses switchers left
//! with one child into pass-through MLPs, propagates widths and fills in the
//! switcher and MLP specs.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::facet::{enumerate_codes_over, Code, FacetSpec};
use super::graph::{ArchKind, Edge, LatticeGraph, Node, NodeKind};
use super::task::{validate_tasks, TaskSpec};
use crate::error::{bail, Result};
use crate::mlp::MlpSpec;
use crate::switcher::{SwitcherKind, SwitcherSpec};

/// Switcher configuration applied to every switcher of one level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitcherTemplate {
    pub kind: SwitcherKind,
    pub shared_experts: usize,
    pub specific_experts: usize,
    /// Expert (or shared-bottom) layer widths; defaults to `[hidden_dim]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expert_layers: Option<Vec<usize>>,
}

impl SwitcherTemplate {
    pub fn new(kind: SwitcherKind) -> Self {
        let specific = match kind {
            SwitcherKind::Cgc | SwitcherKind::Ple { .. } => 1,
            _ => 0,
        };
        Self {
            kind,
            shared_experts: 2,
            specific_experts: specific,
            expert_layers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchOptions {
    pub input_dim: usize,
    /// Width of switcher outputs and lattice MLP outputs.
    pub hidden_dim: usize,
    /// Switcher template per level; the last entry covers deeper levels.
    pub levels: Vec<SwitcherTemplate>,
    /// Layers of the MLP carried by each code node (may be empty).
    pub node_mlp_layers: Vec<usize>,
    /// Layers of the per-facet MLPs below the facet switchers.
    pub facet_mlp_layers: Vec<usize>,
    /// Hidden widths of a biasnet side tower; a width-1 output is appended.
    pub bias_hidden: Vec<usize>,
    pub learned_combination: bool,
}

impl ArchOptions {
    /// Shared-bottom at the root, PLE one level up, CGC above that.
    pub fn new(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            levels: vec![
                SwitcherTemplate::new(SwitcherKind::SharedBottom),
                SwitcherTemplate::new(SwitcherKind::Ple { levels: 2 }),
                SwitcherTemplate::new(SwitcherKind::Cgc),
            ],
            node_mlp_layers: vec![hidden_dim],
            facet_mlp_layers: vec![hidden_dim],
            bias_hidden: vec![128, 64],
            learned_combination: false,
        }
    }

    pub fn with_levels(mut self, levels: Vec<SwitcherTemplate>) -> Self {
        self.levels = levels;
        self
    }

    fn template(&self, level: usize) -> Result<&SwitcherTemplate> {
        match self.levels.get(level.min(self.levels.len().saturating_sub(1))) {
            Some(t) => Ok(t),
            None => bail!(Config, "no switcher template configured"),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 {
            bail!(Config, "input_dim and hidden_dim must be at least 1");
        }
        if self.levels.is_empty() {
            bail!(Config, "at least one switcher level template is required");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Role {
    Switcher,
    Mlp(Vec<usize>),
    Tower(usize),
    Bias(usize),
}

#[derive(Debug, Clone)]
struct Proto {
    name: String,
    role: Role,
    code: Code,
    facet: Option<usize>,
    level: usize,
}

#[derive(Debug, Default)]
struct Draft {
    nodes: Vec<Proto>,
    links: Vec<(usize, usize)>,
}

impl Draft {
    fn add(&mut self, name: String, role: Role, code: Code, facet: Option<usize>, level: usize) -> usize {
        self.nodes.push(Proto {
            name,
            role,
            code,
            facet,
            level,
        });
        self.nodes.len() - 1
    }

    fn link(&mut self, from: usize, to: usize) {
        self.links.push((from, to));
    }

    fn add_tower(&mut self, task: usize, tasks: &[TaskSpec], level: usize) -> usize {
        let t = &tasks[task];
        self.add(alloc::format!("tower:{}", t.name), Role::Tower(task), t.code.clone(), None, level)
    }
}

fn code_node_name(prefix: &str, code: &Code, facets: &FacetSpec) -> String {
    alloc::format!("{}:{}", prefix, code.label(facets))
}

fn check_tasks(facets: &FacetSpec, tasks: &[TaskSpec], min: usize) -> Result<()> {
    facets.validate()?;
    validate_tasks(tasks, facets)?;
    if tasks.len() < min {
        bail!(Contract, "need at least {} tasks, got {}", min, tasks.len());
    }
    Ok(())
}

fn flat_body(draft: &mut Draft, tasks: &[TaskSpec]) {
    let root = draft.add("switcher:root".into(), Role::Switcher, Code::root(), None, 0);
    for t in 0..tasks.len() {
        let tower = draft.add_tower(t, tasks, 1);
        draft.link(root, tower);
    }
}

fn hmtl_body(draft: &mut Draft, facets: &FacetSpec, permutation: &[usize], tasks: &[TaskSpec], opts: &ArchOptions) -> Result<()> {
    let mut sorted = permutation.to_vec();
    sorted.sort_unstable();
    for t in tasks {
        let assigned: Vec<usize> = t.code.pairs().iter().map(|&(f, _)| f).collect();
        if assigned != sorted {
            bail!(
                Contract,
                "hierarchical trees need full task codes over the permuted facets; task {:?} does not qualify",
                t.name
            );
        }
    }
    let root = draft.add("switcher:root".into(), Role::Switcher, Code::root(), None, 0);
    expand_tree(draft, facets, permutation, tasks, opts, root, &Code::root(), 0);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn expand_tree(
    draft: &mut Draft,
    facets: &FacetSpec,
    permutation: &[usize],
    tasks: &[TaskSpec],
    opts: &ArchOptions,
    parent: usize,
    prefix: &Code,
    depth: usize,
) {
    let facet = permutation[depth];
    for p in 0..facets.facets[facet].partitions.len() {
        let code = prefix.with(facet, p);
        if !tasks.iter().any(|t| code.is_subcode_of(&t.code)) {
            continue;
        }
        if depth + 1 == permutation.len() {
            let task = tasks.iter().position(|t| t.code == code).expect("full codes are unique");
            let tower = draft.add_tower(task, tasks, depth + 1);
            draft.link(parent, tower);
        } else {
            let level = depth + 1;
            let mlp = draft.add(
                code_node_name("mlp", &code, facets),
                Role::Mlp(opts.node_mlp_layers.clone()),
                code.clone(),
                None,
                level,
            );
            draft.link(parent, mlp);
            let sw = draft.add(code_node_name("switcher", &code, facets), Role::Switcher, code.clone(), None, level);
            draft.link(mlp, sw);
            expand_tree(draft, facets, permutation, tasks, opts, sw, &code, depth + 1);
        }
    }
}

/// Codes of size `size` over `active` that lie below some task deep enough
/// to reach them.
pub(crate) fn retained_codes(
    facets: &FacetSpec,
    active: &[usize],
    tasks: &[TaskSpec],
    size: usize,
    depth: usize,
) -> Result<Vec<Code>> {
    Ok(enumerate_codes_over(facets, active, size)?
        .into_iter()
        .filter(|c| tasks.iter().any(|t| c.is_subcode_of(&t.code) && t.code.len() >= size && size <= depth))
        .collect())
}

fn mfh_body(draft: &mut Draft, facets: &FacetSpec, active: &[usize], depth: usize, tasks: &[TaskSpec], opts: &ArchOptions) -> Result<()> {
    let n = active.len();
    if n < 2 || depth < 1 || depth > n - 1 {
        bail!(Contract, "MFH depth {} is outside 1..={} for {} facets", depth, n.saturating_sub(1), n);
    }
    for t in tasks {
        if t.code.pairs().iter().any(|(f, _)| !active.contains(f)) {
            bail!(Contract, "task {:?} uses a facet outside the lattice", t.name);
        }
    }
    let root = draft.add("switcher:root".into(), Role::Switcher, Code::root(), None, 0);

    let mut level_codes: Vec<Vec<Code>> = vec![Vec::new()];
    for size in 1..=depth {
        level_codes.push(retained_codes(facets, active, tasks, size, depth)?);
    }

    // Facet MLPs and switchers; partition pending.
    let mut facet_switch: Vec<(usize, usize)> = Vec::new();
    for &f in active {
        if !level_codes[1].iter().any(|c| c.partition_of(f).is_some()) {
            continue;
        }
        let name = &facets.facets[f].name;
        let mlp = draft.add(
            alloc::format!("mlp:facet:{}", name),
            Role::Mlp(opts.facet_mlp_layers.clone()),
            Code::root(),
            Some(f),
            1,
        );
        draft.link(root, mlp);
        let sw = draft.add(alloc::format!("switcher:facet:{}", name), Role::Switcher, Code::root(), Some(f), 1);
        draft.link(mlp, sw);
        facet_switch.push((f, sw));
    }

    // Code nodes level by level. `switch_of[size]` maps code -> switcher id.
    let mut switch_of: Vec<Vec<(Code, usize)>> = vec![Vec::new()];
    for size in 1..=depth {
        let mut mlps = Vec::new();
        for code in &level_codes[size] {
            let mlp = draft.add(
                code_node_name("mlp", code, facets),
                Role::Mlp(opts.node_mlp_layers.clone()),
                code.clone(),
                None,
                size + 1,
            );
            if size == 1 {
                let (f, _) = code.pairs()[0];
                let sw = facet_switch.iter().find(|(g, _)| *g == f).expect("facet retained").1;
                draft.link(sw, mlp);
            } else {
                for (sub, sw) in &switch_of[size - 1] {
                    if sub.is_subcode_of(code) {
                        draft.link(*sw, mlp);
                    }
                }
            }
            mlps.push((code.clone(), mlp));
        }
        let mut switches = Vec::new();
        for (code, mlp) in mlps {
            let sw = draft.add(code_node_name("switcher", &code, facets), Role::Switcher, code.clone(), None, size + 1);
            draft.link(mlp, sw);
            switches.push((code, sw));
        }
        switch_of.push(switches);
    }

    for (ti, t) in tasks.iter().enumerate() {
        let size = depth.min(t.code.len());
        let tower = draft.add_tower(ti, tasks, depth + 2);
        for (code, sw) in &switch_of[size] {
            if code.is_subcode_of(&t.code) {
                draft.link(*sw, tower);
            }
        }
    }
    Ok(())
}

fn finalize(draft: Draft, facets: &FacetSpec, tasks: &[TaskSpec], arch: ArchKind, opts: &ArchOptions) -> Result<LatticeGraph> {
    let count = draft.nodes.len();
    // Keep nodes that reach a tower.
    let mut keep = vec![false; count];
    for (i, p) in draft.nodes.iter().enumerate() {
        if matches!(p.role, Role::Tower(_)) {
            keep[i] = true;
        }
    }
    let mut changed = true;
    while changed {
        changed = false;
        for &(a, b) in &draft.links {
            if keep[b] && !keep[a] {
                keep[a] = true;
                changed = true;
            }
        }
    }
    let mut new_id = vec![usize::MAX; count];
    let mut next = 0;
    for i in 0..count {
        if keep[i] {
            new_id[i] = next;
            next += 1;
        }
    }
    let links: Vec<(usize, usize)> = draft
        .links
        .iter()
        .filter(|(a, b)| keep[*a] && keep[*b])
        .map(|&(a, b)| (new_id[a], new_id[b]))
        .collect();
    let protos: Vec<Proto> = draft
        .nodes
        .into_iter()
        .zip(&keep)
        .filter_map(|(p, k)| k.then_some(p))
        .collect();

    let children: Vec<Vec<usize>> = (0..protos.len())
        .map(|i| links.iter().filter(|(a, _)| *a == i).map(|&(_, b)| b).collect())
        .collect();

    let mut nodes: Vec<Node> = Vec::with_capacity(protos.len());
    let mut edges: Vec<Edge> = Vec::with_capacity(links.len());
    let mut widths: Vec<usize> = Vec::with_capacity(protos.len());
    for (id, proto) in protos.iter().enumerate() {
        let inbound: Vec<usize> = links.iter().filter(|(_, b)| *b == id).map(|&(a, _)| a).collect();
        let body_inbound: Vec<usize> = inbound
            .iter()
            .copied()
            .filter(|&a| !matches!(protos[a].role, Role::Bias(_)))
            .collect();
        let input_dim = match proto.role {
            Role::Bias(f) => facets.facets[f].partitions.len(),
            _ if body_inbound.is_empty() => opts.input_dim,
            _ => {
                let w = widths[body_inbound[0]];
                if let Some(&bad) = body_inbound.iter().find(|&&a| widths[a] != w) {
                    bail!(
                        Config,
                        "node {} sums inputs of widths {} and {}",
                        proto.name,
                        w,
                        widths[bad]
                    );
                }
                w
            }
        };
        let is_collapsed = matches!(proto.role, Role::Switcher) && children[id].len() < 2;
        let kind = match &proto.role {
            Role::Switcher if !is_collapsed => {
                let template = opts.template(proto.level)?;
                let expert_layers = template.expert_layers.clone().unwrap_or_else(|| vec![opts.hidden_dim]);
                let expert_dim = match template.kind {
                    SwitcherKind::SharedBottom => expert_layers.last().copied().unwrap_or(input_dim),
                    _ => match expert_layers.last() {
                        Some(&w) => w,
                        None => bail!(Config, "gated switchers need at least one expert layer"),
                    },
                };
                let spec = SwitcherSpec {
                    kind: template.kind,
                    input_dim,
                    expert_dim,
                    child_ids: children[id].iter().map(|&c| protos[c].name.clone()).collect(),
                    shared_expert_count: template.shared_experts,
                    specific_expert_count_per_child: template.specific_experts,
                    expert_layers,
                    seed: 0,
                };
                spec.validate()?;
                NodeKind::Switcher(spec)
            }
            Role::Switcher => NodeKind::Mlp(MlpSpec::identity(input_dim)),
            Role::Mlp(layers) => NodeKind::Mlp(MlpSpec::new(input_dim, layers.clone(), 0)),
            Role::Tower(task) => NodeKind::Tower {
                task: *task,
                mlp: MlpSpec::new(input_dim, tasks[*task].tower_layers(), 0),
            },
            Role::Bias(f) => {
                let mut layers = opts.bias_hidden.clone();
                layers.push(1);
                NodeKind::Bias {
                    facet: *f,
                    mlp: MlpSpec::new(input_dim, layers, 0),
                }
            }
        };
        if let NodeKind::Mlp(m) | NodeKind::Tower { mlp: m, .. } | NodeKind::Bias { mlp: m, .. } = &kind {
            m.validate()?;
        }
        widths.push(kind.output_dim());
        nodes.push(Node {
            id,
            name: if is_collapsed {
                proto.name.replacen("switcher:", "pass:", 1)
            } else {
                proto.name.clone()
            },
            kind,
            code: proto.code.clone(),
            facet: proto.facet,
            level: proto.level,
        });
    }
    for (id, kids) in children.iter().enumerate() {
        for (slot, &c) in kids.iter().enumerate() {
            let branch = if matches!(nodes[id].kind, NodeKind::Switcher(_)) { slot } else { 0 };
            edges.push(Edge { from: id, to: c, branch });
        }
    }
    edges.sort();
    // Switcher child ids follow renames of collapsed children.
    let names: Vec<String> = nodes.iter().map(|n| n.name.clone()).collect();
    for (id, kids) in children.iter().enumerate() {
        if let NodeKind::Switcher(spec) = &mut nodes[id].kind {
            spec.child_ids = kids.iter().map(|&c| names[c].clone()).collect();
        }
    }
    Ok(LatticeGraph {
        facets: facets.clone(),
        tasks: tasks.to_vec(),
        arch,
        input_dim: opts.input_dim,
        learned_combination: opts.learned_combination,
        nodes,
        edges,
    })
}

/// One root switcher branching straight into every task tower.
pub fn build_flat(facets: &FacetSpec, tasks: &[TaskSpec], opts: &ArchOptions) -> Result<LatticeGraph> {
    opts.validate()?;
    check_tasks(facets, tasks, 2)?;
    let mut draft = Draft::default();
    flat_body(&mut draft, tasks);
    finalize(draft, facets, tasks, ArchKind::Flat, opts)
}

/// A tree that splits on `permutation[0]` first, then `permutation[1]`, and
/// so on, ending in one tower per full task code.
pub fn build_hmtl(facets: &FacetSpec, permutation: &[usize], tasks: &[TaskSpec], opts: &ArchOptions) -> Result<LatticeGraph> {
    opts.validate()?;
    check_tasks(facets, tasks, 1)?;
    let mut sorted = permutation.to_vec();
    sorted.sort_unstable();
    if sorted != facets.all_facets() {
        bail!(Contract, "{:?} is not a permutation of all {} facets", permutation, facets.len());
    }
    let mut draft = Draft::default();
    hmtl_body(&mut draft, facets, permutation, tasks, opts)?;
    finalize(
        draft,
        facets,
        tasks,
        ArchKind::Hmtl {
            permutation: permutation.to_vec(),
        },
        opts,
    )
}

/// The nested union of all facet hierarchies up to code size `depth`.
pub fn build_mfh(facets: &FacetSpec, depth: usize, tasks: &[TaskSpec], opts: &ArchOptions) -> Result<LatticeGraph> {
    opts.validate()?;
    check_tasks(facets, tasks, 1)?;
    let mut draft = Draft::default();
    mfh_body(&mut draft, facets, &facets.all_facets(), depth, tasks, opts)?;
    finalize(draft, facets, tasks, ArchKind::Mfh { depth }, opts)
}

/// A body over every facet except `bias_facet` plus a side tower on the
/// bias facet's one-hot partition whose output is added to every logit.
/// `body` selects the body shape; a hierarchical permutation must list the
/// non-bias facets.
pub fn build_biasnet(
    facets: &FacetSpec,
    bias_facet: usize,
    body: &ArchKind,
    tasks: &[TaskSpec],
    opts: &ArchOptions,
) -> Result<LatticeGraph> {
    opts.validate()?;
    check_tasks(facets, tasks, 1)?;
    if bias_facet >= facets.len() {
        bail!(Contract, "bias facet {} is out of range", bias_facet);
    }
    if let Some(t) = tasks.iter().find(|t| t.code.partition_of(bias_facet).is_some()) {
        bail!(
            Contract,
            "task {:?} assigns the bias facet {:?}",
            t.name,
            facets.facets[bias_facet].name
        );
    }
    let active: Vec<usize> = facets.all_facets().into_iter().filter(|&f| f != bias_facet).collect();
    let mut draft = Draft::default();
    let bias = draft.add(
        alloc::format!("bias:{}", facets.facets[bias_facet].name),
        Role::Bias(bias_facet),
        Code::root(),
        Some(bias_facet),
        0,
    );
    match body {
        ArchKind::Flat => {
            if tasks.len() < 2 {
                bail!(Contract, "a flat body needs at least 2 tasks");
            }
            flat_body(&mut draft, tasks);
        }
        ArchKind::Hmtl { permutation } => {
            let mut sorted = permutation.clone();
            sorted.sort_unstable();
            if sorted != active {
                bail!(Contract, "{:?} is not a permutation of the non-bias facets", permutation);
            }
            hmtl_body(&mut draft, facets, permutation, tasks, opts)?;
        }
        ArchKind::Mfh { depth } => mfh_body(&mut draft, facets, &active, *depth, tasks, opts)?,
        ArchKind::Biasnet { .. } => bail!(Contract, "biasnet bodies cannot nest"),
    }
    let towers: Vec<usize> = (0..draft.nodes.len())
        .filter(|&i| matches!(draft.nodes[i].role, Role::Tower(_)))
        .collect();
    for t in towers {
        draft.link(bias, t);
    }
    finalize(
        draft,
        facets,
        tasks,
        ArchKind::Biasnet {
            bias_facet,
            body: Box::new(body.clone()),
        },
        opts,
    )
}

/// Dispatches on `arch`.
pub fn build_graph(facets: &FacetSpec, arch: &ArchKind, tasks: &[TaskSpec], opts: &ArchOptions) -> Result<LatticeGraph> {
    match arch {
        ArchKind::Flat => build_flat(facets, tasks, opts),
        ArchKind::Hmtl { permutation } => build_hmtl(facets, permutation, tasks, opts),
        ArchKind::Mfh { depth } => build_mfh(facets, *depth, tasks, opts),
        ArchKind::Biasnet { bias_facet, body } => build_biasnet(facets, *bias_facet, body, tasks, opts),
    }
}
