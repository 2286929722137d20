//! Switchers: components that take one input and branch it into one
//! representation per child.
//!
//! Four kinds share one parameter layout. Shared-bottom is a single MLP whose
//! output every child receives. The gated kinds are stacks of levels; each
//! level holds shared experts, optional per-child specific experts, one
//! softmax gate per child and, on every level but the last, a shared-path
//! gate over all experts of that level.
//!
//! | kind | levels | specific experts | shared-path gate |
//! |------|--------|------------------|------------------|
//! | MMOE | 1      | none             | no               |
//! | CGC  | 1      | any              | no               |
//! | PLE(L) | L    | any              | levels `1..L`    |
//!
//! A child gate mixes `[specific experts of the child ‖ shared experts]`; the
//! shared-path gate mixes `[specific of child 0 ‖ … ‖ specific of child C-1 ‖
//! shared]`. Gates at level 1 read the switcher input; deeper gates and
//! experts read their own path's output from the level below.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use alloc::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activation::softmax_in_place;
use crate::error::{bail, Result};
use crate::matrix::Matrix;
use crate::mlp::{init_mlp, mlp_backward, mlp_forward, MlpCache, MlpParams, MlpSpec};
use crate::params::Parameters;
use crate::seed::{derive_seed, name_salt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitcherKind {
    SharedBottom,
    Mmoe,
    Cgc,
    Ple { levels: usize },
}

impl SwitcherKind {
    pub fn level_count(&self) -> usize {
        match self {
            SwitcherKind::SharedBottom => 0,
            SwitcherKind::Mmoe | SwitcherKind::Cgc => 1,
            SwitcherKind::Ple { levels } => *levels,
        }
    }

    pub fn name(&self) -> String {
        match self {
            SwitcherKind::SharedBottom => "shared_bottom".into(),
            SwitcherKind::Mmoe => "mmoe".into(),
            SwitcherKind::Cgc => "cgc".into(),
            SwitcherKind::Ple { levels } => alloc::format!("ple{}", levels),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitcherSpec {
    pub kind: SwitcherKind,
    pub input_dim: usize,
    pub expert_dim: usize,
    pub child_ids: Vec<String>,
    pub shared_expert_count: usize,
    pub specific_expert_count_per_child: usize,
    /// Layer widths of each expert (or of the shared bottom). For gated
    /// kinds the last width must equal `expert_dim`.
    pub expert_layers: Vec<usize>,
    pub seed: u64,
}

impl SwitcherSpec {
    /// A spec with the default expert layout: a single layer of width
    /// `expert_dim`, two shared experts, and one specific expert per child
    /// for CGC/PLE.
    pub fn new(kind: SwitcherKind, input_dim: usize, expert_dim: usize, child_ids: Vec<String>, seed: u64) -> Self {
        let specific = match kind {
            SwitcherKind::Cgc | SwitcherKind::Ple { .. } => 1,
            _ => 0,
        };
        Self {
            kind,
            input_dim,
            expert_dim,
            child_ids,
            shared_expert_count: 2,
            specific_expert_count_per_child: specific,
            expert_layers: vec![expert_dim],
            seed,
        }
    }

    pub fn child_count(&self) -> usize {
        self.child_ids.len()
    }

    pub fn output_dim(&self) -> usize {
        match self.kind {
            SwitcherKind::SharedBottom => self.expert_layers.last().copied().unwrap_or(self.input_dim),
            _ => self.expert_dim,
        }
    }

    pub fn child_index(&self, id: &str) -> Result<usize> {
        match self.child_ids.iter().position(|c| c == id) {
            Some(i) => Ok(i),
            None => bail!(Contract, "switcher has no child named {:?}", id),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.child_ids.len() < 2 {
            bail!(Config, "a switcher needs at least 2 children, got {}", self.child_ids.len());
        }
        for (i, id) in self.child_ids.iter().enumerate() {
            if self.child_ids[..i].contains(id) {
                bail!(Config, "duplicate switcher child id {:?}", id);
            }
        }
        if self.input_dim == 0 {
            bail!(Config, "switcher input_dim must be at least 1");
        }
        if self.expert_layers.iter().any(|&w| w == 0) {
            bail!(Config, "expert layer widths must be at least 1");
        }
        match self.kind {
            SwitcherKind::SharedBottom => {
                if self.output_dim() != self.expert_dim {
                    bail!(
                        Config,
                        "shared-bottom output width {} differs from expert_dim {}",
                        self.output_dim(),
                        self.expert_dim
                    );
                }
            }
            kind => {
                if self.expert_layers.last() != Some(&self.expert_dim) {
                    bail!(Config, "expert layers must end at expert_dim {}", self.expert_dim);
                }
                if self.shared_expert_count == 0 {
                    bail!(Config, "{} needs at least one shared expert", kind.name());
                }
                if kind == SwitcherKind::Mmoe && self.specific_expert_count_per_child != 0 {
                    bail!(Config, "MMOE has no task-specific experts");
                }
                if let SwitcherKind::Ple { levels } = kind {
                    if levels == 0 {
                        bail!(Config, "PLE needs at least one level");
                    }
                }
            }
        }
        Ok(())
    }

    fn level_input_dim(&self, level: usize) -> usize {
        if level == 0 {
            self.input_dim
        } else {
            self.expert_dim
        }
    }

    fn expert_spec(&self, level: usize, seed: u64) -> MlpSpec {
        MlpSpec::new(self.level_input_dim(level), self.expert_layers.clone(), seed)
    }

    fn child_gate_width(&self) -> usize {
        self.specific_expert_count_per_child + self.shared_expert_count
    }

    fn shared_gate_width(&self) -> usize {
        self.child_count() * self.specific_expert_count_per_child + self.shared_expert_count
    }
}

/// Exact learnable-scalar count for a spec.
pub fn switcher_param_count(spec: &SwitcherSpec) -> usize {
    match spec.kind {
        SwitcherKind::SharedBottom => MlpSpec::new(spec.input_dim, spec.expert_layers.clone(), 0).param_count(),
        kind => {
            let levels = kind.level_count();
            let children = spec.child_count();
            let mut total = 0;
            for level in 0..levels {
                let in_dim = spec.level_input_dim(level);
                let expert = MlpSpec::new(in_dim, spec.expert_layers.clone(), 0).param_count();
                let experts = spec.shared_expert_count + children * spec.specific_expert_count_per_child;
                total += experts * expert;
                total += children * in_dim * spec.child_gate_width();
                if level + 1 < levels {
                    total += in_dim * spec.shared_gate_width();
                }
            }
            total
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatedLevel {
    pub shared_experts: Vec<MlpParams>,
    /// One list per child, each possibly empty.
    pub specific_experts: Vec<Vec<MlpParams>>,
    /// One `in×visible` gate per child.
    pub child_gates: Vec<Matrix>,
    /// Present on all but the last level of a PLE.
    pub shared_gate: Option<Matrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitcherParams {
    SharedBottom { bottom: MlpParams },
    Gated { levels: Vec<GatedLevel> },
}

impl Parameters for SwitcherParams {
    fn zeros_like(&self) -> Self {
        match self {
            SwitcherParams::SharedBottom { bottom } => SwitcherParams::SharedBottom {
                bottom: bottom.zeros_like(),
            },
            SwitcherParams::Gated { levels } => SwitcherParams::Gated {
                levels: levels
                    .iter()
                    .map(|l| GatedLevel {
                        shared_experts: l.shared_experts.iter().map(Parameters::zeros_like).collect(),
                        specific_experts: l
                            .specific_experts
                            .iter()
                            .map(|es| es.iter().map(Parameters::zeros_like).collect())
                            .collect(),
                        child_gates: l.child_gates.iter().map(|g| Matrix::zeros(g.rows(), g.cols())).collect(),
                        shared_gate: l.shared_gate.as_ref().map(|g| Matrix::zeros(g.rows(), g.cols())),
                    })
                    .collect(),
            },
        }
    }

    fn slices(&self) -> Vec<&[f64]> {
        match self {
            SwitcherParams::SharedBottom { bottom } => bottom.slices(),
            SwitcherParams::Gated { levels } => {
                let mut out = Vec::new();
                for l in levels {
                    for e in &l.shared_experts {
                        out.extend(e.slices());
                    }
                    for es in &l.specific_experts {
                        for e in es {
                            out.extend(e.slices());
                        }
                    }
                    for g in &l.child_gates {
                        out.push(g.data());
                    }
                    if let Some(g) = &l.shared_gate {
                        out.push(g.data());
                    }
                }
                out
            }
        }
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            SwitcherParams::SharedBottom { bottom } => bottom.slices_mut(),
            SwitcherParams::Gated { levels } => {
                let mut out = Vec::new();
                for l in levels {
                    for e in &mut l.shared_experts {
                        out.extend(e.slices_mut());
                    }
                    for es in &mut l.specific_experts {
                        for e in es {
                            out.extend(e.slices_mut());
                        }
                    }
                    for g in &mut l.child_gates {
                        out.push(g.data_mut());
                    }
                    if let Some(g) = &mut l.shared_gate {
                        out.push(g.data_mut());
                    }
                }
                out
            }
        }
    }
}

fn xavier_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let limit = libm::sqrt(6.0 / (rows + cols) as f64);
    let data = (0..rows * cols).map(|_| rng.random_range(-limit..=limit)).collect();
    Matrix::from_vec(rows, cols, data).expect("shape matches data length")
}

/// Deterministic initialization. Child-owned pieces (specific experts, child
/// gates, the child's column block of a shared-path gate) are seeded from the
/// child id, so reordering children reorders parameters without changing them.
pub fn init_switcher(spec: &SwitcherSpec) -> Result<SwitcherParams> {
    spec.validate()?;
    if spec.kind == SwitcherKind::SharedBottom {
        let bottom = init_mlp(&MlpSpec::new(spec.input_dim, spec.expert_layers.clone(), derive_seed(spec.seed, 0)))?;
        return Ok(SwitcherParams::SharedBottom { bottom });
    }
    let levels = spec.kind.level_count();
    let mut out = Vec::with_capacity(levels);
    for level in 0..levels {
        let in_dim = spec.level_input_dim(level);
        let level_seed = derive_seed(spec.seed, level as u64 + 1);
        let shared_experts = (0..spec.shared_expert_count)
            .map(|i| init_mlp(&spec.expert_spec(level, derive_seed(level_seed, i as u64))))
            .collect::<Result<Vec<_>>>()?;
        let mut specific_experts = Vec::with_capacity(spec.child_count());
        let mut child_gates = Vec::with_capacity(spec.child_count());
        for id in &spec.child_ids {
            let child_seed = derive_seed(level_seed, name_salt(id));
            specific_experts.push(
                (0..spec.specific_expert_count_per_child)
                    .map(|i| init_mlp(&spec.expert_spec(level, derive_seed(child_seed, i as u64 + 1))))
                    .collect::<Result<Vec<_>>>()?,
            );
            child_gates.push(xavier_matrix(in_dim, spec.child_gate_width(), derive_seed(child_seed, 0)));
        }
        let shared_gate = if level + 1 < levels {
            let mut gate = Matrix::zeros(in_dim, spec.shared_gate_width());
            let k = spec.specific_expert_count_per_child;
            let mut col = 0;
            let mut blocks: Vec<(usize, Matrix)> = Vec::new();
            for id in &spec.child_ids {
                let seed = derive_seed(derive_seed(level_seed, name_salt(id)), u64::MAX);
                blocks.push((k, xavier_matrix(in_dim, k, seed)));
            }
            blocks.push((
                spec.shared_expert_count,
                xavier_matrix(in_dim, spec.shared_expert_count, derive_seed(level_seed, u64::MAX)),
            ));
            for (width, block) in blocks {
                for r in 0..in_dim {
                    for c in 0..width {
                        gate.set(r, col + c, block.get(r, c));
                    }
                }
                col += width;
            }
            Some(gate)
        } else {
            None
        };
        out.push(GatedLevel {
            shared_experts,
            specific_experts,
            child_gates,
            shared_gate,
        });
    }
    Ok(SwitcherParams::Gated { levels: out })
}

fn check_params(spec: &SwitcherSpec, params: &SwitcherParams) -> Result<()> {
    let ok = match (spec.kind, params) {
        (SwitcherKind::SharedBottom, SwitcherParams::SharedBottom { bottom }) => {
            bottom.matches(&MlpSpec::new(spec.input_dim, spec.expert_layers.clone(), 0))
        }
        (SwitcherKind::SharedBottom, _) | (_, SwitcherParams::SharedBottom { .. }) => false,
        (kind, SwitcherParams::Gated { levels }) => {
            levels.len() == kind.level_count()
                && levels.iter().enumerate().all(|(li, l)| {
                    let in_dim = spec.level_input_dim(li);
                    let expert = MlpSpec::new(in_dim, spec.expert_layers.clone(), 0);
                    l.shared_experts.len() == spec.shared_expert_count
                        && l.shared_experts.iter().all(|e| e.matches(&expert))
                        && l.specific_experts.len() == spec.child_count()
                        && l.specific_experts.iter().all(|es| {
                            es.len() == spec.specific_expert_count_per_child && es.iter().all(|e| e.matches(&expert))
                        })
                        && l.child_gates.len() == spec.child_count()
                        && l.child_gates
                            .iter()
                            .all(|g| g.shape() == (in_dim, spec.child_gate_width()))
                        && match &l.shared_gate {
                            Some(g) => li + 1 < levels.len() && g.shape() == (in_dim, spec.shared_gate_width()),
                            None => li + 1 == levels.len(),
                        }
                })
        }
    };
    if !ok {
        bail!(Dimension, "switcher parameters do not match the {} spec", spec.kind.name());
    }
    Ok(())
}

#[derive(Debug, Clone)]
struct GateCache {
    input_slot: usize,
    /// Row-wise softmax weights, `batch×visible`.
    weights: Matrix,
    /// Indices into the level's expert list, in visible order.
    visible: Vec<usize>,
}

#[derive(Debug, Clone)]
struct LevelCache {
    /// Slot `c` holds child `c`'s input, slot `C` the shared path's input.
    inputs: Vec<Matrix>,
    /// Flat expert list: shared experts first, then specific experts per child.
    expert_outputs: Vec<Matrix>,
    expert_caches: Vec<MlpCache>,
    expert_slots: Vec<usize>,
    child_gates: Vec<GateCache>,
    shared_gate: Option<GateCache>,
}

/// Values retained by [`switcher_forward`].
#[derive(Debug, Clone)]
pub struct SwitcherCache {
    kind: SwitcherKind,
    batch: usize,
    input_dim: usize,
    bottom: Option<MlpCache>,
    levels: Vec<LevelCache>,
}

/// Position of each expert in a level's flat list.
fn expert_index(spec: &SwitcherSpec, child: Option<usize>, i: usize) -> usize {
    match child {
        None => i,
        Some(c) => spec.shared_expert_count + c * spec.specific_expert_count_per_child + i,
    }
}

fn child_visible(spec: &SwitcherSpec, c: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..spec.specific_expert_count_per_child)
        .map(|i| expert_index(spec, Some(c), i))
        .collect();
    v.extend((0..spec.shared_expert_count).map(|i| expert_index(spec, None, i)));
    v
}

fn shared_visible(spec: &SwitcherSpec) -> Vec<usize> {
    let mut v = Vec::new();
    for c in 0..spec.child_count() {
        v.extend((0..spec.specific_expert_count_per_child).map(|i| expert_index(spec, Some(c), i)));
    }
    v.extend((0..spec.shared_expert_count).map(|i| expert_index(spec, None, i)));
    v
}

fn gate_weights(input: &Matrix, gate: &Matrix) -> Result<Matrix> {
    let mut logits = input.matmul(gate)?;
    for r in 0..logits.rows() {
        softmax_in_place(logits.row_mut(r));
    }
    Ok(logits)
}

fn mix(weights: &Matrix, visible: &[usize], experts: &[Matrix]) -> Matrix {
    let batch = weights.rows();
    let width = experts[visible[0]].cols();
    let mut out = Matrix::zeros(batch, width);
    for r in 0..batch {
        let w = weights.row(r);
        let row = out.row_mut(r);
        for (slot, &e) in visible.iter().enumerate() {
            let src = experts[e].row(r);
            for (o, v) in row.iter_mut().zip(src) {
                *o += w[slot] * v;
            }
        }
    }
    out
}

/// Forward pass. Child outputs are returned in `spec.child_ids` order.
pub fn switcher_forward(spec: &SwitcherSpec, params: &SwitcherParams, x: &Matrix) -> Result<(Vec<Matrix>, SwitcherCache)> {
    spec.validate()?;
    check_params(spec, params)?;
    if x.cols() != spec.input_dim {
        bail!(Dimension, "switcher expects {} input columns, got {}", spec.input_dim, x.cols());
    }
    let children = spec.child_count();
    match params {
        SwitcherParams::SharedBottom { bottom } => {
            let (y, cache) = mlp_forward(bottom, x)?;
            let outputs = vec![y; children];
            Ok((
                outputs,
                SwitcherCache {
                    kind: spec.kind,
                    batch: x.rows(),
                    input_dim: x.cols(),
                    bottom: Some(cache),
                    levels: Vec::new(),
                },
            ))
        }
        SwitcherParams::Gated { levels } => {
            let mut inputs: Vec<Matrix> = vec![x.clone(); children + 1];
            let mut caches = Vec::with_capacity(levels.len());
            let mut child_outputs = Vec::new();
            for level in levels {
                let mut expert_outputs = Vec::new();
                let mut expert_caches = Vec::new();
                let mut expert_slots = Vec::new();
                for e in &level.shared_experts {
                    let (y, c) = mlp_forward(e, &inputs[children])?;
                    expert_outputs.push(y);
                    expert_caches.push(c);
                    expert_slots.push(children);
                }
                for (c, es) in level.specific_experts.iter().enumerate() {
                    for e in es {
                        let (y, cache) = mlp_forward(e, &inputs[c])?;
                        expert_outputs.push(y);
                        expert_caches.push(cache);
                        expert_slots.push(c);
                    }
                }
                let mut gate_caches = Vec::with_capacity(children);
                let mut outs = Vec::with_capacity(children);
                for (c, gate) in level.child_gates.iter().enumerate() {
                    let visible = child_visible(spec, c);
                    let weights = gate_weights(&inputs[c], gate)?;
                    outs.push(mix(&weights, &visible, &expert_outputs));
                    gate_caches.push(GateCache {
                        input_slot: c,
                        weights,
                        visible,
                    });
                }
                let (shared_out, shared_gate) = match &level.shared_gate {
                    Some(gate) => {
                        let visible = shared_visible(spec);
                        let weights = gate_weights(&inputs[children], gate)?;
                        let out = mix(&weights, &visible, &expert_outputs);
                        (
                            Some(out),
                            Some(GateCache {
                                input_slot: children,
                                weights,
                                visible,
                            }),
                        )
                    }
                    None => (None, None),
                };
                let level_inputs = core::mem::take(&mut inputs);
                caches.push(LevelCache {
                    inputs: level_inputs,
                    expert_outputs,
                    expert_caches,
                    expert_slots,
                    child_gates: gate_caches,
                    shared_gate,
                });
                match shared_out {
                    Some(shared) => {
                        inputs = outs;
                        inputs.push(shared);
                    }
                    None => child_outputs = outs,
                }
            }
            Ok((
                child_outputs,
                SwitcherCache {
                    kind: spec.kind,
                    batch: x.rows(),
                    input_dim: x.cols(),
                    bottom: None,
                    levels: caches,
                },
            ))
        }
    }
}

/// Forward pass returning outputs keyed by child id.
pub fn switcher_forward_named(
    spec: &SwitcherSpec,
    params: &SwitcherParams,
    x: &Matrix,
) -> Result<(BTreeMap<String, Matrix>, SwitcherCache)> {
    let (outs, cache) = switcher_forward(spec, params, x)?;
    Ok((spec.child_ids.iter().cloned().zip(outs).collect(), cache))
}

/// Backpropagates through one gate. Adds expert-output gradients to
/// `d_experts`, returns the gate gradient and the gradient w.r.t. the
/// gate's input.
fn gate_backward(
    gate: &Matrix,
    cache: &GateCache,
    input: &Matrix,
    d_out: &Matrix,
    expert_outputs: &[Matrix],
    d_experts: &mut [Matrix],
) -> Result<(Matrix, Matrix)> {
    let batch = d_out.rows();
    let width = cache.visible.len();
    let mut d_logits = Matrix::zeros(batch, width);
    for r in 0..batch {
        let w = cache.weights.row(r);
        let g = d_out.row(r);
        let mut d_w = vec![0.0; width];
        for (slot, &e) in cache.visible.iter().enumerate() {
            let e_row = expert_outputs[e].row(r);
            let mut dot = 0.0;
            for (a, b) in g.iter().zip(e_row) {
                dot += a * b;
            }
            d_w[slot] = dot;
            let scale = w[slot];
            for (de, gv) in d_experts[e].row_mut(r).iter_mut().zip(g) {
                *de += scale * gv;
            }
        }
        let mut weighted = 0.0;
        for slot in 0..width {
            weighted += w[slot] * d_w[slot];
        }
        let row = d_logits.row_mut(r);
        for slot in 0..width {
            row[slot] = w[slot] * (d_w[slot] - weighted);
        }
    }
    let d_gate = input.transpose_matmul(&d_logits)?;
    let d_input = d_logits.matmul_transposed(gate)?;
    Ok((d_gate, d_input))
}

/// Reverse pass. `d_outputs[c]` is the gradient for child `c`; `None` is
/// treated as zeros. Returns parameter gradients shaped like `params` and the
/// input gradient.
pub fn switcher_backward(
    spec: &SwitcherSpec,
    params: &SwitcherParams,
    cache: &SwitcherCache,
    d_outputs: &[Option<Matrix>],
) -> Result<(SwitcherParams, Matrix)> {
    check_params(spec, params)?;
    if cache.kind != spec.kind || cache.input_dim != spec.input_dim {
        bail!(Contract, "switcher cache does not belong to this spec");
    }
    let children = spec.child_count();
    if d_outputs.len() != children {
        bail!(Dimension, "expected {} child gradients, got {}", children, d_outputs.len());
    }
    let out_dim = spec.output_dim();
    for d in d_outputs.iter().flatten() {
        if d.shape() != (cache.batch, out_dim) {
            bail!(
                Dimension,
                "child gradient is {}x{}, expected {}x{}",
                d.rows(),
                d.cols(),
                cache.batch,
                out_dim
            );
        }
    }
    let zeros = Matrix::zeros(cache.batch, out_dim);

    match params {
        SwitcherParams::SharedBottom { bottom } => {
            let bottom_cache = cache
                .bottom
                .as_ref()
                .ok_or_else(|| crate::Error::Contract("missing shared-bottom cache".into()))?;
            let mut d_bottom = Matrix::zeros(cache.batch, out_dim);
            for d in d_outputs.iter().flatten() {
                d_bottom.add_assign(d)?;
            }
            let (g, dx) = mlp_backward(bottom, bottom_cache, &d_bottom)?;
            Ok((SwitcherParams::SharedBottom { bottom: g }, dx))
        }
        SwitcherParams::Gated { levels } => {
            if cache.levels.len() != levels.len() {
                bail!(Contract, "switcher cache has {} levels, params {}", cache.levels.len(), levels.len());
            }
            let mut grads = params.zeros_like();
            let SwitcherParams::Gated { levels: grad_levels } = &mut grads else {
                unreachable!("zeros_like preserves the variant")
            };
            // Gradients flowing into the current level's outputs: one per
            // child plus the shared path.
            let mut d_level_out: Vec<Matrix> = d_outputs
                .iter()
                .map(|d| d.clone().unwrap_or_else(|| zeros.clone()))
                .collect();
            let mut d_shared_out: Option<Matrix> = None;

            for li in (0..levels.len()).rev() {
                let level = &levels[li];
                let lc = &cache.levels[li];
                let grad = &mut grad_levels[li];
                let mut d_experts: Vec<Matrix> = lc
                    .expert_outputs
                    .iter()
                    .map(|e| Matrix::zeros(e.rows(), e.cols()))
                    .collect();
                let mut d_inputs: Vec<Matrix> = lc.inputs.iter().map(|m| Matrix::zeros(m.rows(), m.cols())).collect();

                for c in 0..children {
                    let gc = &lc.child_gates[c];
                    let (d_gate, d_in) = gate_backward(
                        &level.child_gates[c],
                        gc,
                        &lc.inputs[gc.input_slot],
                        &d_level_out[c],
                        &lc.expert_outputs,
                        &mut d_experts,
                    )?;
                    grad.child_gates[c] = d_gate;
                    d_inputs[gc.input_slot].add_assign(&d_in)?;
                }
                if let (Some(gate), Some(gc)) = (&level.shared_gate, &lc.shared_gate) {
                    let d_out = d_shared_out
                        .take()
                        .ok_or_else(|| crate::Error::Contract("missing shared-path gradient".into()))?;
                    let (d_gate, d_in) =
                        gate_backward(gate, gc, &lc.inputs[gc.input_slot], &d_out, &lc.expert_outputs, &mut d_experts)?;
                    grad.shared_gate = Some(d_gate);
                    d_inputs[gc.input_slot].add_assign(&d_in)?;
                }

                let k = spec.specific_expert_count_per_child;
                for (idx, (e_cache, &slot)) in lc.expert_caches.iter().zip(&lc.expert_slots).enumerate() {
                    let (expert, expert_grad) = if idx < spec.shared_expert_count {
                        (&level.shared_experts[idx], &mut grad.shared_experts[idx])
                    } else {
                        let j = idx - spec.shared_expert_count;
                        (&level.specific_experts[j / k][j % k], &mut grad.specific_experts[j / k][j % k])
                    };
                    let (g, d_in) = mlp_backward(expert, e_cache, &d_experts[idx])?;
                    *expert_grad = g;
                    d_inputs[slot].add_assign(&d_in)?;
                }

                if li == 0 {
                    let mut dx = Matrix::zeros(cache.batch, spec.input_dim);
                    for d in &d_inputs {
                        dx.add_assign(d)?;
                    }
                    return Ok((grads, dx));
                }
                d_shared_out = d_inputs.pop();
                d_level_out = d_inputs;
            }
            unreachable!("gated switchers have at least one level")
        }
    }
}

/// Reverse pass with gradients keyed by child id; absent children count as
/// zero, unknown ids are rejected.
pub fn switcher_backward_named(
    spec: &SwitcherSpec,
    params: &SwitcherParams,
    cache: &SwitcherCache,
    d_outputs: &BTreeMap<String, Matrix>,
) -> Result<(SwitcherParams, Matrix)> {
    let mut ordered: Vec<Option<Matrix>> = vec![None; spec.child_count()];
    for (id, d) in d_outputs {
        ordered[spec.child_index(id)?] = Some(d.clone());
    }
    switcher_backward(spec, params, cache, &ordered)
}
