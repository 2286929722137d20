//! Experiment configuration: one JSON document naming the facets, tasks,
//! architecture, routing, training, data source and split.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mfh_core::data::{generate_synthetic, split, Dataset, RegionCount, SplitPolicy, SyntheticHead, SyntheticSpec};
use mfh_core::engine::{RoutingPolicy, TrainConfig};
use mfh_core::lattice::{
    build_graph, cartesian_tasks, validate_tasks, ArchKind, ArchOptions, Code, FacetKind, FacetSpec, Head,
    HeadBinding, LatticeGraph, SwitcherTemplate, TaskSpec,
};
use mfh_core::switcher::SwitcherKind;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::table::{load_csv, CsvSchema};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub facets: FacetSpec,
    pub tasks: TaskPlan,
    pub architecture: ArchitectureConfig,
    #[serde(default)]
    pub routing: RoutingConfig,
    pub train: TrainConfig,
    /// Seeds `compare` trains over; empty means just `train.seed`.
    #[serde(default)]
    pub seeds: Vec<u64>,
    pub data: DataSource,
    pub split: SplitPolicy,
    /// Output directory used when `--out` is not given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Directory relative data paths resolve against; set on load.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskPlan {
    /// One task per combination of partitions of `facets`. `heads` binds
    /// each partition of the task facet among them to a label.
    Cartesian {
        facets: Vec<String>,
        heads: BTreeMap<String, HeadBinding>,
        #[serde(default)]
        tower_hidden: Vec<usize>,
    },
    List(Vec<TaskEntry>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskEntry {
    /// Defaults to the code label, e.g. `Cmpl&New`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Facet name to partition name.
    pub code: BTreeMap<String, String>,
    pub head: Head,
    pub label: String,
    #[serde(default)]
    pub tower_hidden: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", deny_unknown_fields)]
pub enum ArchSpec {
    Flat,
    /// Facet names from the root down.
    Hmtl { permutation: Vec<String> },
    Mfh { depth: usize },
    Biasnet { bias_facet: String, body: Box<ArchSpec> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureConfig {
    pub kind: ArchSpec,
    pub hidden_dim: usize,
    /// Switcher per level from the root up; the last entry covers deeper
    /// levels. Defaults to shared-bottom, PLE, CGC.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<SwitcherTemplate>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_mlp_layers: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub facet_mlp_layers: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias_hidden: Option<Vec<usize>>,
    #[serde(default)]
    pub learned_combination: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", deny_unknown_fields)]
pub enum RoutingConfig {
    /// Samples train exactly the tasks that serve them.
    #[default]
    Serving,
    Identity { facet: String },
    /// Partitions listed from sparsest to richest; each also trains the
    /// tasks of every later partition.
    Upward { facet: String },
    Custom {
        facet: String,
        train_mask: BTreeMap<String, Vec<String>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic(SyntheticSource),
    Csv(CsvSource),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSource {
    pub counts: Vec<RegionCount>,
    pub heads: Vec<SyntheticHead>,
    pub feature_dim: usize,
    pub deviation_scale: f64,
    #[serde(default = "default_sharing")]
    pub deviation_sharing: f64,
    pub noise: f64,
    pub seed: u64,
}

fn default_sharing() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
    pub feature_dim: usize,
    #[serde(default)]
    pub labels: Vec<String>,
    #[serde(default)]
    pub raw: bool,
    #[serde(default)]
    pub time: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derive: Option<mfh_core::data::LabelConfig>,
}

impl SyntheticSource {
    pub fn spec(&self, facets: &FacetSpec) -> SyntheticSpec {
        SyntheticSpec {
            facets: facets.clone(),
            counts: self.counts.clone(),
            heads: self.heads.clone(),
            feature_dim: self.feature_dim,
            deviation_scale: self.deviation_scale,
            deviation_sharing: self.deviation_sharing,
            noise: self.noise,
            seed: self.seed,
        }
    }
}

impl CsvSource {
    pub fn schema(&self, facets: &FacetSpec) -> CsvSchema {
        CsvSchema {
            facets: facets.clone(),
            feature_dim: self.feature_dim,
            labels: self.labels.clone(),
            raw: self.raw,
            time: self.time,
            derive: self.derive,
        }
    }
}

fn facet_index(facets: &FacetSpec, name: &str) -> std::result::Result<usize, String> {
    facets
        .facets
        .iter()
        .position(|f| f.name == name)
        .ok_or_else(|| format!("unknown facet {name:?}"))
}

fn partition_index(facets: &FacetSpec, facet: usize, name: &str) -> std::result::Result<usize, String> {
    let f = &facets.facets[facet];
    f.partitions
        .iter()
        .position(|p| p == name)
        .ok_or_else(|| format!("facet {:?} has no partition {name:?}", f.name))
}

fn region_facet(facets: &FacetSpec, name: &str) -> std::result::Result<usize, String> {
    let f = facet_index(facets, name)?;
    if facets.facets[f].kind != FacetKind::Region {
        return Err(format!("routing facet {name:?} is not a region facet"));
    }
    Ok(f)
}

/// Legal switcher settings per kind, reported with the level they sit at.
fn check_template(level: usize, t: &SwitcherTemplate) -> Vec<String> {
    let mut out = Vec::new();
    let at = |msg: String| format!("architecture.levels[{level}]: {msg}");
    match t.kind {
        SwitcherKind::SharedBottom => {
            if t.specific_experts != 0 {
                out.push(at("shared_bottom takes no specific experts".into()));
            }
        }
        kind => {
            if t.shared_experts == 0 {
                out.push(at(format!("{} needs at least one shared expert", kind.name())));
            }
            if kind == SwitcherKind::Mmoe && t.specific_experts != 0 {
                out.push(at("mmoe takes no specific experts".into()));
            }
            if kind == (SwitcherKind::Ple { levels: 0 }) {
                out.push(at("ple needs at least one level".into()));
            }
        }
    }
    if t.expert_layers.as_ref().is_some_and(|l| l.contains(&0)) {
        out.push(at("expert layer widths must be at least 1".into()));
    }
    out
}

impl ExperimentConfig {
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = serde_json::from_str(text).map_err(Error::json("config"))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    /// Reads and cross-validates a config file; relative data paths resolve
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let cfg = Self::from_json(&text, &base)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("configs always serialize");
        text.push('\n');
        text
    }

    /// SHA-256 of the compact JSON form, hex encoded.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("configs always serialize");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.train.seed = seed;
        self
    }

    pub fn seed_list(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.train.seed]
        } else {
            self.seeds.clone()
        }
    }

    pub fn feature_dim(&self) -> usize {
        match &self.data {
            DataSource::Synthetic(s) => s.feature_dim,
            DataSource::Csv(c) => c.feature_dim,
        }
    }

    pub fn csv_path(&self) -> Option<PathBuf> {
        match &self.data {
            DataSource::Csv(c) => Some(self.base_dir.join(&c.path)),
            DataSource::Synthetic(_) => None,
        }
    }

    pub fn resolve_tasks(&self) -> Result<Vec<TaskSpec>> {
        let tasks = match &self.tasks {
            TaskPlan::Cartesian {
                facets,
                heads,
                tower_hidden,
            } => {
                let active = facets
                    .iter()
                    .map(|f| facet_index(&self.facets, f))
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| Error::Invalid(vec![format!("tasks: {e}")]))?;
                let task_facet = active
                    .iter()
                    .copied()
                    .find(|&f| self.facets.facets[f].kind == FacetKind::Task)
                    .ok_or_else(|| Error::Invalid(vec!["tasks: cartesian tasks need a task facet".into()]))?;
                let bindings = self.facets.facets[task_facet]
                    .partitions
                    .iter()
                    .map(|p| {
                        heads
                            .get(p)
                            .cloned()
                            .ok_or_else(|| Error::Invalid(vec![format!("tasks: no head bound to partition {p:?}")]))
                    })
                    .collect::<Result<Vec<_>>>()?;
                cartesian_tasks(&self.facets, &active, &[(task_facet, bindings)], tower_hidden)?
            }
            TaskPlan::List(entries) => {
                let mut out = Vec::with_capacity(entries.len());
                for (i, e) in entries.iter().enumerate() {
                    let mut pairs = Vec::new();
                    for (f, p) in &e.code {
                        let fi = facet_index(&self.facets, f).map_err(|m| Error::Invalid(vec![format!("tasks[{i}]: {m}")]))?;
                        let pi = partition_index(&self.facets, fi, p)
                            .map_err(|m| Error::Invalid(vec![format!("tasks[{i}]: {m}")]))?;
                        pairs.push((fi, pi));
                    }
                    let code = Code::new(pairs, &self.facets)?;
                    out.push(TaskSpec {
                        name: e.name.clone().unwrap_or_else(|| code.label(&self.facets)),
                        code,
                        head: e.head,
                        label: e.label.clone(),
                        tower_hidden: e.tower_hidden.clone(),
                    });
                }
                out
            }
        };
        validate_tasks(&tasks, &self.facets)?;
        Ok(tasks)
    }

    pub fn arch_kind(&self) -> Result<ArchKind> {
        fn convert(facets: &FacetSpec, spec: &ArchSpec) -> std::result::Result<ArchKind, String> {
            Ok(match spec {
                ArchSpec::Flat => ArchKind::Flat,
                ArchSpec::Hmtl { permutation } => ArchKind::Hmtl {
                    permutation: permutation
                        .iter()
                        .map(|f| facet_index(facets, f))
                        .collect::<std::result::Result<_, _>>()?,
                },
                ArchSpec::Mfh { depth } => ArchKind::Mfh { depth: *depth },
                ArchSpec::Biasnet { bias_facet, body } => ArchKind::Biasnet {
                    bias_facet: facet_index(facets, bias_facet)?,
                    body: Box::new(convert(facets, body)?),
                },
            })
        }
        convert(&self.facets, &self.architecture.kind).map_err(|e| Error::Invalid(vec![format!("architecture: {e}")]))
    }

    pub fn arch_options(&self) -> ArchOptions {
        let a = &self.architecture;
        let mut opts = ArchOptions::new(self.feature_dim(), a.hidden_dim);
        if let Some(levels) = &a.levels {
            opts.levels = levels.clone();
        }
        if let Some(l) = &a.node_mlp_layers {
            opts.node_mlp_layers = l.clone();
        }
        if let Some(l) = &a.facet_mlp_layers {
            opts.facet_mlp_layers = l.clone();
        }
        if let Some(l) = &a.bias_hidden {
            opts.bias_hidden = l.clone();
        }
        opts.learned_combination = a.learned_combination;
        opts
    }

    pub fn routing_policy(&self) -> Result<RoutingPolicy> {
        let invalid = |m: String| Error::Invalid(vec![format!("routing: {m}")]);
        Ok(match &self.routing {
            RoutingConfig::Serving => RoutingPolicy::serving(),
            RoutingConfig::Identity { facet } => {
                let f = region_facet(&self.facets, facet).map_err(invalid)?;
                RoutingPolicy::identity(f, self.facets.facets[f].partitions.len())
            }
            RoutingConfig::Upward { facet } => {
                let f = region_facet(&self.facets, facet).map_err(invalid)?;
                RoutingPolicy::upward(f, self.facets.facets[f].partitions.len())
            }
            RoutingConfig::Custom { facet, train_mask } => {
                let f = region_facet(&self.facets, facet).map_err(invalid)?;
                let mut rows = Vec::new();
                for p in &self.facets.facets[f].partitions {
                    let targets = train_mask.get(p).ok_or_else(|| invalid(format!("no mask row for {p:?}")))?;
                    let row = targets
                        .iter()
                        .map(|q| partition_index(&self.facets, f, q))
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(invalid)?;
                    rows.push(row);
                }
                let policy = RoutingPolicy {
                    routing_facet: Some(f),
                    train_mask: rows,
                };
                policy.validate(&self.facets)?;
                policy
            }
        })
    }

    pub fn build_graph(&self) -> Result<LatticeGraph> {
        let tasks = self.resolve_tasks()?;
        Ok(build_graph(&self.facets, &self.arch_kind()?, &tasks, &self.arch_options())?)
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        match &self.data {
            DataSource::Synthetic(s) => Ok(generate_synthetic(&s.spec(&self.facets))?),
            DataSource::Csv(c) => load_csv(&self.base_dir.join(&c.path), &c.schema(&self.facets)),
        }
    }

    pub fn split_dataset(&self, data: &Dataset) -> Result<(Dataset, Dataset)> {
        Ok(split(data, &self.split)?)
    }

    /// Every problem found, in a fixed order. Checks that depend on an
    /// earlier failure are skipped.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut push = |r: Result<()>| {
            if let Err(e) = r {
                match e {
                    Error::Invalid(v) => out.extend(v),
                    other => out.push(other.to_string()),
                }
            }
        };
        if let Err(e) = self.facets.validate() {
            push(Err(e.into()));
            return out;
        }
        let tasks_ok = self.resolve_tasks().map(|_| ());
        let tasks_failed = tasks_ok.is_err();
        push(tasks_ok);
        let arch_ok = self.arch_kind().map(|_| ());
        let arch_failed = arch_ok.is_err();
        push(arch_ok);
        let levels = self.arch_options().levels;
        let mut level_errors: Vec<String> = levels.iter().enumerate().flat_map(|(i, t)| check_template(i, t)).collect();
        if self.architecture.hidden_dim == 0 {
            level_errors.push("architecture.hidden_dim must be at least 1".into());
        }
        let levels_failed = !level_errors.is_empty();
        push(if levels_failed { Err(Error::Invalid(level_errors)) } else { Ok(()) });
        push(self.routing_policy().map(|_| ()));
        push(self.train.validate().map_err(Into::into));
        match &self.data {
            DataSource::Synthetic(s) => push(s.spec(&self.facets).validate().map_err(Into::into)),
            DataSource::Csv(c) => {
                let path = self.base_dir.join(&c.path);
                if !path.is_file() {
                    push(Err(Error::Invalid(vec![format!("data: file {} does not exist", path.display())])));
                }
            }
        }
        match self.split {
            SplitPolicy::Fraction { train, .. } if !(train > 0.0 && train < 1.0) => {
                push(Err(Error::Invalid(vec![format!("split: train fraction {train} is outside (0, 1)")])))
            }
            SplitPolicy::Time { .. } if matches!(&self.data, DataSource::Synthetic(_)) => {
                push(Err(Error::Invalid(vec!["split: synthetic data has no time column".into()])))
            }
            _ => {}
        }
        if !tasks_failed && !arch_failed && !levels_failed {
            push(self.build_graph().map(|_| ()));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(v))
        }
    }
}

/// Template configs for the play setting: behavior {Cmpl, Finish, Skip} ×
/// group {New, Low, High}.
pub mod play {
    use super::*;
    use mfh_core::presets::{play_facets, play_heads, BEHAVIORS, GROUPS};

    pub fn heads() -> BTreeMap<String, HeadBinding> {
        BEHAVIORS.iter().map(|b| b.to_string()).zip(play_heads()).collect()
    }

    pub fn synthetic(feature_dim: usize, counts: [usize; 3], deviation_scale: f64, noise: f64, seed: u64) -> SyntheticSource {
        SyntheticSource {
            counts: GROUPS
                .iter()
                .zip(counts)
                .map(|(g, count)| RegionCount {
                    partitions: vec![g.to_string()],
                    count,
                })
                .collect(),
            heads: play_heads()
                .into_iter()
                .map(|h| SyntheticHead {
                    label: h.label,
                    head: h.head,
                })
                .collect(),
            feature_dim,
            deviation_scale,
            deviation_sharing: default_sharing(),
            noise,
            seed,
        }
    }

    /// Nine-task config over synthetic play data with upward routing.
    pub fn config(name: &str, kind: ArchSpec, hidden_dim: usize, data: SyntheticSource, train: TrainConfig) -> ExperimentConfig {
        ExperimentConfig {
            name: name.into(),
            facets: play_facets(),
            tasks: TaskPlan::Cartesian {
                facets: vec!["behavior".into(), "group".into()],
                heads: heads(),
                tower_hidden: vec![hidden_dim],
            },
            architecture: ArchitectureConfig {
                kind,
                hidden_dim,
                levels: None,
                node_mlp_layers: None,
                facet_mlp_layers: None,
                bias_hidden: None,
                learned_combination: false,
            },
            routing: RoutingConfig::Upward { facet: "group".into() },
            train,
            seeds: Vec::new(),
            data: DataSource::Synthetic(data),
            split: SplitPolicy::Fraction { train: 0.8, seed: 0 },
            output: None,
            base_dir: PathBuf::new(),
        }
    }
}
