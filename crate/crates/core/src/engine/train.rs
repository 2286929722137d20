use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::compute_loss;
use super::metrics::{auc, logloss, mse, GapSeries, MetricKind, MetricsReport, RegionMetrics, TaskMetrics};
use super::model::{init_model, model_backward, model_forward, ModelParams};
use super::routing::{routing_masks, serves, RoutingPolicy};
use crate::adam::{adam_step_with_lr, AdamConfig, AdamState};
use crate::data::Dataset;
use crate::error::{bail, Error, Result};
use crate::lattice::{Code, Head, LatticeGraph, NodeKind};
use crate::params::Parameters;
use crate::seed::{derive_seed, name_salt};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum LrSchedule {
    Constant,
    /// Multiply the rate by `factor` after every `every` epochs.
    Step { every: usize, factor: f64 },
}

impl LrSchedule {
    pub fn rate(&self, base: f64, epoch: usize) -> f64 {
        match *self {
            LrSchedule::Constant => base,
            LrSchedule::Step { every, factor } => base * libm::pow(factor, (epoch / every.max(1)) as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub adam: AdamConfig,
    #[serde(default = "constant")]
    pub schedule: LrSchedule,
    /// Loss weight per task name; missing tasks weigh 1.
    #[serde(default)]
    pub task_weights: BTreeMap<String, f64>,
    pub seed: u64,
    /// Evaluate both splits every this many epochs (and after the last).
    #[serde(default = "one")]
    pub eval_every: usize,
}

fn constant() -> LrSchedule {
    LrSchedule::Constant
}

fn one() -> usize {
    1
}

impl TrainConfig {
    pub fn new(epochs: usize, batch_size: usize, seed: u64) -> Self {
        Self {
            epochs,
            batch_size,
            adam: AdamConfig::default(),
            schedule: LrSchedule::Constant,
            task_weights: BTreeMap::new(),
            seed,
            eval_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.eval_every == 0 {
            bail!(Config, "epochs, batch_size and eval_every must be at least 1");
        }
        if let Some((name, w)) = self.task_weights.iter().find(|(_, w)| !(**w >= 0.0)) {
            bail!(Config, "task weight for {:?} must be non-negative, got {}", name, w);
        }
        if !(self.adam.lr > 0.0) {
            bail!(Config, "learning rate must be positive");
        }
        Ok(())
    }

    fn weights(&self, graph: &LatticeGraph) -> Vec<f64> {
        graph
            .tasks
            .iter()
            .map(|t| self.task_weights.get(&t.name).copied().unwrap_or(1.0))
            .collect()
    }
}

/// Produces every task's logits over a whole dataset. Implementations may
/// split the rows across threads but must return rows in dataset order.
pub trait Predictor {
    fn logits(&self, graph: &LatticeGraph, params: &ModelParams, data: &Dataset) -> Result<Vec<Vec<f64>>>;
}

/// Single-threaded prediction in fixed-size row chunks.
#[derive(Debug, Clone, Copy)]
pub struct SerialPredictor {
    pub chunk: usize,
}

impl Default for SerialPredictor {
    fn default() -> Self {
        Self { chunk: 4096 }
    }
}

pub(crate) fn needs_regions(graph: &LatticeGraph) -> bool {
    graph.nodes.iter().any(|n| matches!(n.kind, NodeKind::Bias { .. }))
}

/// Logits for rows `indices` of `data`, one column per task.
pub fn predict_rows(graph: &LatticeGraph, params: &ModelParams, data: &Dataset, indices: &[usize]) -> Result<Vec<Vec<f64>>> {
    let x = data.features(indices);
    let regions = if needs_regions(graph) { data.regions(indices) } else { Vec::new() };
    Ok(model_forward(graph, params, &x, &regions)?.0)
}

impl Predictor for SerialPredictor {
    fn logits(&self, graph: &LatticeGraph, params: &ModelParams, data: &Dataset) -> Result<Vec<Vec<f64>>> {
        let all: Vec<usize> = (0..data.len()).collect();
        let mut out = vec![Vec::with_capacity(data.len()); graph.tasks.len()];
        for chunk in all.chunks(self.chunk.max(1)) {
            for (col, part) in out.iter_mut().zip(predict_rows(graph, params, data, chunk)?) {
                col.extend(part);
            }
        }
        Ok(out)
    }
}

fn label_columns(graph: &LatticeGraph, data: &Dataset) -> Result<Vec<Vec<f64>>> {
    graph
        .tasks
        .iter()
        .map(|t| {
            data.samples
                .iter()
                .enumerate()
                .map(|(i, s)| match s.labels.get(&t.label) {
                    Some(&v) => Ok(v),
                    None => Err(Error::Data(alloc::format!("row {} has no label {:?}", i, t.label))),
                })
                .collect()
        })
        .collect()
}

/// Groups metrics are reported by: the routing facet, else the first
/// region facet.
fn report_facet(graph: &LatticeGraph, policy: &RoutingPolicy) -> Option<usize> {
    policy.routing_facet.or_else(|| graph.facets.region_facets().first().copied())
}

struct Cell {
    task: usize,
    group: String,
    /// Facet partition the cell is restricted to, if any.
    partition: Option<(usize, usize)>,
}

fn cells(graph: &LatticeGraph, policy: &RoutingPolicy) -> Vec<Cell> {
    let facet = report_facet(graph, policy);
    let mut out = Vec::new();
    for (ti, task) in graph.tasks.iter().enumerate() {
        match facet {
            None => out.push(Cell {
                task: ti,
                group: "all".into(),
                partition: None,
            }),
            Some(f) => {
                for (p, name) in graph.facets.facets[f].partitions.iter().enumerate() {
                    if task.code.partition_of(f).map_or(true, |q| q == p) {
                        out.push(Cell {
                            task: ti,
                            group: name.clone(),
                            partition: Some((f, p)),
                        });
                    }
                }
            }
        }
    }
    out
}

fn cell_members(graph: &LatticeGraph, cell: &Cell, regions: &[&Code]) -> Vec<usize> {
    let task = &graph.tasks[cell.task];
    (0..regions.len())
        .filter(|&i| {
            serves(regions[i], task, &graph.facets)
                && cell.partition.map_or(true, |(f, p)| regions[i].partition_of(f) == Some(p))
        })
        .collect()
}

struct SplitEval {
    members: Vec<Vec<usize>>,
    labels: Vec<Vec<f64>>,
}

impl SplitEval {
    fn new(graph: &LatticeGraph, cells: &[Cell], data: &Dataset) -> Result<Self> {
        let regions: Vec<&Code> = data.samples.iter().map(|s| &s.region).collect();
        Ok(Self {
            members: cells.iter().map(|c| cell_members(graph, c, &regions)).collect(),
            labels: label_columns(graph, data)?,
        })
    }

    /// `(metric, error)` per cell.
    fn score(&self, graph: &LatticeGraph, cells: &[Cell], logits: &[Vec<f64>]) -> Vec<(Option<f64>, Option<f64>)> {
        cells
            .iter()
            .zip(&self.members)
            .map(|(cell, members)| {
                let z: Vec<f64> = members.iter().map(|&i| logits[cell.task][i]).collect();
                let y: Vec<f64> = members.iter().map(|&i| self.labels[cell.task][i]).collect();
                match graph.tasks[cell.task].head {
                    Head::Regression => {
                        let e = mse(&z, &y);
                        (e, e)
                    }
                    Head::Binary => (auc(&z, &y), logloss(&z, &y)),
                }
            })
            .collect()
    }
}

fn pooled(cells: &[&TaskMetrics], pick: impl Fn(&TaskMetrics) -> (&Vec<Option<f64>>, usize), k: usize) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for c in cells {
        let (series, n) = pick(c);
        if let Some(v) = series[k] {
            sum += v * n as f64;
            count += n;
        }
    }
    (count > 0).then(|| sum / count as f64)
}

fn aggregate(tasks: &[TaskMetrics], evaluations: usize) -> (Vec<RegionMetrics>, Vec<GapSeries>) {
    let mut keys: Vec<(String, String)> = Vec::new();
    for t in tasks {
        let key = (t.group.clone(), t.label.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let mut regions = Vec::new();
    let mut gaps = Vec::new();
    for (group, label) in keys {
        let members: Vec<&TaskMetrics> = tasks.iter().filter(|t| t.group == group && t.label == label).collect();
        let train: Vec<Option<f64>> = (0..evaluations)
            .map(|k| pooled(&members, |t| (&t.train_error, t.train_count), k))
            .collect();
        let test: Vec<Option<f64>> = (0..evaluations)
            .map(|k| pooled(&members, |t| (&t.test_error, t.test_count), k))
            .collect();
        let gap = train
            .iter()
            .zip(&test)
            .map(|(a, b)| match (a, b) {
                (Some(a), Some(b)) => Some(b - a),
                _ => None,
            })
            .collect();
        gaps.push(GapSeries {
            group: group.clone(),
            label: label.clone(),
            gap,
        });
        regions.push(RegionMetrics {
            group,
            label,
            train_error: train,
            test_error: test,
        });
    }
    (regions, gaps)
}

struct Evaluator {
    cells: Vec<Cell>,
    train: SplitEval,
    test: SplitEval,
}

impl Evaluator {
    fn new(graph: &LatticeGraph, policy: &RoutingPolicy, train_set: &Dataset, test_set: &Dataset) -> Result<Self> {
        let cells = cells(graph, policy);
        Ok(Self {
            train: SplitEval::new(graph, &cells, train_set)?,
            test: SplitEval::new(graph, &cells, test_set)?,
            cells,
        })
    }

    fn skeleton(&self, graph: &LatticeGraph) -> Vec<TaskMetrics> {
        self.cells
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                let task = &graph.tasks[cell.task];
                TaskMetrics {
                    name: task.name.clone(),
                    label: task.label.clone(),
                    group: cell.group.clone(),
                    metric: match task.head {
                        Head::Regression => MetricKind::Mse,
                        Head::Binary => MetricKind::Auc,
                    },
                    train: Vec::new(),
                    test: Vec::new(),
                    train_error: Vec::new(),
                    test_error: Vec::new(),
                    train_count: self.train.members[c].len(),
                    test_count: self.test.members[c].len(),
                }
            })
            .collect()
    }

    /// Appends one evaluation of both splits to every cell.
    fn record(
        &self,
        graph: &LatticeGraph,
        params: &ModelParams,
        train_set: &Dataset,
        test_set: &Dataset,
        predictor: &dyn Predictor,
        tasks: &mut [TaskMetrics],
    ) -> Result<()> {
        let score = |eval: &SplitEval, data: &Dataset| -> Result<Vec<(Option<f64>, Option<f64>)>> {
            if data.is_empty() {
                Ok(vec![(None, None); self.cells.len()])
            } else {
                Ok(eval.score(graph, &self.cells, &predictor.logits(graph, params, data)?))
            }
        };
        let tr = score(&self.train, train_set)?;
        let te = score(&self.test, test_set)?;
        for ((t, (m_tr, e_tr)), (m_te, e_te)) in tasks.iter_mut().zip(tr).zip(te) {
            t.train.push(m_tr);
            t.train_error.push(e_tr);
            t.test.push(m_te);
            t.test_error.push(e_te);
        }
        Ok(())
    }
}

/// Scores fixed parameters on both splits as a single evaluation taken at
/// epoch 0.
pub fn evaluate(
    graph: &LatticeGraph,
    params: &ModelParams,
    train_set: &Dataset,
    test_set: &Dataset,
    policy: &RoutingPolicy,
    predictor: &dyn Predictor,
) -> Result<MetricsReport> {
    policy.validate(&graph.facets)?;
    params.check(graph)?;
    let evaluator = Evaluator::new(graph, policy, train_set, test_set)?;
    let mut tasks = evaluator.skeleton(graph);
    evaluator.record(graph, params, train_set, test_set, predictor, &mut tasks)?;
    let (regions, gaps) = aggregate(&tasks, 1);
    Ok(MetricsReport {
        arch: graph.arch.name(),
        seed: 0,
        config_digest: String::new(),
        optimizer_steps: 0,
        train_loss: Vec::new(),
        epochs: vec![0],
        tasks,
        regions,
        gaps,
    })
}

/// Trains from a fresh initialization with single-threaded evaluation.
pub fn train(
    graph: &LatticeGraph,
    train_set: &Dataset,
    test_set: &Dataset,
    policy: &RoutingPolicy,
    config: &TrainConfig,
) -> Result<(ModelParams, MetricsReport)> {
    let params = init_model(graph, config.seed)?;
    train_from(graph, params, train_set, test_set, policy, config, &SerialPredictor::default())
}

/// Mini-batch Adam from `params`. Batches follow a seeded per-epoch shuffle;
/// both splits are evaluated at the configured cadence through `predictor`.
pub fn train_from(
    graph: &LatticeGraph,
    mut params: ModelParams,
    train_set: &Dataset,
    test_set: &Dataset,
    policy: &RoutingPolicy,
    config: &TrainConfig,
    predictor: &dyn Predictor,
) -> Result<(ModelParams, MetricsReport)> {
    config.validate()?;
    policy.validate(&graph.facets)?;
    params.check(graph)?;
    if train_set.is_empty() {
        bail!(Contract, "the training split is empty");
    }
    for d in [train_set, test_set] {
        if d.feature_dim != graph.input_dim {
            bail!(Dimension, "dataset has {} features, the model expects {}", d.feature_dim, graph.input_dim);
        }
    }
    let weights = config.weights(graph);
    let labels = label_columns(graph, train_set)?;
    let regions: Vec<Code> = train_set.samples.iter().map(|s| s.region.clone()).collect();
    let masks = routing_masks(&regions, policy, &graph.tasks, &graph.facets)?;
    let with_regions = needs_regions(graph);

    let evaluator = Evaluator::new(graph, policy, train_set, test_set)?;
    let mut tasks = evaluator.skeleton(graph);

    let mut state = AdamState::new(&params, config.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, name_salt("shuffle")));
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut train_loss = Vec::with_capacity(config.epochs);
    let mut epochs = Vec::new();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let lr = config.schedule.rate(config.adam.lr, epoch);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for (b, idx) in order.chunks(config.batch_size).enumerate() {
            let x = train_set.features(idx);
            let batch_regions: Vec<Code> = if with_regions {
                idx.iter().map(|&i| regions[i].clone()).collect()
            } else {
                Vec::new()
            };
            let (logits, cache) = model_forward(graph, &params, &x, &batch_regions)?;
            let y: Vec<Vec<f64>> = labels.iter().map(|col| idx.iter().map(|&i| col[i]).collect()).collect();
            let m: Vec<Vec<bool>> = masks.iter().map(|col| idx.iter().map(|&i| col[i]).collect()).collect();
            let loss = compute_loss(&logits, &y, &m, &graph.tasks, &weights)?;
            if !loss.total.is_finite() {
                return Err(Error::Numeric {
                    epoch: epoch + 1,
                    batch: b + 1,
                    detail: alloc::format!("loss is {}", loss.total),
                });
            }
            let grads = model_backward(graph, &params, &cache, &loss.d_logits)?;
            let (next, next_state) = adam_step_with_lr(&params, &grads, &state, lr)?;
            params = next;
            state = next_state;
            loss_sum += loss.total;
            batches += 1;
        }
        if !params.all_finite() {
            return Err(Error::Numeric {
                epoch: epoch + 1,
                batch: batches,
                detail: "parameters became non-finite".into(),
            });
        }
        train_loss.push(loss_sum / batches as f64);
        let last = epoch + 1 == config.epochs;
        if (epoch + 1) % config.eval_every == 0 || last {
            epochs.push(epoch + 1);
            evaluator.record(graph, &params, train_set, test_set, predictor, &mut tasks)?;
        }
    }
    let (regions_out, gaps) = aggregate(&tasks, epochs.len());
    let report = MetricsReport {
        arch: graph.arch.name(),
        seed: config.seed,
        config_digest: String::new(),
        optimizer_steps: state.step,
        train_loss,
        epochs,
        tasks,
        regions: regions_out,
        gaps,
    };
    Ok((params, report))
}
