//! The verbs of the `mfh` binary. Each command takes a loaded config and an
//! output directory, writes its artifacts there and returns an outcome whose
//! `Display` is the human-readable summary.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use mfh_core::data::Dataset;
use mfh_core::engine::{
    evaluate, grad_check, init_model, toy_batch, train_from, GradCheckReport, MetricKind, MetricsReport,
    ModelParams,
};
use mfh_core::lattice::{validate_graph, LatticeGraph, NodeKind};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{DataSource, ExperimentConfig};
use crate::error::{Error, Result};
use crate::graph_io::{export_dot, export_json};
use crate::params_io::{params_from_json, params_to_json};
use crate::predictor::RayonPredictor;
use crate::report_io::{metric_name, report_to_csv, report_to_json};
use crate::table::{write_csv_file, CsvSchema};

pub const MAX_CHECK_FEATURES: usize = 16;
pub const MAX_CHECK_BATCH: usize = 4;

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(Error::io(path))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(Error::io(dir))
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("plain data always serializes");
    text.push('\n');
    text
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Loads and validates a config, applying a seed override.
pub fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig::load(path)?;
    Ok(match seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

/// `--out` if given, else the config's `output` (relative to the config
/// file), else `./out`.
pub fn output_dir(cfg: &ExperimentConfig, out: Option<&Path>) -> PathBuf {
    match (out, &cfg.output) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(o)) => cfg.base_dir.join(o),
        (None, None) => PathBuf::from("out"),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into())
}

// ---------------------------------------------------------------- gen-data

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionTally {
    pub partitions: Vec<String>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataManifest {
    pub config_digest: String,
    /// SHA-256 of the synthetic spec alone.
    pub spec_digest: String,
    pub seed: u64,
    pub total: usize,
    pub counts: Vec<RegionTally>,
    pub columns: Vec<String>,
}

#[derive(Debug)]
pub struct GenDataOutcome {
    pub csv: PathBuf,
    pub manifest_path: PathBuf,
    pub manifest: DataManifest,
}

impl fmt::Display for GenDataOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "wrote {} rows to {}", self.manifest.total, self.csv.display())?;
        for c in &self.manifest.counts {
            writeln!(f, "  {}: {}", c.partitions.join("&"), c.count)?;
        }
        write!(f, "manifest: {}", self.manifest_path.display())
    }
}

pub fn cmd_gen_data(cfg: &ExperimentConfig, out: &Path) -> Result<GenDataOutcome> {
    let DataSource::Synthetic(source) = &cfg.data else {
        return Err(Error::Invalid(vec!["gen-data needs a synthetic data source".into()]));
    };
    let spec = source.spec(&cfg.facets);
    let data = cfg.load_dataset()?;
    let codes = spec.region_codes()?;
    let counts = source
        .counts
        .iter()
        .zip(&codes)
        .map(|(rc, code)| RegionTally {
            partitions: rc.partitions.clone(),
            count: data.samples.iter().filter(|s| &s.region == code).count(),
        })
        .collect();
    let schema = CsvSchema::of(&data);
    let manifest = DataManifest {
        config_digest: cfg.digest(),
        spec_digest: sha256_hex(&serde_json::to_vec(&spec).expect("specs serialize")),
        seed: spec.seed,
        total: data.len(),
        counts,
        columns: schema.header(),
    };
    ensure_dir(out)?;
    let csv = out.join("data.csv");
    write_csv_file(&csv, &data, &schema)?;
    let manifest_path = out.join("manifest.json");
    write(&manifest_path, &pretty(&manifest))?;
    Ok(GenDataOutcome {
        csv,
        manifest_path,
        manifest,
    })
}

// ------------------------------------------------------------------- train

#[derive(Debug)]
pub struct TrainOutcome {
    pub dir: PathBuf,
    pub report: MetricsReport,
    pub params: ModelParams,
}

fn final_metrics(f: &mut fmt::Formatter<'_>, report: &MetricsReport) -> fmt::Result {
    let last = report.epochs.len().saturating_sub(1);
    let epoch = report.epochs.get(last).copied().unwrap_or(0);
    writeln!(f, "{} seed {} | test metrics at epoch {}", report.arch, report.seed, epoch)?;
    for t in &report.tasks {
        let test = t.test.get(last).copied().flatten();
        writeln!(f, "  {:<16} {:<6} {} {}", t.name, t.group, metric_name(t.metric), fmt_opt(test))?;
    }
    Ok(())
}

impl fmt::Display for TrainOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        final_metrics(f, &self.report)?;
        write!(f, "artifacts in {}", self.dir.display())
    }
}

pub fn split_data(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    let data = cfg.load_dataset()?;
    cfg.split_dataset(&data)
}

/// Trains one run and writes `params.json`, `report.json`, `report.csv`
/// and `graph.json` into `out`.
pub fn cmd_train(cfg: &ExperimentConfig, out: &Path) -> Result<TrainOutcome> {
    let graph = cfg.build_graph()?;
    let policy = cfg.routing_policy()?;
    let (train_set, test_set) = split_data(cfg)?;
    let predictor = RayonPredictor::from_env();
    let init = init_model(&graph, cfg.train.seed)?;
    let (params, mut report) = train_from(&graph, init, &train_set, &test_set, &policy, &cfg.train, &predictor)?;
    let digest = cfg.digest();
    report.config_digest = digest.clone();
    ensure_dir(out)?;
    write(&out.join("params.json"), &params_to_json(&graph, &params, &digest))?;
    write(&out.join("report.json"), &report_to_json(&report))?;
    write(&out.join("report.csv"), &report_to_csv(&report))?;
    write(&out.join("graph.json"), &export_json(&graph))?;
    Ok(TrainOutcome {
        dir: out.to_path_buf(),
        report,
        params,
    })
}

// -------------------------------------------------------------------- eval

#[derive(Debug)]
pub struct EvalOutcome {
    pub dir: PathBuf,
    pub report: MetricsReport,
    /// Set when the parameters were trained under another config.
    pub digest_mismatch: Option<String>,
}

impl fmt::Display for EvalOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(other) = &self.digest_mismatch {
            writeln!(f, "warning: parameters were trained under config {other}")?;
        }
        final_metrics(f, &self.report)?;
        write!(f, "report in {}", self.dir.display())
    }
}

/// Scores saved parameters on both splits; writes `eval.json` and
/// `eval.csv`.
pub fn cmd_eval(cfg: &ExperimentConfig, params_path: &Path, out: &Path) -> Result<EvalOutcome> {
    let graph = cfg.build_graph()?;
    let text = std::fs::read_to_string(params_path).map_err(Error::io(params_path))?;
    let (params, stored) = params_from_json(&text, &graph)?;
    let (train_set, test_set) = split_data(cfg)?;
    let mut report = evaluate(
        &graph,
        &params,
        &train_set,
        &test_set,
        &cfg.routing_policy()?,
        &RayonPredictor::from_env(),
    )?;
    let digest = cfg.digest();
    report.seed = cfg.train.seed;
    report.config_digest = digest.clone();
    ensure_dir(out)?;
    write(&out.join("eval.json"), &report_to_json(&report))?;
    write(&out.join("eval.csv"), &report_to_csv(&report))?;
    Ok(EvalOutcome {
        dir: out.to_path_buf(),
        report,
        digest_mismatch: (stored != digest).then_some(stored),
    })
}

// ----------------------------------------------------------------- compare

/// Median of the defined values; the mean of the middle pair for even
/// counts.
pub fn median(values: &[Option<f64>]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().flatten().copied().collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

/// Relative change `(model − baseline) / baseline`.
pub fn relative_change(baseline: Option<f64>, model: Option<f64>) -> Option<f64> {
    match (baseline, model) {
        (Some(b), Some(m)) if b != 0.0 => Some((m - b) / b),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRef {
    pub config: String,
    pub arch: String,
    pub config_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub config: String,
    pub task: String,
    pub group: String,
    pub metric: MetricKind,
    pub per_seed: Vec<Option<f64>>,
    pub median: Option<f64>,
    /// Relative change of the median against the first config.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverfitCell {
    pub config: String,
    pub group: String,
    pub label: String,
    pub train_error: Option<f64>,
    pub test_error: Option<f64>,
    /// Median over seeds of `test_error − train_error`.
    pub gap: Option<f64>,
    pub per_seed_gap: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// Digest of what all configs must share: facets, tasks, data, split
    /// and seeds.
    pub shared_digest: String,
    pub seeds: Vec<u64>,
    pub runs: Vec<RunRef>,
    pub rows: Vec<CompareRow>,
    pub overfit: Vec<OverfitCell>,
}

impl Comparison {
    pub fn row(&self, config: &str, task: &str, group: &str) -> Option<&CompareRow> {
        self.rows
            .iter()
            .find(|r| r.config == config && r.task == task && r.group == group)
    }

    pub fn overfit_cell(&self, config: &str, group: &str, label: &str) -> Option<&OverfitCell> {
        self.overfit
            .iter()
            .find(|c| c.config == config && c.group == group && c.label == label)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        w.write_record(["config", "task", "group", "metric", "median", "delta"])
            .expect("writing to memory");
        for r in &self.rows {
            w.write_record([
                r.config.as_str(),
                &r.task,
                &r.group,
                metric_name(r.metric),
                &opt(r.median),
                &opt(r.delta),
            ])
            .expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv output is UTF-8")
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        writeln!(f, "median over seeds [{}]; brackets: change vs {}", seeds.join(", "), self.runs[0].config)?;
        let mut groups: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !groups.contains(&r.group.as_str()) {
                groups.push(&r.group);
            }
        }
        for g in groups {
            writeln!(f, "[{g}]")?;
            for run in &self.runs {
                let cells: Vec<String> = self
                    .rows
                    .iter()
                    .filter(|r| r.config == run.config && r.group == g)
                    .map(|r| {
                        let delta = r.delta.map(|d| format!("{:+.2}%", d * 100.0)).unwrap_or_else(|| "-".into());
                        format!("{} {} {} ({})", r.task, metric_name(r.metric), fmt_opt(r.median), delta)
                    })
                    .collect();
                writeln!(f, "  {:<12} {}", run.config, cells.join(" | "))?;
            }
        }
        writeln!(f, "test-train error gaps")?;
        for c in &self.overfit {
            writeln!(
                f,
                "  {:<12} {:<6} {:<8} train {} test {} gap {}",
                c.config,
                c.group,
                c.label,
                fmt_opt(c.train_error),
                fmt_opt(c.test_error),
                fmt_opt(c.gap)
            )?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct SharedPart<'a> {
    facets: &'a mfh_core::lattice::FacetSpec,
    tasks: Vec<(String, String, String)>,
    data: &'a DataSource,
    split: &'a mfh_core::data::SplitPolicy,
    seeds: Vec<u64>,
}

/// Digest of the parts every compared config must agree on. Task names,
/// groups and labels stand in for the task plan so that equivalent plans
/// written differently still match.
pub fn shared_digest(cfg: &ExperimentConfig) -> Result<String> {
    let tasks = cfg
        .resolve_tasks()?
        .into_iter()
        .map(|t| (t.name, t.code.label(&cfg.facets), t.label))
        .collect();
    let part = SharedPart {
        facets: &cfg.facets,
        tasks,
        data: &cfg.data,
        split: &cfg.split,
        seeds: cfg.seed_list(),
    };
    Ok(sha256_hex(&serde_json::to_vec(&part).expect("plain data always serializes")))
}

fn run_dir_name(index: usize, name: &str) -> String {
    let clean: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{index:02}-{clean}")
}

/// Trains every config over the shared seeds (each run in its own
/// subdirectory) and tabulates medians against the first config. Writes
/// `comparison.json`, `comparison.csv` and `comparison.txt`.
pub fn cmd_compare(configs: &[ExperimentConfig], out: &Path) -> Result<Comparison> {
    let Some(first) = configs.first() else {
        return Err(Error::Invalid(vec!["compare needs at least one config".into()]));
    };
    let shared = shared_digest(first)?;
    let mut problems = Vec::new();
    for (i, c) in configs.iter().enumerate().skip(1) {
        if shared_digest(c)? != shared {
            problems.push(format!(
                "config {i} ({}) differs from {} in facets, tasks, data, split or seeds",
                c.name, first.name
            ));
        }
    }
    if !problems.is_empty() {
        return Err(Error::Invalid(problems));
    }
    let mut names: Vec<&str> = Vec::new();
    for c in configs {
        if names.contains(&c.name.as_str()) {
            return Err(Error::Invalid(vec![format!("config name {:?} is used twice", c.name)]));
        }
        names.push(&c.name);
    }

    let seeds = first.seed_list();
    let mut runs = Vec::new();
    let mut reports: Vec<Vec<MetricsReport>> = Vec::new();
    for (i, cfg) in configs.iter().enumerate() {
        let dir = out.join(run_dir_name(i, &cfg.name));
        let mut per_seed = Vec::new();
        for &seed in &seeds {
            let run = cfg.clone().with_seed(seed);
            per_seed.push(cmd_train(&run, &dir.join(format!("seed-{seed}")))?.report);
        }
        runs.push(RunRef {
            config: cfg.name.clone(),
            arch: per_seed[0].arch.clone(),
            config_digest: cfg.digest(),
        });
        reports.push(per_seed);
    }

    let final_value = |r: &MetricsReport, task: &str, group: &str| {
        r.task(task, group).and_then(|t| t.test.last().copied().flatten())
    };
    let mut rows = Vec::new();
    let skeleton = &reports[0][0];
    for (run, per_seed) in runs.iter().zip(&reports) {
        for t in &skeleton.tasks {
            let values: Vec<Option<f64>> = per_seed.iter().map(|r| final_value(r, &t.name, &t.group)).collect();
            rows.push(CompareRow {
                config: run.config.clone(),
                task: t.name.clone(),
                group: t.group.clone(),
                metric: t.metric,
                median: median(&values),
                delta: None,
                per_seed: values,
            });
        }
    }
    let cells = skeleton.tasks.len();
    for k in 0..rows.len() {
        let base = rows[k % cells].median;
        rows[k].delta = relative_change(base, rows[k].median);
    }

    let mut overfit = Vec::new();
    for (run, per_seed) in runs.iter().zip(&reports) {
        for region in &skeleton.regions {
            let pick = |r: &MetricsReport, test: bool| {
                r.region(&region.group, &region.label).and_then(|m| {
                    let s = if test { &m.test_error } else { &m.train_error };
                    s.last().copied().flatten()
                })
            };
            let train: Vec<Option<f64>> = per_seed.iter().map(|r| pick(r, false)).collect();
            let test: Vec<Option<f64>> = per_seed.iter().map(|r| pick(r, true)).collect();
            let gaps: Vec<Option<f64>> = train
                .iter()
                .zip(&test)
                .map(|(a, b)| Some((*b)? - (*a)?))
                .collect();
            overfit.push(OverfitCell {
                config: run.config.clone(),
                group: region.group.clone(),
                label: region.label.clone(),
                train_error: median(&train),
                test_error: median(&test),
                gap: median(&gaps),
                per_seed_gap: gaps,
            });
        }
    }

    let comparison = Comparison {
        shared_digest: shared,
        seeds,
        runs,
        rows,
        overfit,
    };
    ensure_dir(out)?;
    write(&out.join("comparison.json"), &pretty(&comparison))?;
    write(&out.join("comparison.csv"), &comparison.to_csv())?;
    write(&out.join("comparison.txt"), &comparison.to_string())?;
    Ok(comparison)
}

// ----------------------------------------------------------- inspect-graph

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub arch: String,
    pub nodes: usize,
    pub edges: usize,
    pub by_kind: BTreeMap<String, usize>,
    /// Code MLP nodes per code size; facet MLPs and towers are not counted.
    pub mlps_by_code_size: BTreeMap<usize, usize>,
    pub facet_mlps: usize,
    pub towers: usize,
    /// Distinct body in-degrees over the towers, ascending.
    pub tower_in_degrees: Vec<usize>,
    pub params: usize,
}

impl GraphSummary {
    pub fn of(graph: &LatticeGraph) -> Self {
        let mut by_kind = BTreeMap::new();
        let mut mlps = BTreeMap::new();
        let mut facet_mlps = 0;
        let mut degrees = Vec::new();
        for n in &graph.nodes {
            *by_kind.entry(n.kind.tag().to_string()).or_insert(0) += 1;
            match n.kind {
                NodeKind::Mlp(_) if n.facet.is_some() => facet_mlps += 1,
                NodeKind::Mlp(_) => *mlps.entry(n.code.len()).or_insert(0) += 1,
                NodeKind::Tower { .. } => degrees.push(graph.body_in_degree(n.id)),
                _ => {}
            }
        }
        let towers = degrees.len();
        degrees.sort_unstable();
        degrees.dedup();
        Self {
            arch: graph.arch.name(),
            nodes: graph.nodes.len(),
            edges: graph.edges.len(),
            by_kind,
            mlps_by_code_size: mlps,
            facet_mlps,
            towers,
            tower_in_degrees: degrees,
            params: graph.nodes.iter().map(|n| n.kind.param_count()).sum(),
        }
    }
}

impl fmt::Display for GraphSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "arch: {}", self.arch)?;
        writeln!(f, "nodes: {}, edges: {}", self.nodes, self.edges)?;
        let kinds: Vec<String> = self.by_kind.iter().map(|(k, n)| format!("{k} {n}")).collect();
        writeln!(f, "by kind: {}", kinds.join(", "))?;
        let sizes: Vec<String> = self
            .mlps_by_code_size
            .iter()
            .map(|(k, n)| format!("size {k}: {n}"))
            .collect();
        let sizes = if sizes.is_empty() { "none".to_string() } else { sizes.join(", ") };
        writeln!(f, "mlps by code size: {sizes}; facet mlps: {}", self.facet_mlps)?;
        let degree = match self.tower_in_degrees.as_slice() {
            [] => "-".to_string(),
            [d] => d.to_string(),
            ds => ds.iter().map(usize::to_string).collect::<Vec<_>>().join("/"),
        };
        writeln!(f, "towers: {}, in-degree: {}", self.towers, degree)?;
        write!(f, "parameters: {}", self.params)
    }
}

#[derive(Debug)]
pub struct InspectOutcome {
    pub graph: LatticeGraph,
    pub summary: GraphSummary,
    pub json: String,
    pub dot: String,
}

impl fmt::Display for InspectOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\nvalidation: ok", self.summary)
    }
}

/// Builds the graph, writes `graph.json` and `graph.dot`, then validates.
/// Violations fail the command after the exports are written.
pub fn cmd_inspect_graph(cfg: &ExperimentConfig, out: &Path) -> Result<InspectOutcome> {
    let graph = cfg.build_graph()?;
    let json = export_json(&graph);
    let dot = export_dot(&graph);
    ensure_dir(out)?;
    write(&out.join("graph.json"), &json)?;
    write(&out.join("graph.dot"), &dot)?;
    let violations = validate_graph(&graph, &cfg.facets);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(Error::Check(format!("graph validation:\n  {}", list.join("\n  "))));
    }
    Ok(InspectOutcome {
        summary: GraphSummary::of(&graph),
        graph,
        json,
        dot,
    })
}

// -------------------------------------------------------------- grad-check

#[derive(Debug)]
pub struct GradCheckOutcome {
    pub report: GradCheckReport,
    pub warning: Option<String>,
}

impl fmt::Display for GradCheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(w) = &self.warning {
            writeln!(f, "warning: {w}")?;
        }
        write!(
            f,
            "pass: {} parameters checked, max relative error {:.3e}",
            self.report.checked, self.report.max_rel_err
        )
    }
}

/// Turns a gradient-check report into an outcome, or a failed check naming
/// the worst node.
pub fn judge_grad_check(graph: &LatticeGraph, report: GradCheckReport) -> Result<GradCheckOutcome> {
    if !report.passed {
        let node = match report.worst_node {
            Some(id) => format!("node {id} ({})", graph.nodes[id].name),
            None => "no node".into(),
        };
        return Err(Error::Check(format!(
            "gradient mismatch: max relative error {:.3e} at {node}",
            report.max_rel_err
        )));
    }
    let warning = (report.checked == 0).then(|| "the graph has no parameters; the check is vacuous".to_string());
    Ok(GradCheckOutcome { report, warning })
}

/// Finite-difference check of every parameter on one seeded batch of
/// `train.batch_size` rows. Limited to toy sizes.
pub fn cmd_grad_check(cfg: &ExperimentConfig) -> Result<GradCheckOutcome> {
    let features = cfg.feature_dim();
    let batch = cfg.train.batch_size;
    if features > MAX_CHECK_FEATURES || batch > MAX_CHECK_BATCH {
        return Err(Error::Invalid(vec![format!(
            "grad-check is limited to {MAX_CHECK_FEATURES} features and batches of {MAX_CHECK_BATCH}; \
             the config has {features} features and batch size {batch}"
        )]));
    }
    let graph = cfg.build_graph()?;
    let params = init_model(&graph, cfg.train.seed)?;
    let rows = toy_batch(&graph, batch, cfg.train.seed);
    judge_grad_check(&graph, grad_check(&graph, &params, &rows)?)
}
