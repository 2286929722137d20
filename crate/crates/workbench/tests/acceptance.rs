//! Acceptance suite. Runs every criterion in order and prints one PASS/FAIL
//! line each; exits non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use mfh_core::data::{derive_labels, SplitPolicy};
use mfh_core::engine::{
    analytic_gradient, auc, init_model, model_forward, routing_masks, serve_predict, serving_subgraph, toy_batch,
    GradBatch, MetricsReport, ModelParams, RoutingPolicy, TrainConfig,
};
use mfh_core::lattice::{
    build_biasnet, build_graph, build_mfh, enumerate_codes, ArchKind, ArchOptions, Code, Facet,
    FacetKind, FacetSpec, Head, LatticeGraph, SwitcherTemplate,
};
use mfh_core::mlp::mlp_apply;
use mfh_core::presets::{play_facets, play_tasks_3, play_tasks_9, GROUPS};
use mfh_core::seed::derive_seed;
use mfh_core::switcher::{init_switcher, switcher_forward, SwitcherKind, SwitcherParams, SwitcherSpec};
use mfh_core::{Matrix, Parameters};
use mfh_workbench::commands::{cmd_train, median};
use mfh_workbench::config::{play, ArchSpec, ExperimentConfig, RoutingConfig};

const GRAD_STEP: f64 = 1e-5;
const GRAD_TOLERANCE: f64 = 1e-4;
const AUC_TOLERANCE: f64 = 1e-12;
const AUC_INSTANCES: u64 = 200;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Uniform in [0, 1) from a counter, via the crate's SplitMix64 mixer.
struct Stream {
    seed: u64,
    n: u64,
}

impl Stream {
    fn new(seed: u64) -> Self {
        Self { seed, n: 0 }
    }

    fn unit(&mut self) -> f64 {
        self.n += 1;
        (derive_seed(self.seed, self.n) >> 11) as f64 / (1u64 << 53) as f64
    }

    fn below(&mut self, n: usize) -> usize {
        ((self.unit() * n as f64) as usize).min(n - 1)
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Matrix {
        let data = (0..rows * cols).map(|_| self.unit() * 3.0 - 1.5).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }
}

// 1 ------------------------------------------------------------------------

/// Per-sample, per-task loss terms written out from the logits.
fn loss_terms(graph: &LatticeGraph, params: &ModelParams, batch: &GradBatch) -> Vec<f64> {
    let (logits, _) = model_forward(graph, params, &batch.x, &batch.regions).unwrap();
    let mut terms = Vec::new();
    for (t, task) in graph.tasks.iter().enumerate() {
        let n = logits[t].len() as f64;
        for (z, y) in logits[t].iter().zip(&batch.labels[t]) {
            let l = match task.head {
                Head::Regression => (z - y) * (z - y),
                Head::Binary => {
                    let p = 1.0 / (1.0 + (-z).exp());
                    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
                }
            };
            terms.push(l / n);
        }
    }
    terms
}

fn max_gradient_error(graph: &LatticeGraph, params: &ModelParams, batch: &GradBatch) -> f64 {
    let analytic: Vec<f64> = analytic_gradient(graph, params, batch)
        .unwrap()
        .slices()
        .iter()
        .flat_map(|s| s.iter().copied())
        .collect();
    let mut worst = 0.0f64;
    let mut k = 0;
    let lens: Vec<usize> = params.slices().iter().map(|s| s.len()).collect();
    for (s, len) in lens.into_iter().enumerate() {
        for i in 0..len {
            let mut plus = params.clone();
            plus.slices_mut()[s][i] += GRAD_STEP;
            let mut minus = params.clone();
            minus.slices_mut()[s][i] -= GRAD_STEP;
            let diff: f64 = loss_terms(graph, &plus, batch)
                .iter()
                .zip(loss_terms(graph, &minus, batch))
                .map(|(a, b)| a - b)
                .sum();
            let numeric = diff / (2.0 * GRAD_STEP);
            let a = analytic[k];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8));
            k += 1;
        }
    }
    assert_eq!(k, analytic.len());
    worst
}

fn gradient_oracle() -> Outcome {
    let f = play_facets();
    let opts = ArchOptions {
        bias_hidden: vec![3],
        ..ArchOptions::new(8, 4)
    };
    let archs = [
        ArchKind::Flat,
        ArchKind::Hmtl {
            permutation: vec![0, 1],
        },
        ArchKind::Mfh { depth: 1 },
        ArchKind::Biasnet {
            bias_facet: 1,
            body: Box::new(ArchKind::Flat),
        },
    ];
    let mut parts = Vec::new();
    for arch in archs {
        let tasks = match arch {
            ArchKind::Biasnet { .. } => play_tasks_3(&f, &[3]).unwrap(),
            _ => play_tasks_9(&f, &[3]).unwrap(),
        };
        let graph = build_graph(&f, &arch, &tasks, &opts).unwrap();
        let params = init_model(&graph, 11).unwrap();
        let batch = toy_batch(&graph, 3, 5);
        let err = max_gradient_error(&graph, &params, &batch);
        check(err < GRAD_TOLERANCE, || format!("{}: max rel err {err:.3e}", arch.name()))?;
        parts.push(format!("{} {err:.1e}", arch.name()));
    }
    Ok(parts.join(", "))
}

// 2 ------------------------------------------------------------------------

fn sized_facets(m: &[usize]) -> FacetSpec {
    FacetSpec::new(
        m.iter()
            .enumerate()
            .map(|(i, &k)| Facet {
                name: format!("F{i}"),
                kind: FacetKind::Region,
                partitions: (0..k).map(|p| format!("F{i}p{p}")).collect(),
            })
            .collect(),
    )
    .unwrap()
}

/// Every assignment of "unset or partition p" per facet, kept by size.
fn brute_force(m: &[usize], size: usize) -> Vec<Vec<(usize, usize)>> {
    let total: usize = m.iter().map(|k| k + 1).product();
    let mut out = Vec::new();
    for mut n in 0..total {
        let mut pairs = Vec::new();
        for (f, &k) in m.iter().enumerate() {
            let c = n % (k + 1);
            n /= k + 1;
            if c > 0 {
                pairs.push((f, c - 1));
            }
        }
        if pairs.len() == size {
            out.push(pairs);
        }
    }
    out.sort();
    out
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn structural_counts() -> Outcome {
    let f = play_facets();
    let g = build_mfh(&f, 1, &play_tasks_9(&f, &[4]).unwrap(), &ArchOptions::new(8, 4)).unwrap();
    let count = |tag: &str, facet_level: bool, size: Option<usize>| {
        g.nodes
            .iter()
            .filter(|n| n.kind.tag() == tag && n.facet.is_some() == facet_level && size.is_none_or(|s| n.code.len() == s))
            .count()
    };
    let census = [
        ("root switcher", count("switcher", false, Some(0)), 1),
        ("facet mlps", count("mlp", true, None), 2),
        ("facet switchers", count("switcher", true, None), 2),
        ("partition mlps", count("mlp", false, Some(1)), 6),
        ("partition switchers", count("switcher", false, Some(1)), 6),
        ("towers", g.count_kind("tower"), 9),
    ];
    for (what, got, want) in census {
        check(got == want, || format!("{what}: {got}, expected {want}"))?;
    }
    for t in 0..9 {
        let d = g.body_in_degree(g.tower_of_task(t).unwrap());
        check(d == 2, || format!("tower {t} in-degree {d}"))?;
    }
    let mut shapes = 0;
    for n in 1..=4u32 {
        for mask in 0..2usize.pow(n) {
            let m: Vec<usize> = (0..n).map(|i| 2 + (mask >> i) % 2).collect();
            let fs = sized_facets(&m);
            for j in 0..=m.len() {
                let got: Vec<Vec<(usize, usize)>> =
                    enumerate_codes(&fs, j).unwrap().iter().map(|c| c.pairs().to_vec()).collect();
                check(got == brute_force(&m, j), || format!("codes of size {j} over {m:?}"))?;
                if m.iter().all(|&x| x == m[0]) {
                    let formula = binomial(m.len(), j) * m[0].pow(j as u32);
                    check(got.len() == formula, || format!("{m:?} size {j}: {} vs C(N,j)M^j {formula}", got.len()))?;
                }
            }
            shapes += 1;
        }
    }
    Ok(format!("census 1/2/2/6/6/9, in-degree 2; {shapes} facet shapes enumerated"))
}

// 3 ------------------------------------------------------------------------

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("c{i}")).collect()
}

fn switcher_ladder() -> Outcome {
    let mut rows = Stream::new(3);
    for seed in 0..10 {
        let x = rows.matrix(5, 6);
        // PLE(1) ≡ CGC
        let cgc = SwitcherSpec::new(SwitcherKind::Cgc, 6, 4, ids(3), seed);
        let mut ple = cgc.clone();
        ple.kind = SwitcherKind::Ple { levels: 1 };
        let p = init_switcher(&cgc).unwrap();
        check(
            switcher_forward(&cgc, &p, &x).unwrap().0 == switcher_forward(&ple, &p, &x).unwrap().0,
            || "PLE(1) differs from CGC".into(),
        )?;
        // CGC without specific experts ≡ MMOE
        let mmoe = SwitcherSpec::new(SwitcherKind::Mmoe, 6, 4, ids(2), seed);
        let mut cgc0 = mmoe.clone();
        cgc0.kind = SwitcherKind::Cgc;
        cgc0.specific_expert_count_per_child = 0;
        let p = init_switcher(&mmoe).unwrap();
        check(
            switcher_forward(&mmoe, &p, &x).unwrap().0 == switcher_forward(&cgc0, &p, &x).unwrap().0,
            || "CGC(0 specific) differs from MMOE".into(),
        )?;
        // MMOE with one expert ≡ that expert on every child
        let mut one = SwitcherSpec::new(SwitcherKind::Mmoe, 6, 4, ids(3), seed);
        one.shared_expert_count = 1;
        let p = init_switcher(&one).unwrap();
        let SwitcherParams::Gated { levels } = &p else {
            return Err("MMOE parameters are not gated".into());
        };
        let expert = mlp_apply(&levels[0].shared_experts[0], &x).unwrap();
        check(
            switcher_forward(&one, &p, &x).unwrap().0.iter().all(|o| *o == expert),
            || "MMOE(E=1) differs from its expert".into(),
        )?;
        // shared-bottom children identical
        let sb = SwitcherSpec::new(SwitcherKind::SharedBottom, 6, 4, ids(4), seed);
        let outs = switcher_forward(&sb, &init_switcher(&sb).unwrap(), &x).unwrap().0;
        check(outs.windows(2).all(|w| w[0] == w[1]), || "shared-bottom children differ".into())?;
    }
    Ok("4 reductions × 10 seeds, bitwise".into())
}

// 4 ------------------------------------------------------------------------

fn pairwise_auc(scores: &[f64], labels: &[f64]) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for (si, li) in scores.iter().zip(labels) {
        for (sj, lj) in scores.iter().zip(labels) {
            if *li == 1.0 && *lj == 0.0 {
                den += 1.0;
                num += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    (den > 0.0).then(|| num / den)
}

fn auc_oracle() -> Outcome {
    let mut s = Stream::new(4);
    let mut worst = 0.0f64;
    let mut undefined = 0;
    for i in 0..AUC_INSTANCES {
        let n = 1 + s.below(50);
        let scores: Vec<f64> = (0..n)
            .map(|_| match i % 3 {
                0 => s.unit(),
                1 => s.below(4) as f64 / 4.0,
                _ => 0.5 + if s.unit() < 0.1 { 1e-15 } else { 0.0 },
            })
            .collect();
        let labels: Vec<f64> = (0..n).map(|_| if s.unit() < 0.4 { 1.0 } else { 0.0 }).collect();
        match (auc(&scores, &labels), pairwise_auc(&scores, &labels)) {
            (Some(a), Some(b)) => worst = worst.max((a - b).abs()),
            (None, None) => undefined += 1,
            (a, b) => return Err(format!("instance {i}: {a:?} vs {b:?}")),
        }
    }
    check(worst <= AUC_TOLERANCE, || format!("max deviation {worst:e}"))?;
    Ok(format!(
        "{AUC_INSTANCES} instances, max deviation {worst:.1e}, {undefined} single-class"
    ))
}

// 5 ------------------------------------------------------------------------

fn label_derivation() -> Outcome {
    // (watch, length, skip threshold, cap) -> (cmpl, finish, skip)
    let cases = [
        ((30.0, 30.0, 3.0, 5.0), (1.0, 1.0, 0.0)),
        ((29.0, 30.0, 3.0, 5.0), (29.0 / 30.0, 0.0, 0.0)),
        ((3.0, 60.0, 3.0, 5.0), (3.0 / 60.0, 0.0, 1.0)),
        ((3.5, 60.0, 3.0, 5.0), (3.5 / 60.0, 0.0, 0.0)),
        ((0.0, 10.0, 3.0, 5.0), (0.0, 0.0, 1.0)),
        ((100.0, 10.0, 3.0, 5.0), (5.0, 1.0, 0.0)),
        ((50.0, 10.0, 3.0, 5.0), (5.0, 1.0, 0.0)),
        ((2.0, 2.0, 3.0, 5.0), (1.0, 1.0, 1.0)),
    ];
    for ((w, l, c, cap), want) in cases {
        let got = derive_labels(w, l, c, cap).map_err(|e| e.to_string())?;
        check((got.cmpl, got.finish, got.skip) == want, || {
            format!("watch {w}, length {l}: {:?} vs {want:?}", (got.cmpl, got.finish, got.skip))
        })?;
    }
    check(derive_labels(1.0, 0.0, 3.0, 5.0).is_err(), || "zero length accepted".into())?;
    Ok(format!("{} cases exact", cases.len()))
}

// 6 ------------------------------------------------------------------------

const RARE_COUNTS: [usize; 3] = [1000, 4000, 20000];
const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const LABELS: [&str; 3] = ["cmpl", "finish", "skip"];

/// One run of the local-overfitting setup. Seed `s` draws its own dataset
/// (seed 100 + s), split and initialization.
fn overfit_config(kind: ArchSpec, seed: u64) -> ExperimentConfig {
    let flat = kind == ArchSpec::Flat;
    let mut train = TrainConfig::new(10, 128, seed);
    train.adam.lr = 3e-3;
    let mut cfg = play::config("overfit", kind, 8, play::synthetic(32, RARE_COUNTS, 2.0, 1.0, 100 + seed), train);
    cfg.routing = RoutingConfig::Upward { facet: "group".into() };
    cfg.split = SplitPolicy::Fraction { train: 0.8, seed };
    let root = if flat {
        SwitcherKind::Ple { levels: 2 }
    } else {
        SwitcherKind::SharedBottom
    };
    cfg.architecture.levels = Some(vec![SwitcherTemplate::new(root)]);
    cfg.architecture.node_mlp_layers = Some(vec![]);
    cfg.architecture.facet_mlp_layers = Some(vec![]);
    cfg
}

fn final_region(r: &MetricsReport, group: &str, label: &str) -> (f64, f64) {
    let m = r.region(group, label).unwrap();
    (m.train_error.last().unwrap().unwrap(), m.test_error.last().unwrap().unwrap())
}

fn local_overfitting(scratch: &Path) -> Outcome {
    let archs = [
        ("flat", ArchSpec::Flat),
        (
            "hmtl",
            ArchSpec::Hmtl {
                permutation: vec!["group".into(), "behavior".into()],
            },
        ),
        ("mfh", ArchSpec::Mfh { depth: 1 }),
    ];
    // reports[arch][seed]
    let mut reports: Vec<Vec<MetricsReport>> = Vec::new();
    for (name, kind) in &archs {
        let mut runs = Vec::new();
        for seed in SEEDS {
            let dir = scratch.join(format!("{name}-{seed}"));
            runs.push(cmd_train(&overfit_config(kind.clone(), seed), &dir).map_err(|e| e.to_string())?.report);
        }
        reports.push(runs);
    }
    let rare = GROUPS[0];
    let new_mse = |a: usize| -> Vec<Option<f64>> { reports[a].iter().map(|r| Some(final_region(r, rare, "cmpl").1)).collect() };
    let gap = |a: usize, s: usize| {
        let (train, test) = final_region(&reports[a][s], rare, "cmpl");
        test - train
    };
    let (flat_mse, mfh_mse) = (median(&new_mse(0)).unwrap(), median(&new_mse(2)).unwrap());
    let smaller_gaps = (0..SEEDS.len()).filter(|&s| gap(2, s) < gap(0, s)).count();

    // Per group: median over seeds of the summed region test errors
    // (MSE for cmpl, log loss for finish and skip); lower is better.
    let group_error = |a: usize, g: &str| {
        let per_seed: Vec<Option<f64>> = reports[a]
            .iter()
            .map(|r| Some(LABELS.iter().map(|l| final_region(r, g, l).1).sum()))
            .collect();
        median(&per_seed).unwrap()
    };
    let mut ordered = 0;
    let mut cells = Vec::new();
    for g in GROUPS {
        let e: Vec<f64> = (0..3).map(|a| group_error(a, g)).collect();
        if e[2] <= e[1] && e[1] <= e[0] {
            ordered += 1;
        }
        cells.push(format!("{g} {:.3}/{:.3}/{:.3}", e[0], e[1], e[2]));
    }
    let detail = format!(
        "rare MSE flat {flat_mse:.4} mfh {mfh_mse:.4}; smaller rare gap {smaller_gaps}/5; \
         ordered groups {ordered}/3 (flat/hmtl/mfh error: {})",
        cells.join(", ")
    );
    check(mfh_mse < flat_mse, || format!("(a) failed: {detail}"))?;
    check(smaller_gaps >= 4, || format!("(b) failed: {detail}"))?;
    check(ordered >= 2, || format!("(c) failed: {detail}"))?;
    Ok(detail)
}

// 7 ------------------------------------------------------------------------

fn routing_policy() -> Outcome {
    let f = play_facets();
    let tasks = play_tasks_9(&f, &[3]).unwrap();
    let regions: Vec<Code> = GROUPS
        .iter()
        .map(|g| Code::from_names(&[("group", g)], &f).unwrap())
        .collect();
    let masks = routing_masks(&regions, &RoutingPolicy::upward(1, 3), &tasks, &f).unwrap();
    let expected: [&[&str]; 3] = [&["New", "Low", "High"], &["Low", "High"], &["High"]];
    for (s, want) in expected.iter().enumerate() {
        for (t, task) in tasks.iter().enumerate() {
            let group = &f.facets[1].partitions[task.code.partition_of(1).unwrap()];
            let trains = want.contains(&group.as_str());
            check(masks[t][s] == trains, || format!("{} sample trains {}: {}", GROUPS[s], task.name, masks[t][s]))?;
        }
    }

    let g = build_mfh(&f, 1, &tasks, &ArchOptions::new(8, 4)).unwrap();
    let params = init_model(&g, 7).unwrap();
    let mut s = Stream::new(7);
    for (r, region) in regions.iter().enumerate() {
        let (_, mask) = serving_subgraph(&g, region);
        for trial in 0..5 {
            let x: Vec<f64> = (0..8).map(|_| s.unit() * 2.0 - 1.0).collect();
            let before = serve_predict(&g, &params, &x, region).unwrap();
            let mut perturbed = params.clone();
            for (id, node) in perturbed.nodes.iter_mut() {
                if !mask[*id] {
                    for slice in node.slices_mut() {
                        for v in slice.iter_mut() {
                            *v = *v * (1.0 + s.unit()) + s.unit() * 10.0 - 5.0;
                        }
                    }
                }
            }
            check(perturbed != params, || "perturbation touched nothing".into())?;
            let after = serve_predict(&g, &perturbed, &x, region).unwrap();
            check(before == after, || format!("region {r} trial {trial}: outputs moved"))?;
        }
    }
    Ok("upward masks exact; serving invariant under outside perturbation".into())
}

// 8 ------------------------------------------------------------------------

fn determinism(scratch: &Path) -> Outcome {
    let cfg = overfit_config(ArchSpec::Mfh { depth: 1 }, 0);
    let mut texts = Vec::new();
    for run in ["a", "b"] {
        let dir = scratch.join(run);
        cmd_train(&cfg, &dir).map_err(|e| e.to_string())?;
        let read = |name: &str| std::fs::read(dir.join(name)).unwrap();
        texts.push((read("report.json"), read("report.csv"), read("params.json")));
    }
    check(texts[0].0 == texts[1].0, || "report.json differs".into())?;
    check(texts[0].1 == texts[1].1, || "report.csv differs".into())?;
    check(texts[0].2 == texts[1].2, || "params.json differs".into())?;
    Ok(format!("report.json {} bytes identical", texts[0].0.len()))
}

// 9 ------------------------------------------------------------------------

fn biasnet_parity() -> Outcome {
    let f = play_facets();
    let tasks = play_tasks_3(&f, &[3]).unwrap();
    let opts = ArchOptions::new(8, 4);
    let body = build_graph(&f, &ArchKind::Flat, &tasks, &opts).unwrap();
    let biased = build_biasnet(&f, 1, &ArchKind::Flat, &tasks, &opts).unwrap();
    let body_params = init_model(&body, 9).unwrap();
    let mut params = init_model(&biased, 9).unwrap();
    for (&id, p) in &body_params.nodes {
        let target = biased.node_by_name(&body.nodes[id].name).unwrap().id;
        params.nodes.insert(target, p.clone());
    }
    for n in biased.nodes.iter().filter(|n| n.kind.tag() == "bias") {
        let zero = params.nodes[&n.id].zeros_like();
        params.nodes.insert(n.id, zero);
    }
    let batch = toy_batch(&biased, 16, 2);
    let (a, _) = model_forward(&body, &body_params, &batch.x, &batch.regions).unwrap();
    let (b, _) = model_forward(&biased, &params, &batch.x, &batch.regions).unwrap();
    check(a == b, || "biasnet with a zero bias tower differs from its body".into())?;
    let checked: usize = a.iter().map(Vec::len).sum();
    Ok(format!("{checked} logits identical"))
}

// ---------------------------------------------------------------------------

fn main() {
    let scratch = tempfile::tempdir().expect("temp dir");
    let criteria: Vec<(&str, Duration, Box<dyn Fn() -> Outcome>)> = vec![
        ("gradient oracle", Duration::from_secs(60), Box::new(gradient_oracle)),
        ("structural counts", Duration::from_secs(5), Box::new(structural_counts)),
        ("switcher reduction ladder", Duration::from_secs(5), Box::new(switcher_ladder)),
        ("AUC oracle", Duration::from_secs(5), Box::new(auc_oracle)),
        ("label derivation", Duration::from_secs(1), Box::new(label_derivation)),
        (
            "local overfitting",
            Duration::from_secs(600),
            Box::new(|| local_overfitting(&scratch.path().join("overfit"))),
        ),
        ("routing policy", Duration::from_secs(5), Box::new(routing_policy)),
        (
            "determinism",
            Duration::from_secs(600),
            Box::new(|| determinism(&scratch.path().join("determinism"))),
        ),
        ("biasnet parity", Duration::from_secs(5), Box::new(biasnet_parity)),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let took = start.elapsed();
        let result = result.and_then(|d| {
            if took <= *budget {
                Ok(d)
            } else {
                Err(format!("{d}; took {took:.1?}, budget {budget:?}"))
            }
        });
        match result {
            Ok(detail) => println!("PASS {} {name} ({took:.1?}): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name} ({took:.1?}): {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} criteria failed");
        std::process::exit(1);
    }
}
