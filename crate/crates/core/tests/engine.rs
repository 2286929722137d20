mod common;

use common::{max_rel_err, numeric_grad_terms};
use mfh_core::activation::{relu, sigmoid};
use mfh_core::data::{generate_synthetic, split, SplitPolicy};
use mfh_core::engine::*;
use mfh_core::lattice::*;
use mfh_core::mlp::{mlp_apply, MlpParams};
use mfh_core::presets::{play_facets, play_synthetic, play_tasks_3, play_tasks_9};
use mfh_core::switcher::{switcher_forward, switcher_param_count};
use mfh_core::{Matrix, Parameters};
use proptest::prelude::*;

fn toy(arch: &ArchKind) -> LatticeGraph {
    let f = play_facets();
    let opts = ArchOptions {
        bias_hidden: vec![3],
        ..ArchOptions::new(8, 4)
    };
    let tasks = match arch {
        ArchKind::Biasnet { .. } => play_tasks_3(&f, &[3]).unwrap(),
        _ => play_tasks_9(&f, &[3]).unwrap(),
    };
    build_graph(&f, arch, &tasks, &opts).unwrap()
}

fn archs() -> Vec<ArchKind> {
    vec![
        ArchKind::Flat,
        ArchKind::Hmtl { permutation: vec![0, 1] },
        ArchKind::Mfh { depth: 1 },
        ArchKind::Biasnet {
            bias_facet: 1,
            body: Box::new(ArchKind::Flat),
        },
    ]
}

/// Per-sample loss terms computed directly from logits, independent of
/// `compute_loss`.
fn oracle_terms(graph: &LatticeGraph, params: &ModelParams, batch: &GradBatch) -> Vec<f64> {
    let (logits, _) = model_forward(graph, params, &batch.x, &batch.regions).unwrap();
    let mut terms = vec![];
    for (t, task) in graph.tasks.iter().enumerate() {
        let n = logits[t].len() as f64;
        for (z, y) in logits[t].iter().zip(&batch.labels[t]) {
            let l = match task.head {
                Head::Regression => (z - y) * (z - y),
                Head::Binary => {
                    let p = sigmoid(*z);
                    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
                }
            };
            terms.push(l / n);
        }
    }
    terms
}

#[test]
fn full_model_gradients_match_finite_differences() {
    for arch in archs() {
        for learned in [false, true] {
            let mut graph = toy(&arch);
            graph.learned_combination = learned;
            let mut params = init_model(&graph, 11).unwrap();
            if learned {
                for w in params.combination.values_mut() {
                    for (i, v) in w.iter_mut().enumerate() {
                        *v = 0.7 + 0.2 * i as f64;
                    }
                }
            }
            let batch = toy_batch(&graph, 3, 5);
            let analytic = analytic_gradient(&graph, &params, &batch).unwrap();
            let numeric = numeric_grad_terms(&params, |p| oracle_terms(&graph, p, &batch));
            let err = max_rel_err(&common::flatten(&analytic), &numeric);
            assert!(err < 1e-4, "{} (learned {learned}): {err}", arch.name());
        }
    }
}

#[test]
fn init_is_deterministic_and_counts_nodes() {
    let f = play_facets();
    let flat3 = build_flat(&f, &play_tasks_3(&f, &[4]).unwrap(), &ArchOptions::new(8, 4)).unwrap();
    let p = init_model(&flat3, 3).unwrap();
    assert_eq!(p.nodes.len(), 4);
    assert_eq!(p, init_model(&flat3, 3).unwrap());
    assert_ne!(p, init_model(&flat3, 4).unwrap());

    let mfh = toy(&ArchKind::Mfh { depth: 1 });
    let p = init_model(&mfh, 3).unwrap();
    let non_tower: Vec<&usize> = p.nodes.keys().filter(|&&id| mfh.nodes[id].kind.tag() != "tower").collect();
    assert_eq!(non_tower.len(), 17);
    // Census oracle: spec-derived counts agree with the built parameters.
    let census: usize = mfh
        .nodes
        .iter()
        .map(|n| match &n.kind {
            NodeKind::Switcher(s) => switcher_param_count(s),
            NodeKind::Mlp(m) | NodeKind::Tower { mlp: m, .. } | NodeKind::Bias { mlp: m, .. } => {
                let mut fan = m.input_dim;
                m.layer_sizes.iter().map(|&o| {
                    let c = o * fan + o;
                    fan = o;
                    c
                }).sum()
            }
        })
        .sum();
    assert_eq!(p.param_count(), census);
}

#[test]
fn init_rejects_invalid_graph() {
    let mut g = toy(&ArchKind::Flat);
    g.edges.pop();
    assert!(matches!(init_model(&g, 0), Err(mfh_core::Error::Contract(_))));
}

#[test]
fn zero_final_layer_gives_half_probability() {
    let g = toy(&ArchKind::Mfh { depth: 1 });
    let mut p = init_model(&g, 1).unwrap();
    for (t, task) in g.tasks.iter().enumerate() {
        let id = g.tower_of_task(t).unwrap();
        if let Some(NodeParams::Mlp(m)) = p.nodes.get_mut(&id) {
            let last = m.layers.last_mut().unwrap();
            last.weight = Matrix::zeros(last.weight.rows(), last.weight.cols());
            last.bias.iter_mut().for_each(|b| *b = 0.0);
        }
        assert_eq!(task.tower_hidden, vec![3]);
    }
    let batch = toy_batch(&g, 4, 2);
    let (logits, _) = model_forward(&g, &p, &batch.x, &batch.regions).unwrap();
    for (t, task) in g.tasks.iter().enumerate() {
        if task.head == Head::Binary {
            assert!(logits[t].iter().all(|&z| sigmoid(z) == 0.5));
        }
    }
}

fn copy_by_name(from_graph: &LatticeGraph, from: &ModelParams, to_graph: &LatticeGraph, to: &mut ModelParams) {
    for (&id, p) in &from.nodes {
        let target = to_graph.node_by_name(&from_graph.nodes[id].name).unwrap().id;
        to.nodes.insert(target, p.clone());
    }
}

#[test]
fn zero_bias_tower_matches_body() {
    let f = play_facets();
    let tasks = play_tasks_3(&f, &[3]).unwrap();
    let opts = ArchOptions::new(8, 4);
    let body = build_flat(&f, &tasks, &opts).unwrap();
    let biased = build_biasnet(&f, 1, &ArchKind::Flat, &tasks, &opts).unwrap();
    let body_params = init_model(&body, 9).unwrap();
    let mut bias_params = init_model(&biased, 9).unwrap();
    copy_by_name(&body, &body_params, &biased, &mut bias_params);
    let bias_id = biased.nodes.iter().find(|n| n.kind.tag() == "bias").unwrap().id;
    let zeroed = bias_params.nodes[&bias_id].zeros_like();
    bias_params.nodes.insert(bias_id, zeroed);
    let batch = toy_batch(&biased, 6, 1);
    let (a, _) = model_forward(&body, &body_params, &batch.x, &[]).unwrap();
    let (b, _) = model_forward(&biased, &bias_params, &batch.x, &batch.regions).unwrap();
    assert_eq!(a, b);
}

fn as_mlp(p: &ModelParams, id: usize) -> &MlpParams {
    match &p.nodes[&id] {
        NodeParams::Mlp(m) => m,
        _ => panic!("node {id} is not an MLP"),
    }
}

#[test]
fn mfh_forward_matches_hand_composition() {
    let f = play_facets();
    let tasks = play_tasks_9(&f, &[2]).unwrap();
    let mut opts = ArchOptions::new(2, 2);
    opts.levels = vec![SwitcherTemplate::new(mfh_core::switcher::SwitcherKind::SharedBottom)];
    let g = build_mfh(&f, 1, &tasks, &opts).unwrap();
    let p = init_model(&g, 4).unwrap();
    let x = Matrix::from_rows(&[vec![0.3, -1.2], vec![0.8, 0.5]]).unwrap();
    let (logits, _) = model_forward(&g, &p, &x, &[]).unwrap();

    // Task Low&Finish via the behavior path and the group path.
    let task = tasks.iter().position(|t| t.name == "Finish&Low").unwrap();
    let id = |name: &str| g.node_by_name(name).unwrap().id;
    let sw = |name: &str, input: &Matrix, child: &str| {
        let n = g.node_by_name(name).unwrap();
        let NodeKind::Switcher(spec) = &n.kind else { panic!() };
        let NodeParams::Switcher(sp) = &p.nodes[&n.id] else { panic!() };
        let (outs, _) = switcher_forward(spec, sp, input).unwrap();
        outs[spec.child_index(child).unwrap()].clone()
    };
    let root = |child: &str| sw("switcher:root", &x, child);
    let behavior = mlp_apply(as_mlp(&p, id("mlp:facet:behavior")), &root("mlp:facet:behavior")).unwrap();
    let behavior = sw("switcher:facet:behavior", &behavior, "mlp:Finish");
    let finish = mlp_apply(as_mlp(&p, id("mlp:Finish")), &behavior).unwrap();
    let finish = sw("switcher:Finish", &finish, "tower:Finish&Low");
    let group = mlp_apply(as_mlp(&p, id("mlp:facet:group")), &root("mlp:facet:group")).unwrap();
    let group = sw("switcher:facet:group", &group, "mlp:Low");
    let low = mlp_apply(as_mlp(&p, id("mlp:Low")), &group).unwrap();
    let low = sw("switcher:Low", &low, "tower:Finish&Low");
    // Tower written out by hand: relu hidden layer, linear output.
    let tower = as_mlp(&p, id("tower:Finish&Low"));
    for r in 0..2 {
        let input: Vec<f64> = (0..2).map(|c| finish.get(r, c) + low.get(r, c)).collect();
        let hidden: Vec<f64> = (0..2)
            .map(|o| {
                let l = &tower.layers[0];
                relu(l.bias[o] + (0..2).map(|i| l.weight.get(o, i) * input[i]).sum::<f64>())
            })
            .collect();
        let l = &tower.layers[1];
        let z = l.bias[0] + (0..2).map(|i| l.weight.get(0, i) * hidden[i]).sum::<f64>();
        assert!((z - logits[task][r]).abs() < 1e-12);
    }
}

#[test]
fn masked_out_duplicates_change_nothing() {
    let g = toy(&ArchKind::Mfh { depth: 1 });
    let p = init_model(&g, 2).unwrap();
    let batch = toy_batch(&g, 3, 8);
    let weights = vec![1.0; g.tasks.len()];
    let run = |x: &Matrix, labels: &[Vec<f64>], masks: &[Vec<bool>]| {
        let (logits, cache) = model_forward(&g, &p, x, &[]).unwrap();
        let loss = compute_loss(&logits, labels, masks, &g.tasks, &weights).unwrap();
        let grads = model_backward(&g, &p, &cache, &loss.d_logits).unwrap();
        (loss.total, loss.per_task, grads)
    };
    let masks: Vec<Vec<bool>> = (0..g.tasks.len()).map(|t| vec![true, t % 2 == 0, true]).collect();
    let base = run(&batch.x, &batch.labels, &masks);
    let mut rows = batch.x.to_rows();
    rows.push(rows[1].clone());
    let x2 = Matrix::from_rows(&rows).unwrap();
    let labels2: Vec<Vec<f64>> = batch.labels.iter().map(|l| [l.clone(), vec![l[1]]].concat()).collect();
    let masks2: Vec<Vec<bool>> = masks.iter().map(|m| [m.clone(), vec![false]].concat()).collect();
    let dup = run(&x2, &labels2, &masks2);
    assert_eq!(base.0, dup.0);
    assert_eq!(base.1, dup.1);
    assert_eq!(common::flatten(&base.2), common::flatten(&dup.2));
}

#[test]
fn empty_masks_make_a_no_op_step() {
    let g = toy(&ArchKind::Flat);
    let p = init_model(&g, 2).unwrap();
    let batch = toy_batch(&g, 3, 8);
    let (logits, cache) = model_forward(&g, &p, &batch.x, &[]).unwrap();
    let masks = vec![vec![false; 3]; g.tasks.len()];
    let loss = compute_loss(&logits, &batch.labels, &masks, &g.tasks, &vec![1.0; g.tasks.len()]).unwrap();
    assert_eq!(loss.total, 0.0);
    let grads = model_backward(&g, &p, &cache, &loss.d_logits).unwrap();
    assert!(grads.all_zero());
    let state = mfh_core::adam::AdamState::new(&p, Default::default());
    let (next, _) = mfh_core::adam::adam_step(&p, &grads, &state).unwrap();
    assert_eq!(next, p);
}

fn group_code(f: &FacetSpec, g: &str) -> Code {
    Code::from_names(&[("group", g)], f).unwrap()
}

#[test]
fn routing_examples() {
    let f = play_facets();
    let tasks = play_tasks_9(&f, &[2]).unwrap();
    let upward = RoutingPolicy::upward(1, 3);
    let regions = vec![group_code(&f, "New"), group_code(&f, "Low"), group_code(&f, "High")];
    let masks = routing_masks(&regions, &upward, &tasks, &f).unwrap();
    for (t, task) in tasks.iter().enumerate() {
        let q = task.code.partition_of(1).unwrap();
        // Sample of partition p trains tasks of partitions q >= p.
        for p in 0..3 {
            assert_eq!(masks[t][p], q >= p, "{} / sample {p}", task.name);
        }
    }
    let identity = routing_masks(&regions, &RoutingPolicy::identity(1, 3), &tasks, &f).unwrap();
    for s in 0..3 {
        for b in 0..3 {
            let hits: usize = (0..9).filter(|&t| identity[t][s] && tasks[t].code.partition_of(0) == Some(b)).count();
            assert_eq!(hits, 1);
        }
    }
    let mut bad = upward.clone();
    bad.train_mask[1] = vec![2];
    assert!(bad.validate(&f).is_err());
}

#[test]
fn serving_uses_own_region_only() {
    let f = play_facets();
    let g = toy(&ArchKind::Mfh { depth: 1 });
    let p = init_model(&g, 5).unwrap();
    let x = vec![0.1, -0.3, 0.5, 0.7, -0.9, 0.2, 0.0, 1.1];
    let new = group_code(&f, "New");
    let out = serve_predict(&g, &p, &x, &new).unwrap();
    let names: Vec<&str> = out.keys().map(String::as_str).collect();
    assert_eq!(names, ["Cmpl&New", "Finish&New", "Skip&New"]);

    let (_, mask) = serving_subgraph(&g, &new);
    let mut perturbed = p.clone();
    for (id, node) in perturbed.nodes.iter_mut() {
        if !mask[*id] {
            for s in node.slices_mut() {
                s.iter_mut().for_each(|v| *v = *v * 3.0 + 1.0);
            }
        }
    }
    assert_ne!(perturbed, p);
    assert_eq!(serve_predict(&g, &perturbed, &x, &new).unwrap(), out);

    let one = vec![play_tasks_9(&f, &[2]).unwrap()[0].clone()];
    let single = build_mfh(&f, 1, &one, &ArchOptions::new(8, 4)).unwrap();
    let sp = init_model(&single, 1).unwrap();
    let region = Code::from_names(&[("group", "New")], &f).unwrap();
    assert_eq!(serve_predict(&single, &sp, &x, &region).unwrap().len(), 1);
    let other = Code::from_names(&[("group", "High")], &f).unwrap();
    assert!(serve_predict(&single, &sp, &x, &other).is_err());
}

fn small_data(seed: u64) -> (mfh_core::data::Dataset, mfh_core::data::Dataset) {
    let data = generate_synthetic(&play_synthetic(8, [60, 120, 300], 1.0, seed)).unwrap();
    split(&data, &SplitPolicy::Fraction { train: 0.8, seed }).unwrap()
}

#[test]
fn one_epoch_one_batch_one_step() {
    let g = toy(&ArchKind::Flat);
    let data = generate_synthetic(&play_synthetic(8, [4, 3, 3], 1.0, 1)).unwrap();
    let (_, report) = train(&g, &data, &data, &RoutingPolicy::upward(1, 3), &TrainConfig::new(1, 10, 1)).unwrap();
    assert_eq!(report.optimizer_steps, 1);
    assert_eq!(report.epochs, vec![1]);
}

#[test]
fn training_reduces_loss_and_is_deterministic() {
    let g = toy(&ArchKind::Mfh { depth: 1 });
    let (tr, te) = small_data(3);
    let mut cfg = TrainConfig::new(5, 32, 7);
    cfg.adam.lr = 0.01;
    let (p1, r1) = train(&g, &tr, &te, &RoutingPolicy::upward(1, 3), &cfg).unwrap();
    let (p2, r2) = train(&g, &tr, &te, &RoutingPolicy::upward(1, 3), &cfg).unwrap();
    assert_eq!(p1, p2);
    assert_eq!(r1, r2);
    assert!(r1.train_loss.last().unwrap() < &r1.train_loss[0], "{:?}", r1.train_loss);
    assert_eq!(r1.epochs, vec![1, 2, 3, 4, 5]);
    // Nine tasks, one cell each.
    assert_eq!(r1.tasks.len(), 9);
    assert_eq!(r1.regions.len(), 9);
    let flat3 = build_flat(&play_facets(), &play_tasks_3(&play_facets(), &[3]).unwrap(), &ArchOptions::new(8, 4)).unwrap();
    let (_, r3) = train(&flat3, &tr, &te, &RoutingPolicy::identity(1, 3), &TrainConfig::new(1, 32, 7)).unwrap();
    // Three behavior tasks reported on each of three groups.
    assert_eq!(r3.tasks.len(), 9);
    assert!(r3.task("Cmpl", "New").is_some());
}

#[test]
fn empty_training_split_is_rejected() {
    let g = toy(&ArchKind::Flat);
    let (tr, te) = small_data(1);
    let empty = tr.subset(&[]);
    assert!(matches!(
        train(&g, &empty, &te, &RoutingPolicy::serving(), &TrainConfig::new(1, 4, 0)),
        Err(mfh_core::Error::Contract(_))
    ));
}

#[test]
fn grad_check_flags_corrupted_backward() {
    let g = toy(&ArchKind::Mfh { depth: 1 });
    let p = init_model(&g, 1).unwrap();
    let batch = toy_batch(&g, 3, 4);
    let ok = grad_check(&g, &p, &batch).unwrap();
    assert!(ok.passed, "{ok:?}");
    assert_eq!(ok.checked, p.param_count());
    let victim = g.node_by_name("switcher:Low").unwrap().id;
    let bad = grad_check_with(&g, &p, &batch, |q| {
        let mut grads = analytic_gradient(&g, q, &batch)?;
        if let Some(node) = grads.nodes.get_mut(&victim) {
            node.slices_mut()[0][0] += 0.5;
        }
        Ok(grads)
    })
    .unwrap();
    assert!(!bad.passed);
    assert_eq!(bad.worst_node, Some(victim));
}

#[test]
fn grad_check_on_parameter_free_graph() {
    let f = play_facets();
    let tasks = play_tasks_3(&f, &[]).unwrap();
    let mut opts = ArchOptions::new(1, 1);
    opts.levels = vec![SwitcherTemplate {
        expert_layers: Some(vec![]),
        ..SwitcherTemplate::new(mfh_core::switcher::SwitcherKind::SharedBottom)
    }];
    // A tower needs at least its output layer, so only the body is free.
    let g = build_flat(&f, &tasks, &opts).unwrap();
    let root = g.root().unwrap();
    assert_eq!(g.nodes[root].kind.param_count(), 0);
    let p = init_model(&g, 0).unwrap();
    assert!(!p.nodes.contains_key(&root));
    assert!(grad_check(&g, &p, &toy_batch(&g, 2, 0)).unwrap().passed);
}

/// O(n²) pairwise AUC with half credit for ties.
fn pairwise_auc(scores: &[f64], labels: &[f64]) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] == 1.0 && labels[j] == 0.0 {
                den += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    (den > 0.0).then(|| num / den)
}

proptest! {
    #[test]
    fn auc_matches_pairwise(
        raw in prop::collection::vec((0u8..5, any::<bool>()), 1..50),
        continuous in prop::collection::vec(-1.0f64..1.0, 50),
        use_ties in any::<bool>(),
    ) {
        let scores: Vec<f64> = raw.iter().enumerate().map(|(i, (s, _))| if use_ties { f64::from(*s) / 4.0 } else { continuous[i] }).collect();
        let labels: Vec<f64> = raw.iter().map(|(_, l)| f64::from(u8::from(*l))).collect();
        match (auc(&scores, &labels), pairwise_auc(&scores, &labels)) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-12),
            (a, b) => prop_assert_eq!(a, b),
        }
    }
}
