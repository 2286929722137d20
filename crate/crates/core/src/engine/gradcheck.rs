use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::compute_loss;
use super::model::{model_backward, model_forward, ModelParams};
use crate::activation::bce_with_logit;
use crate::error::{bail, Result};
use crate::lattice::{Code, Head, LatticeGraph};
use crate::matrix::Matrix;
use crate::params::Parameters;

pub const GRAD_CHECK_STEP: f64 = 1e-5;
pub const GRAD_CHECK_TOLERANCE: f64 = 1e-4;

/// Inputs for one gradient check: a batch with labels and all-true masks.
#[derive(Debug, Clone, PartialEq)]
pub struct GradBatch {
    pub x: Matrix,
    pub regions: Vec<Code>,
    pub labels: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    /// Node owning the worst parameter.
    pub worst_node: Option<usize>,
    pub passed: bool,
}

/// A seeded batch: uniform features, random regions, labels matching each
/// head (0/1 for binary).
pub fn toy_batch(graph: &LatticeGraph, rows: usize, seed: u64) -> GradBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * graph.input_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x = Matrix::from_vec(rows, graph.input_dim, data).expect("sized buffer");
    let region_facets = graph.facets.region_facets();
    let regions = (0..rows)
        .map(|_| {
            let pairs = region_facets
                .iter()
                .map(|&f| (f, rng.random_range(0..graph.facets.facets[f].partitions.len())))
                .collect();
            Code::new(pairs, &graph.facets).expect("valid by construction")
        })
        .collect();
    let labels = graph
        .tasks
        .iter()
        .map(|t| {
            (0..rows)
                .map(|_| match t.head {
                    Head::Binary => f64::from(u8::from(rng.random_bool(0.5))),
                    Head::Regression => rng.random_range(-1.0..1.0),
                })
                .collect()
        })
        .collect();
    GradBatch { x, regions, labels }
}

/// Analytic gradient of the batch training loss.
pub fn analytic_gradient(graph: &LatticeGraph, params: &ModelParams, batch: &GradBatch) -> Result<ModelParams> {
    let (logits, cache) = model_forward(graph, params, &batch.x, &batch.regions)?;
    let masks = vec![vec![true; batch.x.rows()]; graph.tasks.len()];
    let weights = vec![1.0; graph.tasks.len()];
    let loss = compute_loss(&logits, &batch.labels, &masks, &graph.tasks, &weights)?;
    model_backward(graph, params, &cache, &loss.d_logits)
}

/// The batch loss split into its per-sample, per-task terms.
fn loss_terms(graph: &LatticeGraph, params: &ModelParams, batch: &GradBatch) -> Result<Vec<f64>> {
    let (logits, _) = model_forward(graph, params, &batch.x, &batch.regions)?;
    let n = batch.x.rows() as f64;
    let mut terms = Vec::with_capacity(logits.len() * batch.x.rows());
    for (t, task) in graph.tasks.iter().enumerate() {
        for (&z, &y) in logits[t].iter().zip(&batch.labels[t]) {
            let l = match task.head {
                Head::Regression => (z - y) * (z - y),
                Head::Binary => bce_with_logit(z, y),
            };
            terms.push(l / n);
        }
    }
    Ok(terms)
}

/// Central difference of the loss; term differences are summed so the
/// cancellation error stays near the size of a single term.
fn central_difference(graph: &LatticeGraph, plus: &ModelParams, minus: &ModelParams, batch: &GradBatch) -> Result<f64> {
    let up = loss_terms(graph, plus, batch)?;
    let down = loss_terms(graph, minus, batch)?;
    let diff: f64 = up.iter().zip(&down).map(|(a, b)| a - b).sum();
    Ok(diff / (2.0 * GRAD_CHECK_STEP))
}

/// Compares [`analytic_gradient`] with central differences on every
/// parameter.
pub fn grad_check(graph: &LatticeGraph, params: &ModelParams, batch: &GradBatch) -> Result<GradCheckReport> {
    grad_check_with(graph, params, batch, |p| analytic_gradient(graph, p, batch))
}

/// Like [`grad_check`] with a caller-supplied analytic gradient.
pub fn grad_check_with(
    graph: &LatticeGraph,
    params: &ModelParams,
    batch: &GradBatch,
    analytic: impl Fn(&ModelParams) -> Result<ModelParams>,
) -> Result<GradCheckReport> {
    let grads = analytic(params)?;
    if !grads.same_layout(params) {
        bail!(Dimension, "analytic gradient does not match the parameter layout");
    }
    let flat: Vec<f64> = grads.slices().iter().flat_map(|s| s.iter().copied()).collect();
    let owners: Vec<usize> = params
        .layout()
        .into_iter()
        .flat_map(|(id, n)| core::iter::repeat_n(id, n))
        .collect();
    let mut plus = params.clone();
    let mut minus = params.clone();
    let mut max_rel_err = 0.0f64;
    let mut worst = None;
    let mut k = 0;
    let lens: Vec<usize> = params.slices().iter().map(|s| s.len()).collect();
    for (s, len) in lens.into_iter().enumerate() {
        for i in 0..len {
            let orig = params.slices()[s][i];
            plus.slices_mut()[s][i] = orig + GRAD_CHECK_STEP;
            minus.slices_mut()[s][i] = orig - GRAD_CHECK_STEP;
            let numeric = central_difference(graph, &plus, &minus, batch)?;
            plus.slices_mut()[s][i] = orig;
            minus.slices_mut()[s][i] = orig;
            let a = flat[k];
            let err = libm::fabs(a - numeric) / libm::fabs(a).max(libm::fabs(numeric)).max(1e-8);
            if err > max_rel_err || (err.is_nan() && !max_rel_err.is_nan()) {
                max_rel_err = err;
                worst = Some(owners[k]);
            }
            k += 1;
        }
    }
    Ok(GradCheckReport {
        checked: k,
        max_rel_err,
        worst_node: worst,
        passed: max_rel_err < GRAD_CHECK_TOLERANCE,
    })
}
