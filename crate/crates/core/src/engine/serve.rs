use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::model::{forward_subset, ModelParams};
use super::routing::serves;
use crate::activation::sigmoid;
use crate::error::{bail, Result};
use crate::lattice::{Code, Head, LatticeGraph};
use crate::matrix::Matrix;

/// Towers serving `region` and the node mask of their ancestors.
pub fn serving_subgraph(graph: &LatticeGraph, region: &Code) -> (Vec<usize>, Vec<bool>) {
    let towers: Vec<usize> = (0..graph.tasks.len())
        .filter(|&t| serves(region, &graph.tasks[t], &graph.facets))
        .filter_map(|t| graph.tower_of_task(t))
        .collect();
    let mask = graph.ancestor_mask(&towers);
    (towers, mask)
}

/// Predictions of the tasks serving the sample's own region, keyed by task
/// name. Binary heads return probabilities. Only the ancestors of those
/// towers are evaluated.
pub fn serve_predict(graph: &LatticeGraph, params: &ModelParams, features: &[f64], region: &Code) -> Result<BTreeMap<String, f64>> {
    let (towers, mask) = serving_subgraph(graph, region);
    if towers.is_empty() {
        bail!(Contract, "no task serves region {}", region.label(&graph.facets));
    }
    let x = Matrix::from_vec(1, features.len(), features.to_vec())?;
    let (logits, _) = forward_subset(graph, params, &x, core::slice::from_ref(region), Some(&mask))?;
    let mut out = BTreeMap::new();
    for (t, task) in graph.tasks.iter().enumerate() {
        if let Some(z) = &logits[t] {
            let v = match task.head {
                Head::Binary => sigmoid(z[0]),
                Head::Regression => z[0],
            };
            out.insert(task.name.clone(), v);
        }
    }
    Ok(out)
}
