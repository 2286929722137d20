//! Parameters as JSON: every weight matrix is a nested array of rows.

use mfh_core::engine::{ModelParams, NodeParams};
use mfh_core::lattice::LatticeGraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PARAMS_FORMAT: &str = "mfh-params";
pub const PARAMS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NodeEntry {
    id: usize,
    name: String,
    params: NodeParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CombinationEntry {
    id: usize,
    name: String,
    weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ParamsDocument {
    format: String,
    version: u32,
    arch: String,
    config_digest: String,
    nodes: Vec<NodeEntry>,
    combination: Vec<CombinationEntry>,
}

pub fn params_to_json(graph: &LatticeGraph, params: &ModelParams, config_digest: &str) -> String {
    let name = |id: usize| graph.nodes[id].name.clone();
    let doc = ParamsDocument {
        format: PARAMS_FORMAT.into(),
        version: PARAMS_VERSION,
        arch: graph.arch.name(),
        config_digest: config_digest.into(),
        nodes: params
            .nodes
            .iter()
            .map(|(&id, p)| NodeEntry {
                id,
                name: name(id),
                params: p.clone(),
            })
            .collect(),
        combination: params
            .combination
            .iter()
            .map(|(&id, w)| CombinationEntry {
                id,
                name: name(id),
                weights: w.clone(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string(&doc).expect("parameter documents always serialize");
    text.push('\n');
    text
}

/// Reads parameters for `graph`, checking the format tag, node names and
/// every shape. Returns the stored config digest alongside.
pub fn params_from_json(text: &str, graph: &LatticeGraph) -> Result<(ModelParams, String)> {
    let doc: ParamsDocument = serde_json::from_str(text).map_err(Error::json("parameter json"))?;
    if doc.format != PARAMS_FORMAT || doc.version != PARAMS_VERSION {
        return Err(Error::Schema(format!(
            "expected {PARAMS_FORMAT} version {PARAMS_VERSION}, found {} version {}",
            doc.format, doc.version
        )));
    }
    let check_name = |id: usize, name: &str| -> Result<()> {
        match graph.nodes.get(id) {
            Some(n) if n.name == name => Ok(()),
            _ => Err(Error::Schema(format!("parameters for node {id} ({name}) do not match the graph"))),
        }
    };
    let mut params = ModelParams::default();
    for e in doc.nodes {
        check_name(e.id, &e.name)?;
        params.nodes.insert(e.id, e.params);
    }
    for c in doc.combination {
        check_name(c.id, &c.name)?;
        params.combination.insert(c.id, c.weights);
    }
    params.check(graph)?;
    Ok((params, doc.config_digest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use mfh_core::engine::init_model;
    use mfh_core::lattice::{build_mfh, ArchOptions};
    use mfh_core::presets::{play_facets, play_tasks_9};

    #[test]
    fn round_trip_is_exact() {
        let facets = play_facets();
        let tasks = play_tasks_9(&facets, &[3]).unwrap();
        let mut opts = ArchOptions::new(5, 3);
        opts.learned_combination = true;
        let g = build_mfh(&facets, 1, &tasks, &opts).unwrap();
        let p = init_model(&g, 4).unwrap();
        let text = params_to_json(&g, &p, "abc");
        let (back, digest) = params_from_json(&text, &g).unwrap();
        assert_eq!(back, p);
        assert_eq!(digest, "abc");
        assert_eq!(params_to_json(&g, &back, "abc"), text);
    }

    #[test]
    fn foreign_graph_is_rejected() {
        let facets = play_facets();
        let tasks = play_tasks_9(&facets, &[3]).unwrap();
        let g = build_mfh(&facets, 1, &tasks, &ArchOptions::new(5, 3)).unwrap();
        let other = build_mfh(&facets, 1, &tasks, &ArchOptions::new(6, 3)).unwrap();
        let text = params_to_json(&g, &init_model(&g, 1).unwrap(), "");
        assert!(params_from_json(&text, &other).is_err());
        let bad = text.replace("mfh-params", "other");
        assert!(matches!(params_from_json(&bad, &g), Err(Error::Schema(_))));
    }
}
