//! Facets, codes and tasks, and the graphs built from them.

mod build;
mod facet;
mod graph;
mod task;
mod validate;

pub use build::{build_biasnet, build_flat, build_graph, build_hmtl, build_mfh, ArchOptions, SwitcherTemplate};
pub use facet::{enumerate_codes, enumerate_codes_over, extensions, extensions_over, Code, Facet, FacetKind, FacetSpec};
pub use graph::{ArchKind, Edge, LatticeGraph, Node, NodeKind};
pub use task::{cartesian_tasks, task_facets, validate_tasks, Head, HeadBinding, TaskSpec};
pub use validate::{validate_graph, Violation};
