//! The play-task setting: behavior facet {Cmpl, Finish, Skip} crossed with
//! user group facet {New, Low, High}.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::{RegionCount, SyntheticHead, SyntheticSpec};
use crate::error::Result;
use crate::lattice::{cartesian_tasks, Facet, FacetKind, FacetSpec, Head, HeadBinding, TaskSpec};

pub const BEHAVIORS: [&str; 3] = ["Cmpl", "Finish", "Skip"];
pub const GROUPS: [&str; 3] = ["New", "Low", "High"];

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| String::from(*s)).collect()
}

/// Facet 0 is the behavior (task) facet, facet 1 the user group.
pub fn play_facets() -> FacetSpec {
    FacetSpec {
        facets: vec![
            Facet {
                name: "behavior".into(),
                kind: FacetKind::Task,
                partitions: strings(&BEHAVIORS),
            },
            Facet {
                name: "group".into(),
                kind: FacetKind::Region,
                partitions: strings(&GROUPS),
            },
        ],
    }
}

/// Cmpl is a regression on label `cmpl`; Finish and Skip are binary on
/// `finish` and `skip`.
pub fn play_heads() -> Vec<HeadBinding> {
    vec![
        HeadBinding {
            label: "cmpl".into(),
            head: Head::Regression,
        },
        HeadBinding {
            label: "finish".into(),
            head: Head::Binary,
        },
        HeadBinding {
            label: "skip".into(),
            head: Head::Binary,
        },
    ]
}

/// The nine behavior × group tasks.
pub fn play_tasks_9(facets: &FacetSpec, tower_hidden: &[usize]) -> Result<Vec<TaskSpec>> {
    cartesian_tasks(facets, &[0, 1], &[(0, play_heads())], tower_hidden)
}

/// One task per behavior, shared by all groups.
pub fn play_tasks_3(facets: &FacetSpec, tower_hidden: &[usize]) -> Result<Vec<TaskSpec>> {
    cartesian_tasks(facets, &[0], &[(0, play_heads())], tower_hidden)
}

/// Synthetic play data with group counts `counts` (New, Low, High).
pub fn play_synthetic(feature_dim: usize, counts: [usize; 3], deviation_scale: f64, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        facets: play_facets(),
        counts: GROUPS
            .iter()
            .zip(counts)
            .map(|(g, count)| RegionCount {
                partitions: vec![String::from(*g)],
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
        deviation_sharing: 0.8,
        noise: 0.3,
        seed,
    }
}
