use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::lattice::{Code, FacetKind, FacetSpec, TaskSpec};

/// Which samples train which tasks. A sample in partition `p` of the
/// routing facet trains the tasks of every partition in `train_mask[p]`.
/// Every other region facet must match exactly, and serving always uses
/// the sample's own partitions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingPolicy {
    pub routing_facet: Option<usize>,
    #[serde(default)]
    pub train_mask: Vec<Vec<usize>>,
}

impl RoutingPolicy {
    /// Exact region matching, the same rule used at serving time.
    pub fn serving() -> Self {
        Self {
            routing_facet: None,
            train_mask: Vec::new(),
        }
    }

    pub fn identity(facet: usize, partitions: usize) -> Self {
        Self {
            routing_facet: Some(facet),
            train_mask: (0..partitions).map(|p| alloc::vec![p]).collect(),
        }
    }

    /// Partitions ordered from sparsest to richest; partition `p` also
    /// trains every later partition, e.g. New→{New, Low, High},
    /// Low→{Low, High}, High→{High}.
    pub fn upward(facet: usize, partitions: usize) -> Self {
        Self {
            routing_facet: Some(facet),
            train_mask: (0..partitions).map(|p| (p..partitions).collect()).collect(),
        }
    }

    pub fn validate(&self, facets: &FacetSpec) -> Result<()> {
        let Some(f) = self.routing_facet else {
            return Ok(());
        };
        if f >= facets.len() || facets.facets[f].kind != FacetKind::Region {
            bail!(Config, "routing facet {} must be a region facet", f);
        }
        let m = facets.facets[f].partitions.len();
        if self.train_mask.len() != m {
            bail!(Config, "routing mask has {} rows for {} partitions", self.train_mask.len(), m);
        }
        for (p, row) in self.train_mask.iter().enumerate() {
            if !row.contains(&p) {
                bail!(Config, "partition {} must train its own tasks", p);
            }
            if row.iter().any(|&q| q >= m) {
                bail!(Config, "routing mask row {} names an unknown partition", p);
            }
        }
        Ok(())
    }

    /// Whether a sample with `region` trains `task`.
    pub fn consumes(&self, region: &Code, task: &TaskSpec, facets: &FacetSpec) -> Result<bool> {
        for &(f, q) in task.code.pairs() {
            if facets.facets[f].kind != FacetKind::Region {
                continue;
            }
            let Some(p) = region.partition_of(f) else {
                bail!(Data, "sample has no partition for facet {:?}", facets.facets[f].name);
            };
            let ok = if Some(f) == self.routing_facet {
                self.train_mask[p].contains(&q)
            } else {
                p == q
            };
            if !ok {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Whether `task` serves a sample with `region`: every region facet in the
/// task code matches the sample.
pub fn serves(region: &Code, task: &TaskSpec, facets: &FacetSpec) -> bool {
    task.code
        .pairs()
        .iter()
        .all(|&(f, q)| facets.facets[f].kind != FacetKind::Region || region.partition_of(f) == Some(q))
}

/// Training mask per task over a batch of regions.
pub fn routing_masks(regions: &[Code], policy: &RoutingPolicy, tasks: &[TaskSpec], facets: &FacetSpec) -> Result<Vec<Vec<bool>>> {
    if let Some(f) = policy.routing_facet {
        let m = facets.facets.get(f).map_or(0, |x| x.partitions.len());
        if let Some(i) = regions.iter().position(|r| r.partition_of(f).map_or(true, |p| p >= m)) {
            bail!(Data, "sample {} has no valid partition for the routing facet", i);
        }
    }
    tasks
        .iter()
        .map(|t| regions.iter().map(|r| policy.consumes(r, t, facets)).collect())
        .collect()
}
