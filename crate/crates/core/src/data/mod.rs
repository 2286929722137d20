//! Samples, datasets, label derivation, region assignment, splitting and
//! the synthetic generator.

mod labels;
mod regions;
mod split;
mod synthetic;

pub use labels::{derive_labels, LabelConfig, PlayLabels};
pub use regions::{assign_regions, RegionRule};
pub use split::{split, SplitPolicy};
pub use synthetic::{generate_synthetic, RegionCount, SyntheticHead, SyntheticSpec, SyntheticWeights};

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::lattice::{Code, FacetSpec};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlayRecord {
    pub watch_time: f64,
    pub video_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    /// One partition per region facet.
    pub region: Code,
    pub raw: Option<PlayRecord>,
    pub time: Option<f64>,
    pub labels: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub facets: FacetSpec,
    pub feature_dim: usize,
    pub samples: Vec<Sample>,
    /// Where the data came from: a synthetic spec digest or a file path.
    pub provenance: String,
}

impl Dataset {
    pub fn new(facets: FacetSpec, feature_dim: usize, samples: Vec<Sample>, provenance: String) -> Result<Self> {
        let ds = Self {
            facets,
            feature_dim,
            samples,
            provenance,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let regions = self.facets.region_facets();
        for (i, s) in self.samples.iter().enumerate() {
            if s.features.len() != self.feature_dim {
                bail!(Data, "row {} has {} features, expected {}", i, s.features.len(), self.feature_dim);
            }
            if s.features.iter().any(|v| !v.is_finite()) {
                bail!(Data, "row {} has a non-finite feature", i);
            }
            let facets: Vec<usize> = s.region.pairs().iter().map(|&(f, _)| f).collect();
            if facets != regions
                || s.region.pairs().iter().any(|&(f, p)| p >= self.facets.facets[f].partitions.len())
            {
                bail!(Data, "row {} does not assign every region facet exactly once", i);
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Feature rows at `indices`, stacked.
    pub fn features(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.feature_dim);
        for &i in indices {
            data.extend_from_slice(&self.samples[i].features);
        }
        Matrix::from_vec(indices.len(), self.feature_dim, data).expect("uniform feature width")
    }

    pub fn regions(&self, indices: &[usize]) -> Vec<Code> {
        indices.iter().map(|&i| self.samples[i].region.clone()).collect()
    }

    /// Label names present on every sample.
    pub fn label_names(&self) -> Vec<String> {
        let Some(first) = self.samples.first() else {
            return Vec::new();
        };
        first
            .labels
            .keys()
            .filter(|k| self.samples.iter().all(|s| s.labels.contains_key(*k)))
            .cloned()
            .collect()
    }

    /// Sample count per partition of `facet`.
    pub fn partition_counts(&self, facet: usize) -> Vec<usize> {
        let mut counts = alloc::vec![0; self.facets.facets[facet].partitions.len()];
        for s in &self.samples {
            if let Some(p) = s.region.partition_of(facet) {
                counts[p] += 1;
            }
        }
        counts
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            facets: self.facets.clone(),
            feature_dim: self.feature_dim,
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            provenance: self.provenance.clone(),
        }
    }
}
