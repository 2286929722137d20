use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Dataset, Sample};
use crate::activation::sigmoid;
use crate::error::{bail, Result};
use crate::lattice::{Code, FacetSpec, Head};
use crate::seed::{derive_seed, name_salt};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticHead {
    pub label: String,
    pub head: Head,
}

/// Number of samples drawn for one region, named by one partition per
/// region facet in facet order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionCount {
    pub partitions: Vec<String>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub facets: FacetSpec,
    pub counts: Vec<RegionCount>,
    pub heads: Vec<SyntheticHead>,
    pub feature_dim: usize,
    /// Size of the per-region deviation from the shared labeling weights.
    pub deviation_scale: f64,
    /// Portion of a region's deviation common to all heads, in [0, 1].
    pub deviation_sharing: f64,
    /// Standard deviation of additive noise on regression labels.
    pub noise: f64,
    pub seed: u64,
}

/// Labeling weights: head `h` in region `r` uses `shared[h] + region[h][r]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticWeights {
    pub shared: Vec<Vec<f64>>,
    pub region: Vec<Vec<Vec<f64>>>,
}

impl SyntheticWeights {
    pub fn effective(&self, head: usize, region: usize) -> Vec<f64> {
        self.shared[head]
            .iter()
            .zip(&self.region[head][region])
            .map(|(a, b)| a + b)
            .collect()
    }
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        self.facets.validate()?;
        if self.feature_dim == 0 {
            bail!(Config, "feature_dim must be at least 1");
        }
        if self.heads.is_empty() {
            bail!(Config, "at least one label head is required");
        }
        if !(self.noise >= 0.0) || !(self.deviation_scale >= 0.0) {
            bail!(Config, "noise and deviation scale must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.deviation_sharing) {
            bail!(Config, "deviation_sharing must lie in [0, 1]");
        }
        if self.counts.iter().all(|c| c.count == 0) {
            bail!(Contract, "the synthetic spec draws zero samples");
        }
        let codes = self.region_codes()?;
        for (i, c) in codes.iter().enumerate() {
            if codes[..i].contains(c) {
                bail!(Config, "region {:?} is listed twice", self.counts[i].partitions);
            }
        }
        Ok(())
    }

    pub fn region_codes(&self) -> Result<Vec<Code>> {
        let regions = self.facets.region_facets();
        self.counts
            .iter()
            .map(|rc| {
                if rc.partitions.len() != regions.len() {
                    bail!(
                        Config,
                        "region {:?} must name one partition for each of {} region facets",
                        rc.partitions,
                        regions.len()
                    );
                }
                let mut pairs = Vec::with_capacity(regions.len());
                for (&f, name) in regions.iter().zip(&rc.partitions) {
                    pairs.push((f, self.facets.partition_index(f, name)?));
                }
                Code::new(pairs, &self.facets)
            })
            .collect()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().map(|c| c.count).sum()
    }

    pub fn weights(&self) -> Result<SyntheticWeights> {
        self.validate()?;
        let d = self.feature_dim;
        let unit = 1.0 / libm::sqrt(d as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, name_salt("weights")));
        let shared: Vec<Vec<f64>> = self.heads.iter().map(|_| normal_vec(&mut rng, d, unit)).collect();
        let common: Vec<Vec<f64>> = self.counts.iter().map(|_| normal_vec(&mut rng, d, unit)).collect();
        let share = self.deviation_sharing;
        let region = self
            .heads
            .iter()
            .map(|_| {
                common
                    .iter()
                    .map(|u| {
                        let own = normal_vec(&mut rng, d, unit);
                        u.iter()
                            .zip(&own)
                            .map(|(a, b)| self.deviation_scale * (share * a + (1.0 - share) * b))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(SyntheticWeights { shared, region })
    }
}

/// Draws `counts[r]` samples for each region in listed order. Features are
/// standard normal; regression labels are linear plus noise and binary
/// labels are Bernoulli of the sigmoid of the same linear form.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    let weights = spec.weights()?;
    let codes = spec.region_codes()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, name_salt("samples")));
    let mut samples = Vec::with_capacity(spec.total());
    for (r, rc) in spec.counts.iter().enumerate() {
        let effective: Vec<Vec<f64>> = (0..spec.heads.len()).map(|h| weights.effective(h, r)).collect();
        for _ in 0..rc.count {
            let features = normal_vec(&mut rng, spec.feature_dim, 1.0);
            let mut labels = BTreeMap::new();
            for (h, head) in spec.heads.iter().enumerate() {
                let z: f64 = features.iter().zip(&effective[h]).map(|(x, w)| x * w).sum();
                let y = match head.head {
                    Head::Regression => {
                        let eps: f64 = rng.sample(StandardNormal);
                        z + spec.noise * eps
                    }
                    Head::Binary => {
                        let u: f64 = rng.random();
                        if u < sigmoid(z) {
                            1.0
                        } else {
                            0.0
                        }
                    }
                };
                labels.insert(head.label.clone(), y);
            }
            samples.push(Sample {
                features,
                region: codes[r].clone(),
                raw: None,
                time: None,
                labels,
            });
        }
    }
    Dataset::new(
        spec.facets.clone(),
        spec.feature_dim,
        samples,
        alloc::format!("synthetic seed {}", spec.seed),
    )
}
