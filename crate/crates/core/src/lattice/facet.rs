use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};

/// Whether a facet partitions samples (every sample belongs to exactly one
/// partition, e.g. a user group) or partitions prediction targets (each
/// partition names a label head, e.g. a behavior).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FacetKind {
    Region,
    Task,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Facet {
    pub name: String,
    pub kind: FacetKind,
    pub partitions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacetSpec {
    pub facets: Vec<Facet>,
}

impl FacetSpec {
    pub fn new(facets: Vec<Facet>) -> Result<Self> {
        let spec = Self { facets };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.facets.is_empty() {
            bail!(Config, "at least one facet is required");
        }
        for (i, f) in self.facets.iter().enumerate() {
            if self.facets[..i].iter().any(|g| g.name == f.name) {
                bail!(Config, "duplicate facet name {:?}", f.name);
            }
            if f.partitions.len() < 2 {
                bail!(Config, "facet {:?} needs at least 2 partitions", f.name);
            }
            for (j, p) in f.partitions.iter().enumerate() {
                if f.partitions[..j].contains(p) {
                    bail!(Config, "duplicate partition {:?} in facet {:?}", p, f.name);
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.facets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facets.is_empty()
    }

    pub fn facet_index(&self, name: &str) -> Result<usize> {
        match self.facets.iter().position(|f| f.name == name) {
            Some(i) => Ok(i),
            None => bail!(Config, "unknown facet {:?}", name),
        }
    }

    pub fn partition_index(&self, facet: usize, name: &str) -> Result<usize> {
        let f = &self.facets[facet];
        match f.partitions.iter().position(|p| p == name) {
            Some(i) => Ok(i),
            None => bail!(Data, "unknown partition {:?} for facet {:?}", name, f.name),
        }
    }

    pub fn region_facets(&self) -> Vec<usize> {
        (0..self.facets.len())
            .filter(|&i| self.facets[i].kind == FacetKind::Region)
            .collect()
    }

    pub fn all_facets(&self) -> Vec<usize> {
        (0..self.facets.len()).collect()
    }
}

/// A partial assignment of partitions to facets, stored as
/// `(facet, partition)` pairs sorted by facet. The empty code is the root.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Code(Vec<(usize, usize)>);

impl Code {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    pub fn new(mut pairs: Vec<(usize, usize)>, facets: &FacetSpec) -> Result<Self> {
        pairs.sort_unstable();
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                bail!(Config, "code assigns facet {} twice", w[0].0);
            }
        }
        for &(f, p) in &pairs {
            if f >= facets.len() || p >= facets.facets[f].partitions.len() {
                bail!(Config, "code pair ({}, {}) is out of range", f, p);
            }
        }
        Ok(Self(pairs))
    }

    /// Builds a code from `(facet name, partition name)` pairs.
    pub fn from_names(pairs: &[(&str, &str)], facets: &FacetSpec) -> Result<Self> {
        let mut out = Vec::with_capacity(pairs.len());
        for (f, p) in pairs {
            let fi = facets.facet_index(f)?;
            out.push((fi, facets.partition_index(fi, p)?));
        }
        Self::new(out, facets)
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn partition_of(&self, facet: usize) -> Option<usize> {
        self.0.iter().find(|(f, _)| *f == facet).map(|(_, p)| *p)
    }

    pub fn is_subcode_of(&self, other: &Code) -> bool {
        self.0.iter().all(|pair| other.0.contains(pair))
    }

    pub fn with(&self, facet: usize, partition: usize) -> Code {
        let mut pairs = self.0.clone();
        pairs.retain(|(f, _)| *f != facet);
        pairs.push((facet, partition));
        pairs.sort_unstable();
        Code(pairs)
    }

    pub fn restricted_to(&self, facets: &[usize]) -> Code {
        Code(self.0.iter().copied().filter(|(f, _)| facets.contains(f)).collect())
    }

    /// `Part&Part` in facet order, or `root` for the empty code.
    pub fn label(&self, facets: &FacetSpec) -> String {
        if self.0.is_empty() {
            return String::from("root");
        }
        let names: Vec<&str> = self
            .0
            .iter()
            .map(|&(f, p)| facets.facets[f].partitions[p].as_str())
            .collect();
        names.join("&")
    }
}

fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return alloc::vec![Vec::new()];
    }
    if items.len() < k {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (i, &first) in items.iter().enumerate() {
        for mut rest in combinations(&items[i + 1..], k - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// All codes of exactly `size` pairs over the listed facets, sorted.
pub fn enumerate_codes_over(facets: &FacetSpec, active: &[usize], size: usize) -> Result<Vec<Code>> {
    if size > active.len() {
        bail!(Contract, "code size {} exceeds {} facets", size, active.len());
    }
    let mut out = Vec::new();
    for subset in combinations(active, size) {
        let mut partial: Vec<Vec<(usize, usize)>> = alloc::vec![Vec::new()];
        for &f in &subset {
            let mut next = Vec::new();
            for prefix in &partial {
                for p in 0..facets.facets[f].partitions.len() {
                    let mut v = prefix.clone();
                    v.push((f, p));
                    next.push(v);
                }
            }
            partial = next;
        }
        for pairs in partial {
            out.push(Code::new(pairs, facets)?);
        }
    }
    out.sort();
    Ok(out)
}

/// All codes of exactly `size` pairs over every facet of the spec.
pub fn enumerate_codes(facets: &FacetSpec, size: usize) -> Result<Vec<Code>> {
    enumerate_codes_over(facets, &facets.all_facets(), size)
}

/// Supercodes one pair larger than `code`, over the listed facets.
pub fn extensions_over(code: &Code, facets: &FacetSpec, active: &[usize]) -> Vec<Code> {
    let mut out = Vec::new();
    for &f in active {
        if code.partition_of(f).is_some() {
            continue;
        }
        for p in 0..facets.facets[f].partitions.len() {
            out.push(code.with(f, p));
        }
    }
    out.sort();
    out
}

pub fn extensions(code: &Code, facets: &FacetSpec) -> Vec<Code> {
    extensions_over(code, facets, &facets.all_facets())
}
