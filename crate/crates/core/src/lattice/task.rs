use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::facet::{Code, FacetKind, FacetSpec};
use crate::error::{bail, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    /// Trained with squared error, evaluated with MSE.
    Regression,
    /// Trained with cross-entropy on logits, evaluated with AUC.
    Binary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub code: Code,
    pub head: Head,
    /// Dataset label column the task is trained on.
    pub label: String,
    /// Hidden widths of the tower; a final width-1 linear layer is appended.
    pub tower_hidden: Vec<usize>,
}

impl TaskSpec {
    pub fn tower_layers(&self) -> Vec<usize> {
        let mut layers = self.tower_hidden.clone();
        layers.push(1);
        layers
    }
}

pub fn validate_tasks(tasks: &[TaskSpec], facets: &FacetSpec) -> Result<()> {
    for (i, t) in tasks.iter().enumerate() {
        if t.code.is_empty() {
            bail!(Config, "task {:?} has an empty code", t.name);
        }
        if t.code.pairs().iter().any(|&(f, p)| f >= facets.len() || p >= facets.facets[f].partitions.len()) {
            bail!(Config, "task {:?} has a code outside the facet spec", t.name);
        }
        if tasks[..i].iter().any(|o| o.code == t.code) {
            bail!(Config, "task {:?} repeats the code of another task", t.name);
        }
        if tasks[..i].iter().any(|o| o.name == t.name) {
            bail!(Config, "duplicate task name {:?}", t.name);
        }
        if t.tower_hidden.iter().any(|&w| w == 0) {
            bail!(Config, "task {:?} has a zero-width tower layer", t.name);
        }
    }
    Ok(())
}

/// Per-partition head definition for a task facet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadBinding {
    pub label: String,
    pub head: Head,
}

/// The full Cartesian product of tasks over `facets`. Each task facet
/// partition is bound to a label head through `heads` (indexed like the
/// task facet's partitions); names are the code labels.
pub fn cartesian_tasks(
    facets: &FacetSpec,
    active: &[usize],
    heads: &[(usize, Vec<HeadBinding>)],
    tower_hidden: &[usize],
) -> Result<Vec<TaskSpec>> {
    let codes = super::facet::enumerate_codes_over(facets, active, active.len())?;
    codes
        .into_iter()
        .map(|code| {
            let binding = heads
                .iter()
                .find_map(|(f, bindings)| code.partition_of(*f).map(|p| &bindings[p]))
                .ok_or_else(|| crate::Error::Config("tasks need a task facet with head bindings".into()))?;
            Ok(TaskSpec {
                name: code.label(facets),
                head: binding.head,
                label: binding.label.clone(),
                tower_hidden: tower_hidden.to_vec(),
                code,
            })
        })
        .collect()
}

/// Task facets present in the spec.
pub fn task_facets(facets: &FacetSpec) -> Vec<usize> {
    (0..facets.len())
        .filter(|&i| facets.facets[i].kind == FacetKind::Task)
        .collect()
}
