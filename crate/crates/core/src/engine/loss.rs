use alloc::vec;
use alloc::vec::Vec;

use crate::activation::{bce_with_logit, sigmoid};
use crate::error::{bail, Result};
use crate::lattice::{Head, TaskSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    /// `Σ weight_t · loss_t`.
    pub total: f64,
    /// Unweighted mean loss per task; 0 for tasks with an empty mask.
    pub per_task: Vec<f64>,
    /// Gradient of `total` with respect to each task's logits; `None` when
    /// the task has no masked-in samples or zero weight.
    pub d_logits: Vec<Option<Vec<f64>>>,
}

/// Masked mean squared error for regression heads and binary cross-entropy
/// on logits for binary heads.
pub fn compute_loss(
    logits: &[Vec<f64>],
    labels: &[Vec<f64>],
    masks: &[Vec<bool>],
    tasks: &[TaskSpec],
    weights: &[f64],
) -> Result<LossOutput> {
    let t = tasks.len();
    if logits.len() != t || labels.len() != t || masks.len() != t || weights.len() != t {
        bail!(Dimension, "loss inputs must have one entry per task ({})", t);
    }
    let mut total = 0.0;
    let mut per_task = vec![0.0; t];
    let mut d_logits = vec![None; t];
    for (i, task) in tasks.iter().enumerate() {
        let (z, y, m) = (&logits[i], &labels[i], &masks[i]);
        if z.len() != m.len() || y.len() != m.len() {
            bail!(Dimension, "task {:?}: {} logits, {} labels, {} mask entries", task.name, z.len(), y.len(), m.len());
        }
        let count = m.iter().filter(|&&b| b).count();
        if count == 0 {
            continue;
        }
        let n = count as f64;
        let mut sum = 0.0;
        let mut grad = vec![0.0; z.len()];
        for s in 0..z.len() {
            if !m[s] {
                continue;
            }
            match task.head {
                Head::Regression => {
                    let r = z[s] - y[s];
                    sum += r * r;
                    grad[s] = 2.0 * r / n;
                }
                Head::Binary => {
                    if !(0.0..=1.0).contains(&y[s]) {
                        bail!(Data, "task {:?}: binary label {} is outside [0, 1]", task.name, y[s]);
                    }
                    sum += bce_with_logit(z[s], y[s]);
                    grad[s] = (sigmoid(z[s]) - y[s]) / n;
                }
            }
        }
        per_task[i] = sum / n;
        total += weights[i] * per_task[i];
        if weights[i] != 0.0 {
            for g in &mut grad {
                *g *= weights[i];
            }
            d_logits[i] = Some(grad);
        }
    }
    Ok(LossOutput {
        total,
        per_task,
        d_logits,
    })
}
