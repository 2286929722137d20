use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::params::Parameters;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moments laid out exactly like the parameters they track.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<P> {
    pub first_moment: P,
    pub second_moment: P,
    pub step: u64,
    pub config: AdamConfig,
}

impl<P: Parameters> AdamState<P> {
    pub fn new(params: &P, config: AdamConfig) -> Self {
        Self {
            first_moment: params.zeros_like(),
            second_moment: params.zeros_like(),
            step: 0,
            config,
        }
    }
}

/// One bias-corrected Adam update. Returns fresh parameters and state; the
/// inputs are left untouched.
pub fn adam_step<P: Parameters>(params: &P, grads: &P, state: &AdamState<P>) -> Result<(P, AdamState<P>)> {
    adam_step_with_lr(params, grads, state, state.config.lr)
}

/// Same as [`adam_step`] with an explicit learning rate, for schedules.
pub fn adam_step_with_lr<P: Parameters>(
    params: &P,
    grads: &P,
    state: &AdamState<P>,
    lr: f64,
) -> Result<(P, AdamState<P>)> {
    if !params.same_layout(grads)
        || !params.same_layout(&state.first_moment)
        || !params.same_layout(&state.second_moment)
    {
        bail!(Dimension, "Adam parameters, gradients and moments must share one layout");
    }
    let AdamConfig {
        beta1, beta2, eps, ..
    } = state.config;
    let step = state.step + 1;
    let correction1 = 1.0 - libm::pow(beta1, step as f64);
    let correction2 = 1.0 - libm::pow(beta2, step as f64);

    let mut next = params.clone();
    let mut m = state.first_moment.clone();
    let mut v = state.second_moment.clone();
    {
        let g_slices = grads.slices();
        let mut p_slices = next.slices_mut();
        let mut m_slices = m.slices_mut();
        let mut v_slices = v.slices_mut();
        for (k, g_slice) in g_slices.iter().enumerate() {
            let p_slice = &mut p_slices[k];
            let m_slice = &mut m_slices[k];
            let v_slice = &mut v_slices[k];
            for i in 0..g_slice.len() {
                let g = g_slice[i];
                m_slice[i] = beta1 * m_slice[i] + (1.0 - beta1) * g;
                v_slice[i] = beta2 * v_slice[i] + (1.0 - beta2) * g * g;
                let m_hat = m_slice[i] / correction1;
                let v_hat = v_slice[i] / correction2;
                p_slice[i] -= lr * m_hat / (libm::sqrt(v_hat) + eps);
            }
        }
    }
    Ok((
        next,
        AdamState {
            first_moment: m,
            second_moment: v,
            step,
            config: state.config,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::{init_mlp, MlpSpec};

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let p = init_mlp(&MlpSpec::new(3, alloc::vec![4, 2], 5)).unwrap();
        let state = AdamState::new(&p, AdamConfig::default());
        let (next, state2) = adam_step(&p, &p.zeros_like(), &state).unwrap();
        assert_eq!(next, p);
        assert_eq!(state2.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr_against_sign() {
        let p = init_mlp(&MlpSpec::new(2, alloc::vec![3], 5)).unwrap();
        let mut g = p.zeros_like();
        for (i, s) in g.slices_mut().into_iter().enumerate() {
            for (j, v) in s.iter_mut().enumerate() {
                *v = if (i + j) % 2 == 0 { 0.7 } else { -2.5 };
            }
        }
        let state = AdamState::new(&p, AdamConfig::default());
        let (next, _) = adam_step(&p, &g, &state).unwrap();
        for ((new, old), grad) in next
            .slices()
            .iter()
            .flat_map(|s| s.iter())
            .zip(p.slices().iter().flat_map(|s| s.iter()))
            .zip(g.slices().iter().flat_map(|s| s.iter()))
        {
            let delta = new - old;
            // m̂ = g and v̂ = g², so the step is lr·g/(|g|+ε).
            let expected = -1e-3 * grad / (grad.abs() + 1e-8);
            assert!((delta - expected).abs() < 1e-15, "{delta} vs {expected}");
            assert!((delta.abs() - 1e-3).abs() < 1e-10);
        }
    }

    #[test]
    fn deterministic_and_shape_checked() {
        let p = init_mlp(&MlpSpec::new(2, alloc::vec![3], 5)).unwrap();
        let mut g = p.zeros_like();
        g.layers[0].bias[1] = 0.25;
        let state = AdamState::new(&p, AdamConfig::default());
        assert_eq!(adam_step(&p, &g, &state).unwrap(), adam_step(&p, &g, &state).unwrap());

        let other = init_mlp(&MlpSpec::new(2, alloc::vec![4], 5)).unwrap();
        assert!(matches!(adam_step(&p, &other, &state), Err(crate::Error::Dimension(_))));
    }
}
