//! Multi-layer perceptrons with hand-chained reverse mode.
//!
//! Hidden layers use ReLU, the final layer is linear. A spec with no layers
//! is the identity map, which lets switchers and lattice nodes degrade to
//! pass-throughs without special casing.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activation::relu;
use crate::error::{bail, Result};
use crate::matrix::Matrix;
use crate::params::Parameters;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    /// Output width of every layer in order; the last entry is the MLP's
    /// output width. Empty means identity.
    pub layer_sizes: Vec<usize>,
    pub seed: u64,
}

impl MlpSpec {
    pub fn new(input_dim: usize, layer_sizes: Vec<usize>, seed: u64) -> Self {
        Self {
            input_dim,
            layer_sizes,
            seed,
        }
    }

    pub fn identity(input_dim: usize) -> Self {
        Self::new(input_dim, Vec::new(), 0)
    }

    pub fn output_dim(&self) -> usize {
        self.layer_sizes.last().copied().unwrap_or(self.input_dim)
    }

    pub fn is_identity(&self) -> bool {
        self.layer_sizes.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            bail!(Config, "MLP input_dim must be at least 1");
        }
        if self.layer_sizes.iter().any(|&s| s == 0) {
            bail!(Config, "MLP layer sizes must be at least 1, got {:?}", self.layer_sizes);
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        let mut fan_in = self.input_dim;
        let mut total = 0;
        for &out in &self.layer_sizes {
            total += out * fan_in + out;
            fan_in = out;
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `out×in`.
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub input_dim: usize,
    pub layers: Vec<Dense>,
}

impl MlpParams {
    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(self.input_dim, Dense::out_dim)
    }

    /// Checks the layer chain against a spec.
    pub fn matches(&self, spec: &MlpSpec) -> bool {
        if self.input_dim != spec.input_dim || self.layers.len() != spec.layer_sizes.len() {
            return false;
        }
        let mut fan_in = spec.input_dim;
        for (layer, &out) in self.layers.iter().zip(&spec.layer_sizes) {
            if layer.weight.shape() != (out, fan_in) || layer.bias.len() != out {
                return false;
            }
            fan_in = out;
        }
        true
    }
}

impl Parameters for MlpParams {
    fn zeros_like(&self) -> Self {
        Self {
            input_dim: self.input_dim,
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    weight: Matrix::zeros(l.weight.rows(), l.weight.cols()),
                    bias: alloc::vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for l in &self.layers {
            out.push(l.weight.data());
            out.push(&l.bias[..]);
        }
        out
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for l in &mut self.layers {
            out.push(l.weight.data_mut());
            out.push(&mut l.bias[..]);
        }
        out
    }
}

/// Xavier-uniform weights, zero biases, fully determined by `spec.seed`.
pub fn init_mlp(spec: &MlpSpec) -> Result<MlpParams> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut layers = Vec::with_capacity(spec.layer_sizes.len());
    let mut fan_in = spec.input_dim;
    for &fan_out in &spec.layer_sizes {
        let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
        let data = (0..fan_in * fan_out)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        layers.push(Dense {
            weight: Matrix::from_vec(fan_out, fan_in, data)?,
            bias: alloc::vec![0.0; fan_out],
        });
        fan_in = fan_out;
    }
    Ok(MlpParams {
        input_dim: spec.input_dim,
        layers,
    })
}

/// Values retained by a forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Input to each layer.
    inputs: Vec<Matrix>,
    /// Pre-activation of each layer.
    pre_activations: Vec<Matrix>,
    batch: usize,
    input_dim: usize,
}

pub fn mlp_forward(params: &MlpParams, x: &Matrix) -> Result<(Matrix, MlpCache)> {
    if x.cols() != params.input_dim {
        bail!(
            Dimension,
            "MLP expects {} input columns, got {}",
            params.input_dim,
            x.cols()
        );
    }
    let mut inputs = Vec::with_capacity(params.layers.len());
    let mut pre_activations = Vec::with_capacity(params.layers.len());
    let mut current = x.clone();
    let last = params.layers.len().saturating_sub(1);
    for (i, layer) in params.layers.iter().enumerate() {
        let mut z = current.matmul_transposed(&layer.weight)?;
        z.add_row_vector(&layer.bias)?;
        let next = if i == last {
            z.clone()
        } else {
            let mut a = z.clone();
            a.data_mut().iter_mut().for_each(|v| *v = relu(*v));
            a
        };
        inputs.push(current);
        pre_activations.push(z);
        current = next;
    }
    let cache = MlpCache {
        inputs,
        pre_activations,
        batch: x.rows(),
        input_dim: x.cols(),
    };
    Ok((current, cache))
}

/// Forward pass without retaining a cache.
pub fn mlp_apply(params: &MlpParams, x: &Matrix) -> Result<Matrix> {
    mlp_forward(params, x).map(|(y, _)| y)
}

pub fn mlp_backward(params: &MlpParams, cache: &MlpCache, dy: &Matrix) -> Result<(MlpParams, Matrix)> {
    if cache.inputs.len() != params.layers.len() || cache.input_dim != params.input_dim {
        bail!(Contract, "MLP cache does not belong to these parameters");
    }
    for (layer, (input, z)) in params
        .layers
        .iter()
        .zip(cache.inputs.iter().zip(&cache.pre_activations))
    {
        if input.cols() != layer.in_dim() || z.cols() != layer.out_dim() {
            bail!(Contract, "MLP cache shapes do not match the layer chain");
        }
    }
    let expected_out = params.output_dim();
    if dy.shape() != (cache.batch, expected_out) {
        bail!(
            Dimension,
            "MLP output gradient is {}x{}, expected {}x{}",
            dy.rows(),
            dy.cols(),
            cache.batch,
            expected_out
        );
    }

    let mut grads = params.zeros_like();
    let mut delta = dy.clone();
    let last = params.layers.len().saturating_sub(1);
    for i in (0..params.layers.len()).rev() {
        if i != last {
            let z = &cache.pre_activations[i];
            for (d, zv) in delta.data_mut().iter_mut().zip(z.data()) {
                if *zv <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        grads.layers[i].weight = delta.transpose_matmul(&cache.inputs[i])?;
        grads.layers[i].bias = delta.column_sums();
        delta = delta.matmul(&params.layers[i].weight)?;
    }
    Ok((grads, delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn spec(input: usize, sizes: &[usize], seed: u64) -> MlpSpec {
        MlpSpec::new(input, sizes.to_vec(), seed)
    }

    #[test]
    fn empty_spec_is_identity() {
        let p = init_mlp(&spec(3, &[], 1)).unwrap();
        assert!(p.layers.is_empty());
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 3.0]]).unwrap();
        let (y, cache) = mlp_forward(&p, &x).unwrap();
        assert_eq!(y, x);
        let (g, dx) = mlp_backward(&p, &cache, &x).unwrap();
        assert_eq!(g.param_count(), 0);
        assert_eq!(dx, x);
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let s = spec(4, &[8], 7);
        assert_eq!(init_mlp(&s).unwrap(), init_mlp(&s).unwrap());
        let bound = libm::sqrt(6.0 / 12.0);
        for seed in 0..1000 {
            let p = init_mlp(&spec(4, &[8], seed)).unwrap();
            assert!(p.layers[0].weight.data().iter().all(|w| w.abs() <= bound));
            assert!(p.layers[0].bias.iter().all(|b| *b == 0.0));
        }
    }

    #[test]
    fn zero_sizes_rejected() {
        assert!(matches!(init_mlp(&spec(4, &[0], 1)), Err(crate::Error::Config(_))));
        assert!(matches!(init_mlp(&spec(0, &[2], 1)), Err(crate::Error::Config(_))));
    }

    #[test]
    fn final_layer_is_linear() {
        let p = MlpParams {
            input_dim: 2,
            layers: vec![Dense {
                weight: Matrix::identity(2),
                bias: vec![0.0, 0.0],
            }],
        };
        let x = Matrix::from_rows(&[vec![-1.0, 2.0]]).unwrap();
        assert_eq!(mlp_apply(&p, &x).unwrap(), x);
    }

    #[test]
    fn hidden_layer_applies_relu() {
        let p = MlpParams {
            input_dim: 2,
            layers: vec![
                Dense {
                    weight: Matrix::identity(2),
                    bias: vec![0.0, 0.0],
                },
                Dense {
                    weight: Matrix::identity(2),
                    bias: vec![0.0, 0.0],
                },
            ],
        };
        let x = Matrix::from_rows(&[vec![-1.0, 2.0]]).unwrap();
        let (y, _) = mlp_forward(&p, &x).unwrap();
        assert_eq!(y.to_rows(), vec![vec![0.0, 2.0]]);
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_grads() {
        let p = init_mlp(&spec(3, &[5, 2], 3)).unwrap();
        let x = Matrix::from_rows(&[vec![0.1, 0.2, 0.3], vec![-0.4, 0.5, 0.9]]).unwrap();
        let (_, cache) = mlp_forward(&p, &x).unwrap();
        let (g, dx) = mlp_backward(&p, &cache, &Matrix::zeros(2, 2)).unwrap();
        assert!(g.all_zero());
        assert!(dx.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn mismatched_cache_rejected() {
        let p = init_mlp(&spec(3, &[4, 2], 3)).unwrap();
        let q = init_mlp(&spec(3, &[2], 3)).unwrap();
        let x = Matrix::zeros(1, 3);
        let (_, cache) = mlp_forward(&q, &x).unwrap();
        assert!(matches!(
            mlp_backward(&p, &cache, &Matrix::zeros(1, 2)),
            Err(crate::Error::Contract(_))
        ));
        assert!(matches!(mlp_forward(&p, &Matrix::zeros(1, 2)), Err(crate::Error::Dimension(_))));
    }

    #[test]
    fn param_count_matches_construction() {
        let s = spec(4, &[8, 3], 2);
        assert_eq!(init_mlp(&s).unwrap().param_count(), s.param_count());
        assert_eq!(s.param_count(), 4 * 8 + 8 + 8 * 3 + 3);
    }
}
