//! Test-only finite-difference oracle. It uses nothing but a scalar loss
//! closure, so it is independent of every backward pass it checks.
#![allow(dead_code)]

use mfh_core::{Matrix, Parameters};

pub const H: f64 = 1e-5;

pub fn rel_err(a: f64, f: f64) -> f64 {
    (a - f).abs() / a.abs().max(f.abs()).max(1e-8)
}

/// Central differences of `loss` over every scalar of `params`, in
/// `Parameters::slices` order.
pub fn numeric_grad<P: Parameters>(params: &P, loss: impl Fn(&P) -> f64) -> Vec<f64> {
    let mut out = Vec::new();
    let lens: Vec<usize> = params.slices().iter().map(|s| s.len()).collect();
    for (k, len) in lens.into_iter().enumerate() {
        for i in 0..len {
            let mut plus = params.clone();
            plus.slices_mut()[k][i] += H;
            let mut minus = params.clone();
            minus.slices_mut()[k][i] -= H;
            out.push((loss(&plus) - loss(&minus)) / (2.0 * H));
        }
    }
    out
}

/// Central differences of a loss given as a list of additive terms. Each
/// term's difference is taken before summing, which keeps the cancellation
/// error near the size of one term instead of the whole loss.
pub fn numeric_grad_terms<P: Parameters>(params: &P, terms: impl Fn(&P) -> Vec<f64>) -> Vec<f64> {
    let mut out = Vec::new();
    let lens: Vec<usize> = params.slices().iter().map(|s| s.len()).collect();
    for (k, len) in lens.into_iter().enumerate() {
        for i in 0..len {
            let mut plus = params.clone();
            plus.slices_mut()[k][i] += H;
            let mut minus = params.clone();
            minus.slices_mut()[k][i] -= H;
            let diff: f64 = terms(&plus).iter().zip(terms(&minus)).map(|(a, b)| a - b).sum();
            out.push(diff / (2.0 * H));
        }
    }
    out
}

pub fn numeric_input_grad(x: &Matrix, loss: impl Fn(&Matrix) -> f64) -> Vec<f64> {
    (0..x.data().len())
        .map(|i| {
            let mut plus = x.clone();
            plus.data_mut()[i] += H;
            let mut minus = x.clone();
            minus.data_mut()[i] -= H;
            (loss(&plus) - loss(&minus)) / (2.0 * H)
        })
        .collect()
}

pub fn flatten<P: Parameters>(p: &P) -> Vec<f64> {
    p.slices().iter().flat_map(|s| s.iter().copied()).collect()
}

pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, f)| rel_err(*a, *f))
        .fold(0.0, f64::max)
}

/// Deterministic pseudo-random matrix in [-1.5, 1.5).
pub fn test_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let data = (0..rows * cols)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 3.0 - 1.5
        })
        .collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

pub fn weighted_sum(y: &Matrix, w: &Matrix) -> f64 {
    y.data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
}
