//! Scalar and vector nonlinearities.

use alloc::vec::Vec;

use crate::error::{bail, Result};

/// Numerically stable softmax with max subtraction.
pub fn softmax(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        bail!(Contract, "softmax of an empty vector");
    }
    if values.iter().any(|v| !v.is_finite()) {
        bail!(Contract, "softmax input must be finite");
    }
    let mut out = values.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

/// In-place softmax over a non-empty finite slice. Used on gate rows in the
/// hot path where the caller already guarantees the preconditions.
pub(crate) fn softmax_in_place(values: &mut [f64]) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in values.iter_mut() {
        *v = libm::exp(*v - max);
        total += *v;
    }
    for v in values.iter_mut() {
        *v /= total;
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

#[inline]
pub fn relu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        0.0
    }
}

/// Binary cross-entropy evaluated on a logit: `max(z,0) - z*y + ln(1 + e^{-|z|})`.
#[inline]
pub fn bce_with_logit(z: f64, y: f64) -> f64 {
    let pos = if z > 0.0 { z } else { 0.0 };
    pos - z * y + libm::log1p(libm::exp(-libm::fabs(z)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[3.7]).unwrap(), [1.0]);
        assert_eq!(softmax(&[0.0, 0.0]).unwrap(), [0.5, 0.5]);
        let w = softmax(&[core::f64::consts::LN_2, 0.0]).unwrap();
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((w[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn softmax_rejects_bad_input() {
        assert!(softmax(&[]).is_err());
        assert!(softmax(&[f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn softmax_is_stable_for_large_inputs() {
        let w = softmax(&[1000.0, 1000.0, -1000.0]).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-12 && w[2] >= 0.0);
    }

    #[test]
    fn bce_at_zero_logit_is_ln2() {
        for y in [0.0, 0.3, 1.0] {
            assert!((bce_with_logit(0.0, y) - core::f64::consts::LN_2).abs() < 1e-15);
        }
    }

    #[test]
    fn sigmoid_tails() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }

    proptest::proptest! {
        #[test]
        fn softmax_sums_to_one_and_permutes(v in proptest::collection::vec(-30.0f64..30.0, 1..12), shift in 0usize..12) {
            let w = softmax(&v).unwrap();
            let total: f64 = w.iter().sum();
            proptest::prop_assert!((total - 1.0).abs() <= 1e-12);
            proptest::prop_assert!(w.iter().all(|x| *x > 0.0));
            let k = shift % v.len();
            let mut rotated = v.clone();
            rotated.rotate_left(k);
            let mut expected = w.clone();
            expected.rotate_left(k);
            for (a, b) in softmax(&rotated).unwrap().iter().zip(&expected) {
                proptest::prop_assert!((a - b).abs() <= 1e-15);
            }
        }
    }
}
