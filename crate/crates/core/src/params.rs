use alloc::vec::Vec;

/// A bundle of learnable scalars that can be viewed as an ordered list of
/// flat slices. The order is stable and defines how optimizers, gradient
/// checks and serializers walk the parameters.
pub trait Parameters: Clone {
    fn zeros_like(&self) -> Self;
    fn slices(&self) -> Vec<&[f64]>;
    fn slices_mut(&mut self) -> Vec<&mut [f64]>;

    fn param_count(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    /// Shapes agree when the slice lengths agree position by position.
    fn same_layout(&self, other: &Self) -> bool {
        let a = self.slices();
        let b = other.slices();
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.len() == y.len())
    }

    fn all_zero(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| *v == 0.0))
    }

    fn all_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}
