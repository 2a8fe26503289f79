use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;

use super::{join, HarRng, Param, Real, Slot, SlotRef, Visit};
use crate::error::{Error, Result};

/// Affine map `x·W + b` over a `batch × in` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear<T> {
    pub w: Param<T>,
    pub b: Param<T>,
}

impl<T: Real> Linear<T> {
    pub fn new(input_dim: usize, output_dim: usize, rng: &mut HarRng) -> Self {
        let bound = 1.0 / (input_dim.max(1) as f64).sqrt();
        let w = Array2::from_shape_fn((input_dim, output_dim), |_| {
            T::of(rng.random_range(-bound..bound))
        });
        Self {
            w: Param::from_matrix(w),
            b: Param::from_vec(vec![T::zero(); output_dim]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.value.shape()[0]
    }

    pub fn output_dim(&self) -> usize {
        self.w.value.shape()[1]
    }

    pub fn forward(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "linear: input width {} but layer expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        Ok(x.dot(&self.w.mat()) + self.b.vec())
    }

    pub fn backward(&mut self, x: ArrayView2<'_, T>, grad_out: &Array2<T>) -> Array2<T> {
        general_mat_mul(
            T::one(),
            &x.t(),
            grad_out,
            T::one(),
            &mut self.w.grad_mat_mut(),
        );
        self.b
            .grad_vec_mut()
            .scaled_add(T::one(), &grad_out.sum_axis(Axis(0)));
        grad_out.dot(&self.w.mat().t())
    }
}

impl<T: Real> Visit<T> for Linear<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, SlotRef<'_, T>)) {
        f(&join(prefix, "w"), SlotRef::Param(&self.w));
        f(&join(prefix, "b"), SlotRef::Param(&self.b));
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_, T>)) {
        f(&join(prefix, "w"), Slot::Param(&mut self.w));
        f(&join(prefix, "b"), Slot::Param(&mut self.b));
    }
}
