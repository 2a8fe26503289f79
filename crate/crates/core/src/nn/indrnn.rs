use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{join, HarRng, Param, Real, SeqBatch, Slot, SlotRef, Visit};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Relu => x.max(T::zero()),
            Activation::Identity => x,
        }
    }

    #[inline]
    fn derivative<T: Real>(self, pre: T) -> T {
        match self {
            Activation::Relu => {
                if pre > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Identity => T::one(),
        }
    }
}

/// `max_memory^(1/steps)`: keeps the product of recurrent gains over a full
/// sequence below `max_memory`.
pub fn default_recurrent_clip(max_memory: f64, steps: usize) -> f64 {
    max_memory.powf(1.0 / steps as f64)
}

/// `h_t = σ(W·x_t + u ⊙ h_{t−1} + b)`.
///
/// `w` is stored input-major (`M × N`) so a sequence batch is projected with
/// one `X·W` product.
#[derive(Clone, Debug, PartialEq)]
pub struct IndRnnLayer<T> {
    pub w: Param<T>,
    pub u: Param<T>,
    pub b: Param<T>,
    pub activation: Activation,
    pub recurrent_clip: T,
}

#[derive(Clone, Debug)]
pub struct IndRnnCache<T> {
    input: Array2<T>,
    pre: Array2<T>,
    out: Array2<T>,
    h0: Option<Array2<T>>,
    steps: usize,
    batch: usize,
}

#[derive(Clone, Debug)]
pub struct IndRnnGrads<T> {
    pub input: SeqBatch<T>,
    pub h0: Array2<T>,
}

impl<T: Real> IndRnnLayer<T> {
    /// Input weights uniform in ±1/√fan_in, recurrent weights uniform in
    /// (0, clip), zero bias.
    pub fn new(
        input_dim: usize,
        hidden: usize,
        activation: Activation,
        recurrent_clip: f64,
        rng: &mut HarRng,
    ) -> Self {
        let bound = 1.0 / (input_dim.max(1) as f64).sqrt();
        let w = Array2::from_shape_fn((input_dim, hidden), |_| {
            T::of(rng.random_range(-bound..bound))
        });
        let u: Vec<T> = (0..hidden)
            .map(|_| T::of(rng.random::<f64>() * recurrent_clip))
            .collect();
        Self {
            w: Param::from_matrix(w),
            u: Param::from_vec(u),
            b: Param::from_vec(vec![T::zero(); hidden]),
            activation,
            recurrent_clip: T::of(recurrent_clip),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.value.shape()[0]
    }

    pub fn hidden(&self) -> usize {
        self.w.value.shape()[1]
    }

    pub fn forward(&self, x: &SeqBatch<T>) -> Result<(SeqBatch<T>, IndRnnCache<T>)> {
        self.forward_with_state(x, None)
    }

    /// Runs the recurrence from an explicit initial state (zeros if `None`).
    pub fn forward_with_state(
        &self,
        x: &SeqBatch<T>,
        h0: Option<&Array2<T>>,
    ) -> Result<(SeqBatch<T>, IndRnnCache<T>)> {
        x.check_width(self.input_dim(), "indrnn")?;
        let (steps, batch, n) = (x.steps, x.batch, self.hidden());
        if let Some(h0) = h0 {
            if h0.dim() != (batch, n) {
                return Err(Error::ShapeMismatch(format!(
                    "h0 is {:?}, expected ({batch}, {n})",
                    h0.dim()
                )));
            }
        }
        let mut pre = x.data.dot(&self.w.mat());
        pre += &self.b.vec();
        let u = self.u.vec();
        let mut out = Array2::zeros(pre.raw_dim());
        for t in 0..steps {
            for b in 0..batch {
                let row = t * batch + b;
                for j in 0..n {
                    let prev = if t > 0 {
                        out[[row - batch, j]]
                    } else {
                        h0.map_or(T::zero(), |h| h[[b, j]])
                    };
                    let p = pre[[row, j]] + u[j] * prev;
                    pre[[row, j]] = p;
                    out[[row, j]] = self.activation.apply(p);
                }
            }
        }
        let cache = IndRnnCache {
            input: x.data.clone(),
            pre,
            out: out.clone(),
            h0: h0.cloned(),
            steps,
            batch,
        };
        Ok((
            SeqBatch {
                data: out,
                steps,
                batch,
            },
            cache,
        ))
    }

    /// Inference without caching.
    pub fn infer(&self, x: &SeqBatch<T>) -> Result<SeqBatch<T>> {
        x.check_width(self.input_dim(), "indrnn")?;
        let (steps, batch, n) = (x.steps, x.batch, self.hidden());
        let mut h = x.data.dot(&self.w.mat());
        h += &self.b.vec();
        let u = self.u.vec();
        for t in 0..steps {
            for b in 0..batch {
                let row = t * batch + b;
                for j in 0..n {
                    let prev = if t > 0 {
                        h[[row - batch, j]]
                    } else {
                        T::zero()
                    };
                    h[[row, j]] = self.activation.apply(h[[row, j]] + u[j] * prev);
                }
            }
        }
        Ok(SeqBatch {
            data: h,
            steps,
            batch,
        })
    }

    /// Accumulates parameter gradients and returns the gradients with respect
    /// to the input sequence and the initial state.
    pub fn backward(
        &mut self,
        cache: &IndRnnCache<T>,
        grad_out: &SeqBatch<T>,
    ) -> Result<IndRnnGrads<T>> {
        let (steps, batch, n) = (cache.steps, cache.batch, self.hidden());
        if grad_out.data.dim() != cache.out.dim() || grad_out.steps != steps {
            return Err(Error::ShapeMismatch(format!(
                "indrnn grad {:?} vs output {:?}",
                grad_out.data.dim(),
                cache.out.dim()
            )));
        }
        let u = self.u.vec().to_owned();
        let mut carry = Array2::<T>::zeros((batch, n));
        let mut dpre = Array2::<T>::zeros((steps * batch, n));
        let mut du = Array1::<T>::zeros(n);
        for t in (0..steps).rev() {
            for b in 0..batch {
                let row = t * batch + b;
                for j in 0..n {
                    let g = grad_out.data[[row, j]] + carry[[b, j]];
                    let d = g * self.activation.derivative(cache.pre[[row, j]]);
                    dpre[[row, j]] = d;
                    let prev = if t > 0 {
                        cache.out[[row - batch, j]]
                    } else {
                        cache.h0.as_ref().map_or(T::zero(), |h| h[[b, j]])
                    };
                    du[j] += d * prev;
                    carry[[b, j]] = d * u[j];
                }
            }
        }
        general_mat_mul(
            T::one(),
            &cache.input.t(),
            &dpre,
            T::one(),
            &mut self.w.grad_mat_mut(),
        );
        self.u.grad_vec_mut().scaled_add(T::one(), &du);
        self.b
            .grad_vec_mut()
            .scaled_add(T::one(), &dpre.sum_axis(Axis(0)));
        let dx = dpre.dot(&self.w.mat().t());
        Ok(IndRnnGrads {
            input: SeqBatch {
                data: dx,
                steps,
                batch,
            },
            h0: carry,
        })
    }

    /// Clamps every recurrent weight into `[-clip, clip]`.
    pub fn clip_recurrent(&mut self) {
        let c = self.recurrent_clip;
        self.u.vec_mut().mapv_inplace(|v| v.max(-c).min(c));
    }
}

impl<T: Real> Visit<T> for IndRnnLayer<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, SlotRef<'_, T>)) {
        f(&join(prefix, "w"), SlotRef::Param(&self.w));
        f(&join(prefix, "u"), SlotRef::Param(&self.u));
        f(&join(prefix, "b"), SlotRef::Param(&self.b));
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_, T>)) {
        f(&join(prefix, "w"), Slot::Param(&mut self.w));
        f(&join(prefix, "u"), Slot::Param(&mut self.u));
        f(&join(prefix, "b"), Slot::Param(&mut self.b));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn layer(m: usize, n: usize, act: Activation) -> IndRnnLayer<f64> {
        let mut rng = HarRng::seed_from_u64(7);
        IndRnnLayer::new(m, n, act, default_recurrent_clip(2.0, 21), &mut rng)
    }

    fn random_seq(steps: usize, batch: usize, width: usize, seed: u64) -> SeqBatch<f64> {
        let mut rng = HarRng::seed_from_u64(seed);
        let data = Array2::from_shape_fn((steps * batch, width), |_| rng.random_range(-1.0..1.0));
        SeqBatch { data, steps, batch }
    }

    #[test]
    fn zero_recurrence_is_feed_forward() {
        let mut l = layer(4, 3, Activation::Identity);
        l.u.value.fill(0.0);
        let x = random_seq(5, 2, 4, 1);
        let (h, _) = l.forward(&x).unwrap();
        let expect = x.data.dot(&l.w.mat());
        for (a, b) in h.data.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn no_leakage_across_time_without_recurrence() {
        let mut l = layer(4, 3, Activation::Identity);
        l.u.value.fill(0.0);
        let x = random_seq(6, 2, 4, 2);
        let (h, _) = l.forward(&x).unwrap();
        let mut x2 = x.clone();
        x2.data.row_mut(2 * 2 + 1).fill(5.0); // step 2, sample 1
        let (h2, _) = l.forward(&x2).unwrap();
        for t in 0..6 {
            for b in 0..2 {
                let same = h.row(t, b) == h2.row(t, b);
                assert_eq!(same, !(t == 2 && b == 1), "t={t} b={b}");
            }
        }
    }

    fn scalar_decay() -> (IndRnnLayer<f64>, SeqBatch<f64>, Array2<f64>) {
        let mut l = layer(1, 1, Activation::Identity);
        l.w.value.fill(0.0);
        l.u.value.fill(0.5);
        let x = SeqBatch::zeros(3, 1, 1);
        (l, x, Array2::from_elem((1, 1), 1.0))
    }

    #[test]
    fn hand_unrolled_recurrence() {
        let (l, x, h0) = scalar_decay();
        let (h, _) = l.forward_with_state(&x, Some(&h0)).unwrap();
        assert_eq!(h.data.column(0).to_vec(), vec![0.5, 0.25, 0.125]);
    }

    #[test]
    fn hand_unrolled_recurrent_gradient() {
        // L = h1 + h2 + h3 = u + u² + u³ (h0 = 1) ⇒ dL/du = 1 + 2u + 3u² = 2.75 at u = 0.5
        let (mut l, x, h0) = scalar_decay();
        let (h, cache) = l.forward_with_state(&x, Some(&h0)).unwrap();
        let ones = SeqBatch {
            data: Array2::ones(h.data.raw_dim()),
            steps: 3,
            batch: 1,
        };
        let g = l.backward(&cache, &ones).unwrap();
        assert!((l.u.grad[[0]] - 2.75).abs() < 1e-12);
        // dL/dh0 = u + u² + u³ = 0.875
        assert!((g.h0[[0, 0]] - 0.875).abs() < 1e-12);
    }

    #[test]
    fn relu_with_negative_preactivations_is_zero() {
        let mut l = layer(2, 3, Activation::Relu);
        l.w.value.fill(-1.0);
        l.b.value.fill(-0.5);
        let x = SeqBatch {
            data: Array2::ones((4 * 2, 2)),
            steps: 4,
            batch: 2,
        };
        let (h, _) = l.forward(&x).unwrap();
        assert!(h.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_param_gradients() {
        let mut l = layer(3, 4, Activation::Relu);
        let x = random_seq(21, 2, 3, 3);
        let (h, cache) = l.forward(&x).unwrap();
        let zero = SeqBatch {
            data: Array2::zeros(h.data.raw_dim()),
            steps: 21,
            batch: 2,
        };
        l.backward(&cache, &zero).unwrap();
        assert!(l
            .w
            .grad
            .iter()
            .chain(l.u.grad.iter())
            .chain(l.b.grad.iter())
            .all(|&g| g == 0.0));
    }

    #[test]
    fn infer_matches_forward() {
        let l = layer(5, 4, Activation::Relu);
        let x = random_seq(21, 3, 5, 4);
        assert_eq!(l.forward(&x).unwrap().0, l.infer(&x).unwrap());
    }

    #[test]
    fn clipping() {
        let mut l = layer(1, 3, Activation::Relu);
        l.recurrent_clip = 2.0;
        l.u = Param::from_vec(vec![3.0, -5.0, 1.0]);
        l.clip_recurrent();
        assert_eq!(l.u.vec().to_vec(), vec![2.0, -2.0, 1.0]);
        let once = l.clone();
        l.clip_recurrent();
        assert_eq!(l, once);

        l.u = Param::from_vec(vec![0.5, -1.5, 1.99]);
        l.clip_recurrent();
        assert_eq!(l.u.vec().to_vec(), vec![0.5, -1.5, 1.99]);
    }

    #[test]
    fn default_clip_for_21_steps() {
        let c = default_recurrent_clip(2.0, 21);
        assert!((c - 2f64.powf(1.0 / 21.0)).abs() < 1e-15);
        assert!((c - 1.0336).abs() < 1e-4);
    }

    #[test]
    fn initial_recurrent_weights_within_clip() {
        let l = layer(8, 64, Activation::Relu);
        assert!(l.u.value.iter().all(|&u| u > 0.0 && u < l.recurrent_clip));
    }

    #[test]
    fn shape_errors() {
        let l = layer(3, 2, Activation::Relu);
        assert!(matches!(
            l.forward(&random_seq(2, 2, 4, 0)),
            Err(Error::ShapeMismatch(_))
        ));
        let bad_h0 = Array2::zeros((3, 2));
        assert!(l
            .forward_with_state(&random_seq(2, 2, 3, 0), Some(&bad_h0))
            .is_err());
    }
}
