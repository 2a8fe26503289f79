use ndarray::{Array1, Array2, ArrayD, Axis, IxDyn};

use super::{join, Param, Real, SeqBatch, Slot, SlotRef, Visit};
use crate::error::{Error, Result};

/// Per-feature batch normalization with statistics pooled over batch and
/// time. Running statistics use the biased (1/n) variance.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm<T> {
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub running_mean: ArrayD<T>,
    pub running_var: ArrayD<T>,
    pub momentum: T,
    pub eps: T,
}

#[derive(Clone, Debug)]
pub struct BatchNormCache<T> {
    xhat: Array2<T>,
    inv_std: Array1<T>,
}

impl<T: Real> BatchNorm<T> {
    pub fn new(width: usize, momentum: f64, eps: f64) -> Self {
        Self {
            gamma: Param::from_vec(vec![T::one(); width]),
            beta: Param::from_vec(vec![T::zero(); width]),
            running_mean: ArrayD::zeros(IxDyn(&[width])),
            running_var: ArrayD::ones(IxDyn(&[width])),
            momentum: T::of(momentum),
            eps: T::of(eps),
        }
    }

    pub fn width(&self) -> usize {
        self.gamma.value.len()
    }

    /// Train mode: normalize with the batch statistics and fold them into the
    /// running estimates.
    pub fn forward_train(&mut self, x: &SeqBatch<T>) -> Result<(SeqBatch<T>, BatchNormCache<T>)> {
        x.check_width(self.width(), "batchnorm")?;
        let rows = x.data.nrows();
        if rows < 2 {
            return Err(Error::DegenerateBatch { rows });
        }
        let n = T::of(rows as f64);
        let mean = x.data.sum_axis(Axis(0)) / n;
        let centred = &x.data - &mean;
        let var = centred.mapv(|v| v * v).sum_axis(Axis(0)) / n;
        let inv_std = var.mapv(|v| T::one() / (v + self.eps).sqrt());
        let xhat = centred * &inv_std;
        let y = &xhat * &self.gamma.vec() + self.beta.vec();

        let m = self.momentum;
        let keep = T::one() - m;
        self.running_mean
            .zip_mut_with(&mean, |r, &b| *r = keep * *r + m * b);
        self.running_var
            .zip_mut_with(&var, |r, &b| *r = keep * *r + m * b);

        Ok((
            SeqBatch {
                data: y,
                steps: x.steps,
                batch: x.batch,
            },
            BatchNormCache { xhat, inv_std },
        ))
    }

    pub fn infer(&self, x: &SeqBatch<T>) -> Result<SeqBatch<T>> {
        x.check_width(self.width(), "batchnorm")?;
        let eps = self.eps;
        let scale: Array1<T> = self
            .running_var
            .iter()
            .zip(self.gamma.vec())
            .map(|(&v, &g)| g / (v + eps).sqrt())
            .collect();
        let shift: Array1<T> = self
            .running_mean
            .iter()
            .zip(&scale)
            .zip(self.beta.vec())
            .map(|((&m, &s), &b)| b - m * s)
            .collect();
        let y = &x.data * &scale + &shift;
        Ok(SeqBatch {
            data: y,
            steps: x.steps,
            batch: x.batch,
        })
    }

    pub fn backward(&mut self, cache: &BatchNormCache<T>, dy: &SeqBatch<T>) -> Result<SeqBatch<T>> {
        if dy.data.dim() != cache.xhat.dim() {
            return Err(Error::ShapeMismatch(format!(
                "batchnorm grad {:?} vs {:?}",
                dy.data.dim(),
                cache.xhat.dim()
            )));
        }
        let n = T::of(dy.data.nrows() as f64);
        let dbeta = dy.data.sum_axis(Axis(0));
        let dgamma = (&dy.data * &cache.xhat).sum_axis(Axis(0));
        self.gamma.grad_vec_mut().scaled_add(T::one(), &dgamma);
        self.beta.grad_vec_mut().scaled_add(T::one(), &dbeta);

        // dx = γ·σ⁻¹/n · (n·dy − Σdy − x̂·Σ(dy·x̂))
        let coef = &self.gamma.vec() * &cache.inv_std / n;
        let mut dx = &dy.data * n - &dbeta;
        dx -= &(&cache.xhat * &dgamma);
        dx *= &coef;
        Ok(SeqBatch {
            data: dx,
            steps: dy.steps,
            batch: dy.batch,
        })
    }
}

impl<T: Real> Visit<T> for BatchNorm<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, SlotRef<'_, T>)) {
        f(&join(prefix, "gamma"), SlotRef::Param(&self.gamma));
        f(&join(prefix, "beta"), SlotRef::Param(&self.beta));
        f(
            &join(prefix, "running_mean"),
            SlotRef::Buffer(&self.running_mean),
        );
        f(
            &join(prefix, "running_var"),
            SlotRef::Buffer(&self.running_var),
        );
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_, T>)) {
        f(&join(prefix, "gamma"), Slot::Param(&mut self.gamma));
        f(&join(prefix, "beta"), Slot::Param(&mut self.beta));
        f(
            &join(prefix, "running_mean"),
            Slot::Buffer(&mut self.running_mean),
        );
        f(
            &join(prefix, "running_var"),
            Slot::Buffer(&mut self.running_var),
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::HarRng;
    use rand::{Rng, SeedableRng};

    fn random_seq(steps: usize, batch: usize, width: usize, seed: u64) -> SeqBatch<f64> {
        let mut rng = HarRng::seed_from_u64(seed);
        let data = Array2::from_shape_fn((steps * batch, width), |(_, j)| {
            rng.random_range(-1.0..1.0) * (j + 1) as f64 + 3.0
        });
        SeqBatch { data, steps, batch }
    }

    #[test]
    fn train_output_is_standardized() {
        let mut bn = BatchNorm::<f64>::new(5, 0.1, 1e-5);
        let (y, _) = bn.forward_train(&random_seq(21, 4, 5, 1)).unwrap();
        let n = y.data.nrows() as f64;
        for col in y.data.columns() {
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-5);
            assert!((var - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn eval_with_batch_stats_matches_train() {
        let x = random_seq(21, 3, 4, 2);
        let mut bn = BatchNorm::<f64>::new(4, 1.0, 1e-5);
        // momentum 1 copies batch statistics into the running estimates
        let (train, _) = bn.forward_train(&x).unwrap();
        let eval = bn.infer(&x).unwrap();
        for (a, b) in train.data.iter().zip(eval.data.iter()) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn running_stats_follow_momentum() {
        let x = random_seq(10, 2, 3, 3);
        let mut bn = BatchNorm::<f64>::new(3, 0.1, 1e-5);
        bn.forward_train(&x).unwrap();
        let mean = x.data.mean_axis(Axis(0)).unwrap();
        for (r, m) in bn.running_mean.iter().zip(mean.iter()) {
            assert!((r - 0.1 * m).abs() < 1e-12);
        }
        assert!(bn.running_var.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn degenerate_batch() {
        let mut bn = BatchNorm::<f64>::new(3, 0.1, 1e-5);
        let x = SeqBatch::zeros(1, 1, 3);
        assert!(matches!(
            bn.forward_train(&x),
            Err(Error::DegenerateBatch { rows: 1 })
        ));
        assert!(bn.infer(&x).is_ok());
    }
}
