use ndarray::Array2;
use rand::Rng;

use super::{Ctx, Real, SeqBatch};

/// Inverted dropout. With `per_step` a fresh mask is drawn for every time
/// step; otherwise one mask per (sample, feature) is shared across time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dropout {
    pub rate: f64,
    pub per_step: bool,
}

impl Dropout {
    pub fn new(rate: f64, per_step: bool) -> Self {
        Self { rate, per_step }
    }

    pub fn none() -> Self {
        Self {
            rate: 0.0,
            per_step: false,
        }
    }

    /// Returns the (possibly masked) batch and the mask applied, if any.
    pub fn forward<T: Real>(
        &self,
        x: SeqBatch<T>,
        ctx: &mut Ctx<'_>,
    ) -> (SeqBatch<T>, Option<Array2<T>>) {
        let rng = match (&mut ctx.rng, ctx.train && self.rate > 0.0) {
            (Some(rng), true) => rng,
            _ => return (x, None),
        };
        let keep = 1.0 - self.rate;
        let scale = T::of(1.0 / keep);
        let mut draw = || {
            if rng.random::<f64>() < keep {
                scale
            } else {
                T::zero()
            }
        };
        let (steps, batch, width) = (x.steps, x.batch, x.width());
        let mask = if self.per_step {
            Array2::from_shape_fn((steps * batch, width), |_| draw())
        } else {
            let shared = Array2::from_shape_fn((batch, width), |_| draw());
            Array2::from_shape_fn((steps * batch, width), |(r, c)| shared[[r % batch, c]])
        };
        let mut x = x;
        x.data *= &mask;
        (x, Some(mask))
    }

    pub fn backward<T: Real>(mask: Option<&Array2<T>>, grad: SeqBatch<T>) -> SeqBatch<T> {
        match mask {
            Some(m) => {
                let mut g = grad;
                g.data *= m;
                g
            }
            None => grad,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::HarRng;
    use rand::SeedableRng;

    #[test]
    fn eval_is_identity() {
        let x = SeqBatch::<f32> {
            data: Array2::ones((6, 4)),
            steps: 3,
            batch: 2,
        };
        let (y, mask) = Dropout::new(0.5, true).forward(x.clone(), &mut Ctx::eval());
        assert_eq!(y, x);
        assert!(mask.is_none());
    }

    #[test]
    fn shared_mask_is_constant_over_time() {
        let mut rng = HarRng::seed_from_u64(3);
        let x = SeqBatch::<f64> {
            data: Array2::ones((21 * 3, 8)),
            steps: 21,
            batch: 3,
        };
        let (y, _) = Dropout::new(0.5, false).forward(x, &mut Ctx::train(&mut rng));
        for t in 1..21 {
            assert_eq!(y.step(t), y.step(0));
        }
        assert!(y.data.iter().all(|&v| v == 0.0 || v == 2.0));
    }

    #[test]
    fn keeps_expected_fraction() {
        let mut rng = HarRng::seed_from_u64(9);
        let x = SeqBatch::<f64> {
            data: Array2::ones((100 * 10, 10)),
            steps: 100,
            batch: 10,
        };
        let (y, _) = Dropout::new(0.3, true).forward(x, &mut Ctx::train(&mut rng));
        let mean = y.data.mean().unwrap();
        assert!((mean - 1.0).abs() < 0.05, "{mean}");
    }
}
