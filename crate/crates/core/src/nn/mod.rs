//! From-scratch IndRNN stack with manual backpropagation.
//!
//! Sequence batches are stored as a 2-D matrix whose rows are ordered
//! time-major: row `t * batch + b` holds step `t` of sample `b`. Every layer
//! maps such a matrix to another one with the same row layout, so the input
//! projection of a whole sequence is a single matrix product.

mod batchnorm;
mod blocks;
mod checkpoint;
mod dropout;
mod indrnn;
mod linear;
mod loss;
mod network;
mod optim;

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use ndarray::{
    Array2, ArrayD, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Ix1, Ix2, IxDyn,
    LinalgScalar, ScalarOperand,
};
use num_traits::{Float, FromPrimitive, ToPrimitive};

pub use batchnorm::{BatchNorm, BatchNormCache};
pub use blocks::{
    DenseBlock, DenseLayer, DenseLayerCache, ResidualUnit, RnnUnit, UnitCache, UnitSpec,
};
pub use checkpoint::{
    load_checkpoint, load_checkpoint_expecting, save_checkpoint, Checkpoint, CheckpointMeta,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use dropout::Dropout;
pub use indrnn::{default_recurrent_clip, Activation, IndRnnCache, IndRnnGrads, IndRnnLayer};
pub use linear::Linear;
pub use loss::{cross_entropy, softmax, PROB_FLOOR};
pub use network::{Architecture, Body, DropoutConfig, ForwardCache, Network, NetworkConfig};
pub use optim::{LrSchedule, OptimizerState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};

/// Seeded RNG used for initialization, dropout and shuffling.
pub type HarRng = rand_chacha::ChaCha8Rng;

/// Floating-point element type of the network (`f32` for training, `f64` for
/// gradient checks).
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + LinalgScalar
    + ScalarOperand
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + 'static
{
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// A `steps × batch` sequence batch of `width`-wide rows.
#[derive(Clone, Debug, PartialEq)]
pub struct SeqBatch<T> {
    pub data: Array2<T>,
    pub steps: usize,
    pub batch: usize,
}

impl<T: Real> SeqBatch<T> {
    pub fn new(data: Array2<T>, steps: usize, batch: usize) -> crate::Result<Self> {
        if data.nrows() != steps * batch {
            return Err(crate::Error::ShapeMismatch(format!(
                "{} rows for {steps} steps × {batch} batch",
                data.nrows()
            )));
        }
        Ok(Self { data, steps, batch })
    }

    pub fn zeros(steps: usize, batch: usize, width: usize) -> Self {
        Self {
            data: Array2::zeros((steps * batch, width)),
            steps,
            batch,
        }
    }

    pub fn width(&self) -> usize {
        self.data.ncols()
    }

    pub fn row(&self, t: usize, b: usize) -> ArrayView1<'_, T> {
        self.data.row(t * self.batch + b)
    }

    /// Rows belonging to step `t`.
    pub fn step(&self, t: usize) -> ArrayView2<'_, T> {
        self.data
            .slice(ndarray::s![t * self.batch..(t + 1) * self.batch, ..])
    }

    pub fn last_step(&self) -> ArrayView2<'_, T> {
        self.step(self.steps - 1)
    }

    /// Builds a batch from per-sample `steps × width` row-major buffers.
    pub fn from_samples<'a, I>(samples: I, steps: usize, width: usize) -> crate::Result<Self>
    where
        I: IntoIterator<Item = &'a [f32]>,
    {
        let samples: Vec<&[f32]> = samples.into_iter().collect();
        let batch = samples.len();
        let mut data = Array2::zeros((steps * batch, width));
        for (b, s) in samples.iter().enumerate() {
            if s.len() != steps * width {
                return Err(crate::Error::ShapeMismatch(format!(
                    "sample {b} has {} values, expected {}",
                    s.len(),
                    steps * width
                )));
            }
            for t in 0..steps {
                let src = &s[t * width..(t + 1) * width];
                for (dst, &v) in data.row_mut(t * batch + b).iter_mut().zip(src) {
                    *dst = T::of(v as f64);
                }
            }
        }
        Ok(Self { data, steps, batch })
    }

    pub(crate) fn check_width(&self, width: usize, what: &str) -> crate::Result<()> {
        if self.width() != width {
            return Err(crate::Error::ShapeMismatch(format!(
                "{what}: input width {} but layer expects {width}",
                self.width()
            )));
        }
        Ok(())
    }
}

/// Trainable tensor plus its accumulated gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    pub value: ArrayD<T>,
    pub grad: ArrayD<T>,
}

impl<T: Real> Param<T> {
    pub fn new(value: ArrayD<T>) -> Self {
        let grad = ArrayD::zeros(value.raw_dim());
        Self { value, grad }
    }

    pub fn from_matrix(m: Array2<T>) -> Self {
        Self::new(m.into_dyn())
    }

    pub fn from_vec(v: Vec<T>) -> Self {
        Self::new(ArrayD::from_shape_vec(IxDyn(&[v.len()]), v).expect("1-d shape"))
    }

    pub fn mat(&self) -> ArrayView2<'_, T> {
        self.value
            .view()
            .into_dimensionality::<Ix2>()
            .expect("2-d parameter")
    }

    pub fn vec(&self) -> ArrayView1<'_, T> {
        self.value
            .view()
            .into_dimensionality::<Ix1>()
            .expect("1-d parameter")
    }

    pub fn vec_mut(&mut self) -> ArrayViewMut1<'_, T> {
        self.value
            .view_mut()
            .into_dimensionality::<Ix1>()
            .expect("1-d parameter")
    }

    pub fn grad_mat_mut(&mut self) -> ArrayViewMut2<'_, T> {
        self.grad
            .view_mut()
            .into_dimensionality::<Ix2>()
            .expect("2-d parameter")
    }

    pub fn grad_vec_mut(&mut self) -> ArrayViewMut1<'_, T> {
        self.grad
            .view_mut()
            .into_dimensionality::<Ix1>()
            .expect("1-d parameter")
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }
}

/// A named piece of network state, as seen by visitors.
pub enum Slot<'a, T> {
    Param(&'a mut Param<T>),
    /// Non-trainable state such as batch-norm running statistics.
    Buffer(&'a mut ArrayD<T>),
}

pub enum SlotRef<'a, T> {
    Param(&'a Param<T>),
    Buffer(&'a ArrayD<T>),
}

/// Walk over named parameters and buffers in a fixed order.
pub trait Visit<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, SlotRef<'_, T>));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_, T>));
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// Forward-pass context shared by all layers.
pub struct Ctx<'a> {
    /// Batch statistics in batch norm; dropout if an RNG is present.
    pub train: bool,
    pub rng: Option<&'a mut HarRng>,
}

impl<'a> Ctx<'a> {
    pub fn eval() -> Self {
        Self {
            train: false,
            rng: None,
        }
    }

    /// Training mode without dropout (deterministic, used by gradient checks).
    pub fn train_no_dropout() -> Self {
        Self {
            train: true,
            rng: None,
        }
    }

    pub fn train(rng: &'a mut HarRng) -> Self {
        Self {
            train: true,
            rng: Some(rng),
        }
    }
}
