//! Human activity recognition from smartphone motion sensors with deep
//! independently recurrent networks.
//!
//! The crate covers the whole chain: quaternion derotation of raw sensor
//! frames ([`sensor`]), windowed time/frequency features ([`features`]), an
//! IndRNN stack with manual backpropagation ([`nn`]), and the training,
//! evaluation, location grouping and transfer workflows ([`pipeline`]).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod codec;
pub mod error;
pub mod features;
pub mod nn;
pub mod pipeline;
pub mod sensor;

pub use error::{Error, Result};
