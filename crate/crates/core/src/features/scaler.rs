use super::extract::FeatureSequence;
use crate::error::{Error, Result};

/// Per-feature z-scoring fitted on a training set; pooled over samples and
/// steps.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureScaler {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

impl FeatureScaler {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn fit(samples: &[FeatureSequence]) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::EmptyDataset("scaler fit".into()))?;
        let dim = first.dim;
        let mut sum = vec![0f64; dim];
        let mut sq = vec![0f64; dim];
        let mut n = 0usize;
        for s in samples {
            if s.dim != dim {
                return Err(Error::ShapeMismatch(format!(
                    "feature dim {} differs from {dim}",
                    s.dim
                )));
            }
            for row in s.values.chunks_exact(dim) {
                for (j, &v) in row.iter().enumerate() {
                    sum[j] += v as f64;
                }
                n += 1;
            }
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        for s in samples {
            for row in s.values.chunks_exact(dim) {
                for (j, &v) in row.iter().enumerate() {
                    let d = v as f64 - mean[j];
                    sq[j] += d * d;
                }
            }
        }
        let std = sq
            .iter()
            .map(|q| {
                let s = (q / n as f64).sqrt();
                // constant features pass through centred
                if s < 1e-8 {
                    1.0
                } else {
                    s as f32
                }
            })
            .collect();
        Ok(Self {
            mean: mean.into_iter().map(|m| m as f32).collect(),
            std,
        })
    }

    pub fn apply(&self, seq: &FeatureSequence) -> Result<FeatureSequence> {
        if seq.dim != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "features have dim {}, scaler expects {}",
                seq.dim,
                self.dim()
            )));
        }
        let mut out = seq.clone();
        for row in out.values.chunks_exact_mut(seq.dim) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }
}
