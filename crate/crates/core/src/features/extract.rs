use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spectrum::SpectrumAnalyzer;
use super::stats::{fft_stats, normalize_pressure, time_stats, TIME_STATS_LEN};
use super::window::WindowSpec;
use crate::error::{Error, Result};
use crate::sensor::{Activity, DerotatedSample, Location, N_CHANNELS};

const PRESSURE_CHANNEL: usize = N_CHANNELS - 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub include_time_stats: bool,
    pub include_fft_spectrum: bool,
    pub include_fft_stats: bool,
    /// Append the step-wise first difference of every feature.
    pub augment_temporal_diff: bool,
    /// Floor on the pressure std during per-sample normalization.
    pub pressure_epsilon: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            include_time_stats: true,
            include_fft_spectrum: true,
            include_fft_stats: true,
            augment_temporal_diff: false,
            pressure_epsilon: 1e-6,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.include_time_stats || self.include_fft_spectrum || self.include_fft_stats) {
            return Err(Error::BadConfig("no feature family enabled".into()));
        }
        if !(self.pressure_epsilon > 0.0) {
            return Err(Error::BadConfig("pressure_epsilon must be positive".into()));
        }
        Ok(())
    }

    /// Features per channel per window.
    pub fn per_channel(&self, window_len: usize) -> usize {
        let mut n = 0;
        if self.include_time_stats {
            n += TIME_STATS_LEN;
        }
        if self.include_fft_spectrum {
            n += window_len / 2;
        }
        if self.include_fft_stats {
            n += 2;
        }
        n
    }

    /// Width of one feature step.
    pub fn feature_dim(&self, spec: &WindowSpec) -> usize {
        let base = N_CHANNELS * self.per_channel(spec.window_len);
        if self.augment_temporal_diff {
            2 * base
        } else {
            base
        }
    }
}

/// `steps × dim` features of one sample, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSequence {
    pub steps: usize,
    pub dim: usize,
    pub values: Vec<f32>,
    pub activity: Activity,
    pub location: Option<Location>,
    pub user: Option<u8>,
}

impl FeatureSequence {
    pub fn step(&self, t: usize) -> &[f32] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }
}

pub fn extract_features(
    sample: &DerotatedSample,
    spec: &WindowSpec,
    cfg: &FeatureConfig,
) -> Result<FeatureSequence> {
    let analyzer = SpectrumAnalyzer::new(spec.window_len);
    extract_with(&analyzer, sample, spec, cfg)
}

/// Featurizes many samples in parallel; output order matches input order.
pub fn extract_all(
    samples: &[DerotatedSample],
    spec: &WindowSpec,
    cfg: &FeatureConfig,
) -> Result<Vec<FeatureSequence>> {
    spec.validate()?;
    cfg.validate()?;
    let analyzer = SpectrumAnalyzer::new(spec.window_len);
    samples
        .par_iter()
        .map(|s| extract_with(&analyzer, s, spec, cfg))
        .collect()
}

fn extract_with(
    analyzer: &SpectrumAnalyzer,
    sample: &DerotatedSample,
    spec: &WindowSpec,
    cfg: &FeatureConfig,
) -> Result<FeatureSequence> {
    cfg.validate()?;
    spec.check(sample.frames.len())?;
    let base_dim = N_CHANNELS * cfg.per_channel(spec.window_len);
    let dim = cfg.feature_dim(spec);
    let steps = spec.n_windows;

    let channels: Vec<Vec<f64>> = (0..N_CHANNELS)
        .map(|c| {
            let raw = sample.channel(c);
            if c == PRESSURE_CHANNEL {
                normalize_pressure(&raw, cfg.pressure_epsilon)
            } else {
                raw
            }
        })
        .collect();

    let mut values = vec![0f32; steps * dim];
    for (t, range) in spec.ranges().enumerate() {
        let row = &mut values[t * dim..t * dim + base_dim];
        let mut k = 0;
        for channel in &channels {
            let window = &channel[range.clone()];
            let mut push = |v: f64| {
                row[k] = v as f32;
                k += 1;
            };
            if cfg.include_time_stats {
                time_stats(window).into_iter().for_each(&mut push);
            }
            if cfg.include_fft_spectrum || cfg.include_fft_stats {
                let spectrum = analyzer.amplitude(window);
                if cfg.include_fft_spectrum {
                    spectrum.iter().copied().for_each(&mut push);
                }
                if cfg.include_fft_stats {
                    fft_stats(&spectrum).into_iter().for_each(&mut push);
                }
            }
        }
        debug_assert_eq!(k, base_dim);
    }

    if cfg.augment_temporal_diff {
        for t in 1..steps {
            for j in 0..base_dim {
                values[t * dim + base_dim + j] = values[t * dim + j] - values[(t - 1) * dim + j];
            }
        }
    }

    Ok(FeatureSequence {
        steps,
        dim,
        values,
        activity: sample.activity,
        location: sample.location,
        user: sample.user,
    })
}
