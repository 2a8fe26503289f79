//! Short-term window features: time-domain statistics, FFT amplitude spectra
//! and spectrum statistics, computed per channel over overlapping 1 s
//! windows and stacked into a 21-step sequence.

mod cache;
mod extract;
mod scaler;
mod spectrum;
mod stats;
mod window;

pub use cache::{read_feature_file, write_feature_file, FEATURE_FILE_MAGIC, FEATURE_FILE_VERSION};
pub use extract::{extract_all, extract_features, FeatureConfig, FeatureSequence};
pub use scaler::FeatureScaler;
pub use spectrum::{fft_amplitude, SpectrumAnalyzer};
pub use stats::{fft_stats, mean_std, normalize_pressure, time_stats, TIME_STATS_LEN};
pub use window::{segment, Window, WindowSpec};
