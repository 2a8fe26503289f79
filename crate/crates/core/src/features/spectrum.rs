use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Reusable forward FFT of a fixed length returning the lower half of the
/// amplitude spectrum (bins `0..len/2`, DC included, no taper).
#[derive(Clone)]
pub struct SpectrumAnalyzer {
    fft: Arc<dyn Fft<f64>>,
    len: usize,
}

impl std::fmt::Debug for SpectrumAnalyzer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectrumAnalyzer")
            .field("len", &self.len)
            .finish()
    }
}

impl SpectrumAnalyzer {
    pub fn new(len: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(len);
        Self { fft, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn n_bins(&self) -> usize {
        self.len / 2
    }

    pub fn amplitude(&self, window: &[f64]) -> Vec<f64> {
        assert_eq!(
            window.len(),
            self.len,
            "window length does not match the planned FFT"
        );
        let mut buf: Vec<Complex<f64>> = window.iter().map(|&x| Complex::new(x, 0.0)).collect();
        self.fft.process(&mut buf);
        buf[..self.n_bins()].iter().map(|c| c.norm()).collect()
    }
}

/// Magnitudes of DFT bins `0..n/2` of `window`.
pub fn fft_amplitude(window: &[f64]) -> Vec<f64> {
    SpectrumAnalyzer::new(window.len()).amplitude(window)
}
