/// Length of the [`time_stats`] output.
pub const TIME_STATS_LEN: usize = 6;

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// `[mean, #above mean, #below mean, std, min, max]` of one channel window.
///
/// Counts use strict inequality; std is the population form.
pub fn time_stats(window: &[f64]) -> [f64; TIME_STATS_LEN] {
    let (mean, std) = mean_std(window);
    let above = window.iter().filter(|&&x| x > mean).count();
    let below = window.iter().filter(|&&x| x < mean).count();
    let min = window.iter().copied().fold(f64::INFINITY, f64::min);
    let max = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    [mean, above as f64, below as f64, std, min, max]
}

/// Per-sample z-scoring of the pressure channel; the std is floored at
/// `epsilon`.
pub fn normalize_pressure(pressure: &[f64], epsilon: f64) -> Vec<f64> {
    let (mean, std) = mean_std(pressure);
    let scale = std.max(epsilon);
    pressure.iter().map(|p| (p - mean) / scale).collect()
}

/// `[mean, population std]` of an amplitude spectrum.
pub fn fft_stats(spectrum: &[f64]) -> [f64; 2] {
    let (m, s) = mean_std(spectrum);
    [m, s]
}
