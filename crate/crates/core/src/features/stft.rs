//! Short-time power spectra: Hann window, complex FFT, one-sided
//! magnitude-squared bins.

use super::FeatureError;
use rustfft::{num_complex::Complex, FftPlanner};

/// Magnitude-squared one-sided spectrogram. Frame i covers samples
/// [i*hop, i*hop + n_fft); frames stay fully inside the signal, giving
/// floor((N - n_fft)/hop) + 1 frames. Each frame holds n_fft/2 + 1 bins.
pub fn power_spectrogram(
    signal: &[f64],
    n_fft: usize,
    hop: usize,
) -> Result<Vec<Vec<f64>>, FeatureError> {
    if signal.len() < n_fft {
        return Err(FeatureError::SignalTooShort {
            len: signal.len(),
            n_fft,
        });
    }
    let window = hann(n_fft);
    let n_frames = (signal.len() - n_fft) / hop + 1;
    let n_bins = n_fft / 2 + 1;

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n_fft);
    let mut buf = vec![Complex::new(0.0f64, 0.0); n_fft];

    let mut frames = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let start = i * hop;
        for (j, slot) in buf.iter_mut().enumerate() {
            *slot = Complex::new(signal[start + j] * window[j], 0.0);
        }
        fft.process(&mut buf);
        frames.push(buf[..n_bins].iter().map(|c| c.norm_sqr()).collect());
    }
    Ok(frames)
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n as f64).cos())
        .collect()
}
