//! Mel scale mapping and triangular filterbank construction.

use super::{FeatureConfig, FeatureError};

/// HTK mel scale: mel(f) = 2595 * log10(1 + f/700).
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filterbank sampled on FFT bins, peak-normalized so every
/// row's maximum weight is exactly 1.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    weights: Vec<f64>, // n_mels x n_bins, row-major
    n_bins: usize,
    centers_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(cfg: &FeatureConfig) -> Result<Self, FeatureError> {
        cfg.validate()?;
        let n_bins = cfg.n_fft / 2 + 1;
        let mel_lo = hz_to_mel(cfg.fmin);
        let mel_hi = hz_to_mel(cfg.fmax);
        // n_mels + 2 edge points, mel-equally spaced.
        let edges_hz: Vec<f64> = (0..cfg.n_mels + 2)
            .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (cfg.n_mels + 1) as f64))
            .collect();

        let bin_hz: Vec<f64> = (0..n_bins)
            .map(|b| b as f64 * f64::from(cfg.sample_rate) / cfg.n_fft as f64)
            .collect();

        let mut weights = vec![0.0f64; cfg.n_mels * n_bins];
        for m in 0..cfg.n_mels {
            let (left, center, right) = (edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]);
            let row = &mut weights[m * n_bins..(m + 1) * n_bins];
            for (b, w) in row.iter_mut().enumerate() {
                let f = bin_hz[b];
                *w = if f > left && f < center {
                    (f - left) / (center - left)
                } else if f == center {
                    1.0
                } else if f > center && f < right {
                    (right - f) / (right - center)
                } else {
                    0.0
                };
            }
            let peak = row.iter().cloned().fold(0.0f64, f64::max);
            if peak <= 0.0 {
                return Err(FeatureError::BadConfig(format!(
                    "mel band {m} covers no FFT bin; increase n_fft or reduce n_mels"
                )));
            }
            for w in row.iter_mut() {
                *w /= peak;
            }
        }
        Ok(Self {
            weights,
            n_bins,
            centers_hz: edges_hz[1..=cfg.n_mels].to_vec(),
        })
    }

    pub fn n_mels(&self) -> usize {
        self.centers_hz.len()
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }

    /// Band center frequencies in Hz.
    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    /// Project one power spectrum frame onto band `m`.
    pub fn apply_row(&self, m: usize, power: &[f64]) -> f64 {
        self.row(m)
            .iter()
            .zip(power)
            .map(|(w, p)| w * p)
            .sum()
    }
}
