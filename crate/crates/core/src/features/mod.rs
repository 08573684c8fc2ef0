//! Fixed-window feature images: fit a signal to the 0.3917 s analysis
//! window, compute logmel or MFCC, and render to the model input size.

mod dct;
mod io;
mod mel;
mod stft;

pub use dct::{dct2_columns, idct2_columns};
pub use io::{read_feature, write_feature};
pub use mel::{hz_to_mel, mel_to_hz, MelFilterbank};
pub use stft::power_spectrogram;

use serde::{Deserialize, Serialize};

/// All feature-extraction parameters. The window length and input size
/// are fixed by the experiment design; the STFT/mel settings are
/// conventional and produce a 64-frame image at the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub window_s: f64,
    pub sample_rate: u32,
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub n_mfcc: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub log_eps: f64,
    pub input_h: usize,
    pub input_w: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            window_s: 0.3917,
            sample_rate: 44_100,
            n_fft: 1024,
            hop: 256,
            n_mels: 64,
            n_mfcc: 20,
            fmin: 0.0,
            fmax: 22_050.0,
            log_eps: 1e-10,
            input_h: 320,
            input_w: 320,
        }
    }
}

impl FeatureConfig {
    /// Analysis window length in samples: floor(window_s * sample_rate).
    /// 17273 at the defaults.
    pub fn window_len(&self) -> usize {
        (self.window_s * f64::from(self.sample_rate)).floor() as usize
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.n_fft == 0 || self.hop == 0 || self.n_mels == 0 || self.n_mfcc == 0 {
            return Err(FeatureError::BadConfig("n_fft, hop, n_mels, n_mfcc must be >= 1".into()));
        }
        if !(self.fmin >= 0.0 && self.fmin < self.fmax) {
            return Err(FeatureError::BadConfig(format!(
                "need 0 <= fmin < fmax, got fmin {} fmax {}",
                self.fmin, self.fmax
            )));
        }
        if self.fmax > f64::from(self.sample_rate) / 2.0 {
            return Err(FeatureError::BadConfig(format!(
                "fmax {} exceeds Nyquist {}",
                self.fmax,
                f64::from(self.sample_rate) / 2.0
            )));
        }
        if self.n_mfcc > self.n_mels {
            return Err(FeatureError::BadConfig(format!(
                "n_mfcc {} exceeds n_mels {}",
                self.n_mfcc, self.n_mels
            )));
        }
        if self.window_len() < self.n_fft {
            return Err(FeatureError::BadConfig(format!(
                "window of {} samples shorter than n_fft {}",
                self.window_len(),
                self.n_fft
            )));
        }
        if self.input_h == 0 || self.input_w == 0 {
            return Err(FeatureError::BadConfig("input size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Which feature a [`FeatureImage`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    LogMel,
    Mfcc,
}

impl FeatureKind {
    pub fn tag(self) -> u8 {
        match self {
            FeatureKind::LogMel => 0,
            FeatureKind::Mfcc => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(FeatureKind::LogMel),
            1 => Some(FeatureKind::Mfcc),
            _ => None,
        }
    }
}

impl std::str::FromStr for FeatureKind {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, FeatureError> {
        match s {
            "logmel" => Ok(FeatureKind::LogMel),
            "mfcc" => Ok(FeatureKind::Mfcc),
            other => Err(FeatureError::BadConfig(format!(
                "unknown feature kind `{other}`, expected logmel or mfcc"
            ))),
        }
    }
}

/// A 2-D feature matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureImage {
    pub values: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    pub kind: FeatureKind,
    pub normalized: bool,
}

impl FeatureImage {
    pub fn new(rows: usize, cols: usize, kind: FeatureKind) -> Self {
        Self {
            values: vec![0.0; rows * cols],
            rows,
            cols,
            kind,
            normalized: false,
        }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("invalid feature config: {0}")]
    BadConfig(String),
    #[error("signal of {len} samples is shorter than one FFT frame of {n_fft}")]
    SignalTooShort { len: usize, n_fft: usize },
    #[error("malformed feature file: {0}")]
    MalformedFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Fit a signal to the fixed analysis window: shorter signals are
/// zero-padded at the end, longer ones keep their first `window_len`
/// samples.
pub fn fit_to_window(signal: &[f64], cfg: &FeatureConfig) -> Vec<f64> {
    let len = cfg.window_len();
    let mut out = Vec::with_capacity(len);
    out.extend_from_slice(&signal[..signal.len().min(len)]);
    out.resize(len, 0.0);
    out
}

/// Log mel-spectrogram of a window-fitted signal: Hann-windowed power
/// spectrogram, mel projection, then natural log with a floor epsilon.
/// Shape is n_mels x n_frames.
pub fn logmel(signal: &[f64], cfg: &FeatureConfig) -> Result<FeatureImage, FeatureError> {
    cfg.validate()?;
    let bank = MelFilterbank::new(cfg)?;
    logmel_with_bank(signal, cfg, &bank)
}

/// [`logmel`] with a prebuilt filterbank, for callers processing many
/// segments with one config.
pub fn logmel_with_bank(
    signal: &[f64],
    cfg: &FeatureConfig,
    bank: &MelFilterbank,
) -> Result<FeatureImage, FeatureError> {
    let power = power_spectrogram(signal, cfg.n_fft, cfg.hop)?;
    let n_frames = power.len();
    let mut img = FeatureImage::new(cfg.n_mels, n_frames, FeatureKind::LogMel);
    for (c, frame) in power.iter().enumerate() {
        for r in 0..cfg.n_mels {
            let energy = bank.apply_row(r, frame);
            img.set(r, c, (energy + cfg.log_eps).ln());
        }
    }
    Ok(img)
}

/// MFCC: orthonormal DCT-II along the mel axis of the logmel image,
/// keeping the first n_mfcc coefficients. Shape is n_mfcc x n_frames.
pub fn mfcc(signal: &[f64], cfg: &FeatureConfig) -> Result<FeatureImage, FeatureError> {
    cfg.validate()?;
    let bank = MelFilterbank::new(cfg)?;
    mfcc_with_bank(signal, cfg, &bank)
}

pub fn mfcc_with_bank(
    signal: &[f64],
    cfg: &FeatureConfig,
    bank: &MelFilterbank,
) -> Result<FeatureImage, FeatureError> {
    let lm = logmel_with_bank(signal, cfg, bank)?;
    let coeffs = dct2_columns(&lm);
    let mut img = FeatureImage::new(cfg.n_mfcc, lm.cols, FeatureKind::Mfcc);
    for c in 0..lm.cols {
        for r in 0..cfg.n_mfcc {
            img.set(r, c, coeffs.at(r, c));
        }
    }
    Ok(img)
}

/// Min-max normalize to [0, 1] (a constant image maps to all zeros) and
/// bilinearly resize to the configured input size.
pub fn render_input(img: &FeatureImage, cfg: &FeatureConfig) -> FeatureImage {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in &img.values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let range = hi - lo;
    let normalized: Vec<f64> = if range > 0.0 {
        img.values.iter().map(|&v| (v - lo) / range).collect()
    } else {
        vec![0.0; img.values.len()]
    };
    let norm_img = FeatureImage {
        values: normalized,
        rows: img.rows,
        cols: img.cols,
        kind: img.kind,
        normalized: true,
    };
    let mut out = bilinear_resize(&norm_img, cfg.input_h, cfg.input_w);
    out.normalized = true;
    out
}

/// Bilinear resize with corner alignment (same-size input is returned
/// value-identical).
pub fn bilinear_resize(img: &FeatureImage, out_h: usize, out_w: usize) -> FeatureImage {
    let mut out = FeatureImage::new(out_h, out_w, img.kind);
    out.normalized = img.normalized;
    let scale = |out_len: usize, in_len: usize| -> f64 {
        if out_len > 1 {
            (in_len - 1) as f64 / (out_len - 1) as f64
        } else {
            0.0
        }
    };
    let sy = scale(out_h, img.rows);
    let sx = scale(out_w, img.cols);
    for r in 0..out_h {
        let y = r as f64 * sy;
        let y0 = y.floor() as usize;
        let y1 = (y0 + 1).min(img.rows - 1);
        let fy = y - y0 as f64;
        for c in 0..out_w {
            let x = c as f64 * sx;
            let x0 = x.floor() as usize;
            let x1 = (x0 + 1).min(img.cols - 1);
            let fx = x - x0 as f64;
            let v = img.at(y0, x0) * (1.0 - fy) * (1.0 - fx)
                + img.at(y0, x1) * (1.0 - fy) * fx
                + img.at(y1, x0) * fy * (1.0 - fx)
                + img.at(y1, x1) * fy * fx;
            out.set(r, c, v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_len_is_17273_at_defaults() {
        let cfg = FeatureConfig::default();
        assert_eq!(cfg.window_len(), 17_273);
    }

    #[test]
    fn fit_exact_length_is_unchanged() {
        let cfg = FeatureConfig::default();
        let signal: Vec<f64> = (0..17_273).map(|i| (i as f64 * 0.01).sin()).collect();
        assert_eq!(fit_to_window(&signal, &cfg), signal);
    }

    #[test]
    fn fit_short_signal_pads_with_zeros() {
        let cfg = FeatureConfig::default();
        let signal: Vec<f64> = (0..10_000).map(|i| (i as f64 * 0.01).cos()).collect();
        let out = fit_to_window(&signal, &cfg);
        assert_eq!(out.len(), 17_273);
        assert_eq!(&out[..10_000], &signal[..]);
        assert!(out[10_000..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fit_long_signal_truncates() {
        let cfg = FeatureConfig::default();
        let signal: Vec<f64> = (0..20_000).map(|i| (i as f64 * 0.02).sin()).collect();
        let out = fit_to_window(&signal, &cfg);
        assert_eq!(out.len(), 17_273);
        assert_eq!(out[..], signal[..17_273]);
    }

    #[test]
    fn logmel_of_silence_is_log_eps() {
        let cfg = FeatureConfig::default();
        let signal = vec![0.0; cfg.window_len()];
        let img = logmel(&signal, &cfg).unwrap();
        let expected = (1e-10f64).ln();
        for &v in &img.values {
            assert!((v - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn logmel_shape_is_64x64_at_defaults() {
        let cfg = FeatureConfig::default();
        let signal = vec![0.0; cfg.window_len()];
        let img = logmel(&signal, &cfg).unwrap();
        assert_eq!((img.rows, img.cols), (64, 64));
    }

    #[test]
    fn mfcc_shape_is_20x64_at_defaults() {
        let cfg = FeatureConfig::default();
        let signal: Vec<f64> = (0..cfg.window_len())
            .map(|i| (i as f64 * 0.3).sin())
            .collect();
        let img = mfcc(&signal, &cfg).unwrap();
        assert_eq!((img.rows, img.cols), (20, 64));
        assert!(img.is_finite());
    }

    #[test]
    fn pure_tone_peaks_in_nearest_mel_band() {
        // Oracle: naive DFT of one frame + direct filterbank application.
        let cfg = FeatureConfig::default();
        let freq = 2_000.0;
        let signal: Vec<f64> = (0..cfg.window_len())
            .map(|i| (std::f64::consts::TAU * freq * i as f64 / 44_100.0).sin())
            .collect();
        let img = logmel(&signal, &cfg).unwrap();
        let best_row = (0..img.rows)
            .max_by(|&a, &b| {
                let ma: f64 = img.row(a).iter().sum();
                let mb: f64 = img.row(b).iter().sum();
                ma.partial_cmp(&mb).unwrap()
            })
            .unwrap();

        // Naive DFT power of the first frame.
        let n = cfg.n_fft;
        let hann: Vec<f64> = (0..n)
            .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n as f64).cos())
            .collect();
        let frame: Vec<f64> = signal[..n].iter().zip(&hann).map(|(s, w)| s * w).collect();
        let mut power = vec![0.0f64; n / 2 + 1];
        for (k, p) in power.iter_mut().enumerate() {
            let mut re = 0.0;
            let mut im = 0.0;
            for (t, &x) in frame.iter().enumerate() {
                let ang = -std::f64::consts::TAU * k as f64 * t as f64 / n as f64;
                re += x * ang.cos();
                im += x * ang.sin();
            }
            *p = re * re + im * im;
        }
        let bank = MelFilterbank::new(&cfg).unwrap();
        let oracle_row = (0..cfg.n_mels)
            .max_by(|&a, &b| {
                bank.apply_row(a, &power)
                    .partial_cmp(&bank.apply_row(b, &power))
                    .unwrap()
            })
            .unwrap();
        assert_eq!(best_row, oracle_row);

        // And that band's center is the one nearest 2 kHz.
        let centers = bank.centers_hz();
        let nearest = (0..centers.len())
            .min_by(|&a, &b| {
                (centers[a] - freq)
                    .abs()
                    .partial_cmp(&(centers[b] - freq).abs())
                    .unwrap()
            })
            .unwrap();
        assert!(
            (best_row as i64 - nearest as i64).abs() <= 1,
            "peak row {best_row}, nearest center row {nearest}"
        );
    }

    #[test]
    fn logmel_shifts_columns_with_hop_translation() {
        let cfg = FeatureConfig::default();
        let mut rng = crate::rng::SplitMix64::new(5);
        let long: Vec<f64> = (0..cfg.window_len() + cfg.hop)
            .map(|_| rng.uniform(-1.0, 1.0))
            .collect();
        let a = logmel(&long[..cfg.window_len()], &cfg).unwrap();
        let b = logmel(&long[cfg.hop..], &cfg).unwrap();
        for c in 0..a.cols - 1 {
            for r in 0..a.rows {
                assert!((a.at(r, c + 1) - b.at(r, c)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn mfcc_of_constant_logmel_column_is_sqrt_n_scaled() {
        // DCT-II of a constant vector: coefficient 0 = c * sqrt(N), rest 0.
        let n = 64usize;
        let c_val = 1.7f64;
        let img = FeatureImage {
            values: vec![c_val; n],
            rows: n,
            cols: 1,
            kind: FeatureKind::LogMel,
            normalized: false,
        };
        let coeffs = dct2_columns(&img);
        assert!((coeffs.at(0, 0) - c_val * (n as f64).sqrt()).abs() < 1e-10);
        for r in 1..n {
            assert!(coeffs.at(r, 0).abs() < 1e-10);
        }
    }

    #[test]
    fn render_constant_image_is_all_zero() {
        let cfg = FeatureConfig {
            input_h: 320,
            input_w: 320,
            ..FeatureConfig::default()
        };
        let img = FeatureImage {
            values: vec![3.5; 64 * 64],
            rows: 64,
            cols: 64,
            kind: FeatureKind::LogMel,
            normalized: false,
        };
        let out = render_input(&img, &cfg);
        assert_eq!((out.rows, out.cols), (320, 320));
        assert!(out.values.iter().all(|&v| v == 0.0));
        assert!(out.normalized);
    }

    #[test]
    fn render_same_size_unit_range_is_identity() {
        let cfg = FeatureConfig {
            input_h: 4,
            input_w: 4,
            ..FeatureConfig::default()
        };
        let values: Vec<f64> = (0..16).map(|i| i as f64 / 15.0).collect();
        let img = FeatureImage {
            values: values.clone(),
            rows: 4,
            cols: 4,
            kind: FeatureKind::LogMel,
            normalized: false,
        };
        let out = render_input(&img, &cfg);
        for (a, b) in out.values.iter().zip(&values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn bilinear_2x2_to_3x3_center_matches_hand_value() {
        // [[0,1],[1,0]] resized to 3x3: center = mean of corners = 0.5.
        let img = FeatureImage {
            values: vec![0.0, 1.0, 1.0, 0.0],
            rows: 2,
            cols: 2,
            kind: FeatureKind::LogMel,
            normalized: false,
        };
        let out = bilinear_resize(&img, 3, 3);
        assert!((out.at(1, 1) - 0.5).abs() < 1e-12);
        assert_eq!(out.at(0, 0), 0.0);
        assert_eq!(out.at(0, 2), 1.0);
        assert_eq!(out.at(2, 0), 1.0);
        assert_eq!(out.at(2, 2), 0.0);
    }

    #[test]
    fn rendered_values_stay_in_unit_interval() {
        let cfg = FeatureConfig {
            input_h: 50,
            input_w: 70,
            ..FeatureConfig::default()
        };
        let mut rng = crate::rng::SplitMix64::new(8);
        let img = FeatureImage {
            values: (0..64 * 64).map(|_| rng.uniform(-30.0, 10.0)).collect(),
            rows: 64,
            cols: 64,
            kind: FeatureKind::Mfcc,
            normalized: false,
        };
        let out = render_input(&img, &cfg);
        assert!(out.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = FeatureConfig::default();
        cfg.n_mfcc = 100;
        assert!(cfg.validate().is_err());

        let mut cfg = FeatureConfig::default();
        cfg.fmax = 30_000.0;
        assert!(cfg.validate().is_err());

        let mut cfg = FeatureConfig::default();
        cfg.window_s = 0.01;
        assert!(cfg.validate().is_err());
    }
}
