//! Polyphase windowed-sinc resampler (Kaiser window, beta 8.6, 64 zero
//! crossings). One fixed method keeps resampled corpora bit-reproducible.

use super::{AudioClip, AudioError};

const KAISER_BETA: f64 = 8.6;
const ZERO_CROSSINGS: usize = 64;
/// Above this many polyphase branches the table is not worth caching and
/// the kernel is evaluated per output sample instead (identical values).
const MAX_TABLE_PHASES: u64 = 4096;

/// Resample a clip to `target_rate`. A clip already at the target rate is
/// returned unchanged.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip, AudioError> {
    if target_rate == 0 {
        return Err(AudioError::InvalidRate(0));
    }
    if clip.sample_rate == target_rate {
        return Ok(clip.clone());
    }

    let src = u64::from(clip.sample_rate);
    let dst = u64::from(target_rate);
    let g = gcd(src, dst);
    let up = dst / g; // L: polyphase branches
    let down = src / g; // M: source step per branch cycle

    // Cutoff sits at the lower of the two Nyquist rates.
    let scale = (dst as f64 / src as f64).min(1.0);
    let half_width = ZERO_CROSSINGS as f64 / scale; // support in source samples
    let half_taps = half_width.ceil() as i64;

    let x = &clip.samples;
    let n_in = x.len() as u64;
    let n_out = n_in
        .checked_mul(up)
        .map(|v| v.div_ceil(down))
        .expect("resample length overflow") as usize;

    let kernel = Kernel {
        scale,
        half_width,
        i0_beta: bessel_i0(KAISER_BETA),
    };

    let table: Option<Vec<Vec<f64>>> = if up <= MAX_TABLE_PHASES {
        Some(
            (0..up)
                .map(|p| kernel.phase_row(p as f64 / up as f64, half_taps))
                .collect(),
        )
    } else {
        None
    };

    let mut out = Vec::with_capacity(n_out);
    for n in 0..n_out as u64 {
        let num = n * down;
        let base = (num / up) as i64;
        let phase = num % up;
        let row;
        let taps: &[f64] = match &table {
            Some(t) => &t[phase as usize],
            None => {
                row = kernel.phase_row(phase as f64 / up as f64, half_taps);
                &row
            }
        };
        let mut acc = 0.0f64;
        for (ti, &w) in taps.iter().enumerate() {
            let k = base + ti as i64 - half_taps;
            if k >= 0 && (k as usize) < x.len() {
                acc += x[k as usize] * w;
            }
        }
        out.push(acc);
    }

    let mut result = clip.clone();
    result.samples = out;
    result.sample_rate = target_rate;
    Ok(result)
}

struct Kernel {
    scale: f64,
    half_width: f64,
    i0_beta: f64,
}

impl Kernel {
    /// Taps for fractional offset `frac` in [0, 1): value at u = j - frac
    /// for j in [-half_taps, half_taps].
    fn phase_row(&self, frac: f64, half_taps: i64) -> Vec<f64> {
        (-half_taps..=half_taps)
            .map(|j| self.eval(j as f64 - frac))
            .collect()
    }

    fn eval(&self, u: f64) -> f64 {
        if u.abs() >= self.half_width {
            return 0.0;
        }
        let window_arg = u / self.half_width;
        let window = bessel_i0(KAISER_BETA * (1.0 - window_arg * window_arg).sqrt()) / self.i0_beta;
        self.scale * sinc(self.scale * u) * window
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Modified Bessel function of the first kind, order zero (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}
