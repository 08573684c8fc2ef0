//! Energy-threshold event segmentation with hysteresis, plus a two-phase
//! (burst/decay) annotation of each detected event.
//!
//! Thresholds are fractions of the peak frame energy, so detection is
//! invariant to recording gain.

use crate::audio::AudioClip;

/// Framing and detection parameters. Defaults segment synthetic noise
/// bursts cleanly; everything is overridable from the CLI and config.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SegmentParams {
    pub frame_len: usize,
    pub hop: usize,
    pub t_high: f64,
    pub t_low: f64,
    pub min_dur_s: f64,
    pub merge_gap_s: f64,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self {
            frame_len: 1024,
            hop: 256,
            t_high: 0.25,
            t_low: 0.10,
            min_dur_s: 0.05,
            merge_gap_s: 0.05,
        }
    }
}

/// Short-time RMS energy series of a clip.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyEnvelope {
    pub frame_energies: Vec<f64>,
    pub frame_len: usize,
    pub hop: usize,
    pub source_rate: u32,
}

impl EnergyEnvelope {
    /// Start sample of frame `i`.
    pub fn frame_start(&self, i: usize) -> usize {
        i * self.hop
    }
}

/// A detected event, in sample indices of the parent clip (end exclusive).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start_sample: usize,
    pub end_sample: usize,
    pub peak_energy: f64,
    /// Boundary between burst and decay phases, set by [`classify_phase`].
    pub burst_end_sample: Option<usize>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end_sample - self.start_sample
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SegmentError {
    #[error("clip has {samples} samples, shorter than one frame of {frame_len}")]
    ClipTooShort { samples: usize, frame_len: usize },
    #[error("invalid framing: frame_len and hop must be >= 1")]
    BadFraming,
    #[error("invalid thresholds: require 0 < t_low <= t_high <= 1, got low {low}, high {high}")]
    BadThresholds { low: f64, high: f64 },
    #[error("segment [{start}, {end}) out of bounds for clip of {len} samples")]
    SegmentOutOfBounds {
        start: usize,
        end: usize,
        len: usize,
    },
}

/// RMS energy per frame: frame i covers samples [i*hop, i*hop + frame_len).
pub fn energy_envelope(
    clip: &AudioClip,
    frame_len: usize,
    hop: usize,
) -> Result<EnergyEnvelope, SegmentError> {
    if frame_len == 0 || hop == 0 {
        return Err(SegmentError::BadFraming);
    }
    let n = clip.samples.len();
    if n < frame_len {
        return Err(SegmentError::ClipTooShort {
            samples: n,
            frame_len,
        });
    }
    let n_frames = (n - frame_len) / hop + 1;
    let mut energies = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let start = i * hop;
        let sum_sq: f64 = clip.samples[start..start + frame_len]
            .iter()
            .map(|&s| s * s)
            .sum();
        energies.push((sum_sq / frame_len as f64).sqrt());
    }
    Ok(EnergyEnvelope {
        frame_energies: energies,
        frame_len,
        hop,
        source_rate: clip.sample_rate,
    })
}

/// Hysteresis detection: a segment is a maximal run of frames with energy
/// >= t_low * peak that contains at least one frame >= t_high * peak.
/// Runs closer than `merge_gap` are merged, and segments shorter than
/// `min_dur` are discarded.
pub fn detect_segments(
    env: &EnergyEnvelope,
    t_high: f64,
    t_low: f64,
    min_dur_s: f64,
    merge_gap_s: f64,
) -> Result<Vec<Segment>, SegmentError> {
    if !(t_low > 0.0 && t_low <= t_high && t_high <= 1.0) {
        return Err(SegmentError::BadThresholds {
            low: t_low,
            high: t_high,
        });
    }
    let peak = env
        .frame_energies
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);
    if peak <= 0.0 {
        return Ok(Vec::new());
    }
    let high = t_high * peak;
    let low = t_low * peak;
    let rate = f64::from(env.source_rate);

    // Maximal runs of frames >= low that contain a frame >= high.
    let mut runs: Vec<(usize, usize)> = Vec::new(); // frame ranges, inclusive
    let mut open: Option<(usize, bool)> = None; // (first frame, saw high)
    for (i, &e) in env.frame_energies.iter().enumerate() {
        if e >= low {
            let entry = open.get_or_insert((i, false));
            if e >= high {
                entry.1 = true;
            }
        } else if let Some((start, saw_high)) = open.take() {
            if saw_high {
                runs.push((start, i - 1));
            }
        }
    }
    if let Some((start, true)) = open {
        runs.push((start, env.frame_energies.len() - 1));
    }

    // Frame runs to sample ranges.
    let mut segments: Vec<Segment> = runs
        .into_iter()
        .map(|(f0, f1)| {
            let start = env.frame_start(f0);
            let end = env.frame_start(f1) + env.frame_len;
            let peak_energy = env.frame_energies[f0..=f1]
                .iter()
                .cloned()
                .fold(0.0f64, f64::max);
            Segment {
                start_sample: start,
                end_sample: end,
                peak_energy,
                burst_end_sample: None,
            }
        })
        .collect();

    // Merge neighbours separated by less than the gap.
    let merge_gap_samples = merge_gap_s * rate;
    let mut merged: Vec<Segment> = Vec::with_capacity(segments.len());
    for seg in segments.drain(..) {
        match merged.last_mut() {
            Some(prev) if (seg.start_sample.saturating_sub(prev.end_sample) as f64) < merge_gap_samples => {
                prev.end_sample = prev.end_sample.max(seg.end_sample);
                prev.peak_energy = prev.peak_energy.max(seg.peak_energy);
            }
            _ => merged.push(seg),
        }
    }

    let min_dur_samples = min_dur_s * rate;
    merged.retain(|s| s.len() as f64 >= min_dur_samples);
    Ok(merged)
}

/// Convenience wrapper: envelope + detection with one parameter set.
pub fn segment_clip(clip: &AudioClip, params: &SegmentParams) -> Result<Vec<Segment>, SegmentError> {
    let env = energy_envelope(clip, params.frame_len, params.hop)?;
    detect_segments(
        &env,
        params.t_high,
        params.t_low,
        params.min_dur_s,
        params.merge_gap_s,
    )
}

/// Annotate a segment with its burst/decay boundary: the end of the frame
/// with maximum short-time energy inside the segment (ties break earliest).
/// The segment is partitioned into burst [start, burst_end) and decay
/// [burst_end, end).
pub fn classify_phase(
    clip: &AudioClip,
    seg: &Segment,
    frame_len: usize,
    hop: usize,
) -> Result<Segment, SegmentError> {
    if seg.start_sample >= seg.end_sample || seg.end_sample > clip.samples.len() {
        return Err(SegmentError::SegmentOutOfBounds {
            start: seg.start_sample,
            end: seg.end_sample,
            len: clip.samples.len(),
        });
    }
    let span = &clip.samples[seg.start_sample..seg.end_sample];
    let frame_len = frame_len.min(span.len()).max(1);
    let hop = hop.max(1);

    let mut best_frame = 0usize;
    let mut best_energy = f64::NEG_INFINITY;
    let mut i = 0usize;
    let mut frame = 0usize;
    while i + frame_len <= span.len() {
        let e: f64 = span[i..i + frame_len].iter().map(|&s| s * s).sum();
        if e > best_energy {
            best_energy = e;
            best_frame = frame;
        }
        i += hop;
        frame += 1;
    }
    let burst_end = (seg.start_sample + best_frame * hop + frame_len).min(seg.end_sample);
    Ok(Segment {
        burst_end_sample: Some(burst_end),
        ..*seg
    })
}
