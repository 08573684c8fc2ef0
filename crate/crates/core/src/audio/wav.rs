//! RIFF/WAVE reader and a small PCM16 writer.
//!
//! Reads PCM 8/16/24/32-bit integer and 32-bit float, mono or stereo.
//! Integer samples are scaled to [-1, 1] by the format's max magnitude and
//! stereo is mixed to mono by the per-sample mean.

use super::{AudioClip, AudioError};
use std::io::Write;
use std::path::Path;

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Load a WAV file as a normalized mono clip.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    let bytes = std::fs::read(path.as_ref())?;
    decode_wav(&bytes)
}

/// Decode WAV bytes; split out from [`load_wav`] so tests can feed buffers.
pub fn decode_wav(data: &[u8]) -> Result<AudioClip, AudioError> {
    if data.len() < 12 {
        return Err(AudioError::MalformedHeader(
            "file shorter than RIFF header".into(),
        ));
    }
    if &data[0..4] != b"RIFF" {
        return Err(AudioError::MalformedHeader("missing RIFF magic".into()));
    }
    if &data[8..12] != b"WAVE" {
        return Err(AudioError::MalformedHeader("missing WAVE marker".into()));
    }

    let mut fmt: Option<FmtChunk> = None;
    let mut data_chunk: Option<&[u8]> = None;
    let mut pos = 12usize;
    while pos + 8 <= data.len() {
        let id = &data[pos..pos + 4];
        let size = u32::from_le_bytes([data[pos + 4], data[pos + 5], data[pos + 6], data[pos + 7]])
            as usize;
        let body_start = pos + 8;
        let body_end = body_start.checked_add(size).ok_or_else(|| {
            AudioError::MalformedHeader("chunk size overflows file".into())
        })?;
        if body_end > data.len() {
            return Err(AudioError::MalformedHeader(format!(
                "chunk `{}` truncated",
                String::from_utf8_lossy(id)
            )));
        }
        match id {
            b"fmt " => fmt = Some(parse_fmt(&data[body_start..body_end])?),
            b"data" => data_chunk = Some(&data[body_start..body_end]),
            _ => {}
        }
        // Chunks are word-aligned.
        pos = body_end + (size & 1);
    }

    let fmt = fmt.ok_or_else(|| AudioError::MalformedHeader("missing fmt chunk".into()))?;
    let body = data_chunk.ok_or_else(|| AudioError::MalformedHeader("missing data chunk".into()))?;
    if fmt.sample_rate == 0 {
        return Err(AudioError::InvalidRate(0));
    }
    if fmt.channels == 0 || fmt.channels > 2 {
        return Err(AudioError::UnsupportedChannels(fmt.channels));
    }

    let samples = decode_samples(body, &fmt)?;
    if samples.is_empty() {
        return Err(AudioError::ZeroSamples);
    }
    Ok(AudioClip::new(samples, fmt.sample_rate))
}

struct FmtChunk {
    format: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

fn parse_fmt(body: &[u8]) -> Result<FmtChunk, AudioError> {
    if body.len() < 16 {
        return Err(AudioError::MalformedHeader("fmt chunk truncated".into()));
    }
    let mut format = u16::from_le_bytes([body[0], body[1]]);
    let channels = u16::from_le_bytes([body[2], body[3]]);
    let sample_rate = u32::from_le_bytes([body[4], body[5], body[6], body[7]]);
    let bits = u16::from_le_bytes([body[14], body[15]]);
    if format == FORMAT_EXTENSIBLE {
        // SubFormat GUID starts at offset 24; its first two bytes carry the
        // effective format tag.
        if body.len() < 26 {
            return Err(AudioError::MalformedHeader(
                "extensible fmt chunk truncated".into(),
            ));
        }
        format = u16::from_le_bytes([body[24], body[25]]);
    }
    Ok(FmtChunk {
        format,
        channels,
        sample_rate,
        bits,
    })
}

fn decode_samples(body: &[u8], fmt: &FmtChunk) -> Result<Vec<f64>, AudioError> {
    let bytes_per = usize::from(fmt.bits / 8);
    if bytes_per == 0 {
        return Err(AudioError::UnsupportedCodec {
            format: fmt.format,
            bits: fmt.bits,
        });
    }
    let decode_one: fn(&[u8]) -> f64 = match (fmt.format, fmt.bits) {
        // 8-bit PCM is unsigned with midpoint 128.
        (FORMAT_PCM, 8) => |b| (f64::from(b[0]) - 128.0) / 128.0,
        (FORMAT_PCM, 16) => |b| f64::from(i16::from_le_bytes([b[0], b[1]])) / 32768.0,
        (FORMAT_PCM, 24) => |b| {
            let v = i32::from_le_bytes([0, b[0], b[1], b[2]]) >> 8;
            f64::from(v) / 8_388_608.0
        },
        (FORMAT_PCM, 32) => {
            |b| f64::from(i32::from_le_bytes([b[0], b[1], b[2], b[3]])) / 2_147_483_648.0
        }
        (FORMAT_IEEE_FLOAT, 32) => {
            |b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])).clamp(-1.0, 1.0)
        }
        _ => {
            return Err(AudioError::UnsupportedCodec {
                format: fmt.format,
                bits: fmt.bits,
            })
        }
    };

    let channels = usize::from(fmt.channels);
    let frame_bytes = bytes_per * channels;
    let n_frames = body.len() / frame_bytes;
    let mut out = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let frame = &body[f * frame_bytes..(f + 1) * frame_bytes];
        let mut acc = 0.0f64;
        for c in 0..channels {
            acc += decode_one(&frame[c * bytes_per..(c + 1) * bytes_per]);
        }
        out.push(acc / channels as f64);
    }
    Ok(out)
}

/// Write a mono clip as 16-bit PCM. Samples are clamped to [-1, 1] and
/// scaled by 32767 so the round trip stays within one quantization step.
pub fn write_wav_pcm16(path: impl AsRef<Path>, samples: &[f64], sample_rate: u32) -> Result<(), AudioError> {
    let n = samples.len();
    let data_bytes = (n * 2) as u32;
    let mut out = Vec::with_capacity(44 + n * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_bytes).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_bytes.to_le_bytes());
    for &s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = std::fs::File::create(path.as_ref())?;
    file.write_all(&out)?;
    Ok(())
}
