//! Raw audio handling: WAV decode/encode, resampling, and analysis windows.

use crate::error::{Error, Result};
use crate::{CANONICAL_SAMPLE_RATE, SNIPPET_SECONDS};

/// A mono audio clip with samples normalized into `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    /// Mono PCM samples, each in `[-1, 1]`.
    pub samples: Vec<f32>,
    /// Sample rate in Hz, always positive.
    pub sample_rate: u32,
    /// Opaque identifier for the clip's origin (file stem, synth id, ...).
    pub source_id: String,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, sample_rate: u32, source_id: impl Into<String>) -> Self {
        assert!(sample_rate > 0, "sample_rate must be positive");
        Self {
            samples,
            sample_rate,
            source_id: source_id.into(),
        }
    }

    /// Clip length in seconds.
    pub fn seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Returns the clip itself if already at `target_rate`, otherwise a
    /// resampled copy. Convenience over [`resample`].
    pub fn at_rate(self, target_rate: u32) -> AudioClip {
        if self.sample_rate == target_rate {
            self
        } else {
            resample(&self, target_rate)
        }
    }
}

/// One 1-second analysis window into a clip.
#[derive(Debug, Clone, PartialEq)]
pub struct SnippetWindow {
    /// `source_id` of the clip this window refers to.
    pub clip_ref: String,
    /// Window start in seconds from the beginning of the clip.
    pub start_time: f64,
    /// Window length in seconds; fixed at 1.0.
    pub duration: f64,
    /// Hop used to enumerate this window's sequence, in seconds.
    pub hop: f64,
}

const RIFF: &[u8; 4] = b"RIFF";
const WAVE: &[u8; 4] = b"WAVE";
const FMT: &[u8; 4] = b"fmt ";
const DATA: &[u8; 4] = b"data";

fn read_u32(bytes: &[u8], at: usize) -> Result<u32> {
    let chunk: [u8; 4] = bytes
        .get(at..at + 4)
        .ok_or_else(|| Error::Format(format!("truncated WAV at byte {at}")))?
        .try_into()
        .unwrap();
    Ok(u32::from_le_bytes(chunk))
}

fn read_u16(bytes: &[u8], at: usize) -> Result<u16> {
    let chunk: [u8; 2] = bytes
        .get(at..at + 2)
        .ok_or_else(|| Error::Format(format!("truncated WAV at byte {at}")))?
        .try_into()
        .unwrap();
    Ok(u16::from_le_bytes(chunk))
}

/// Decodes a RIFF/WAVE byte stream holding 16-bit PCM into a mono clip.
///
/// Stereo input is averaged down to mono; samples are scaled by 1/32768
/// into `[-1, 1]`. The `source_id` is left empty; callers that know the
/// origin should fill it in (see [`load_wav`]).
///
/// # Errors
///
/// [`Error::Format`] for malformed headers, [`Error::Unsupported`] for
/// codecs other than PCM or bit depths other than 16.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip> {
    if bytes.len() < 12 || &bytes[0..4] != RIFF || &bytes[8..12] != WAVE {
        return Err(Error::Format("not a RIFF/WAVE stream".into()));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // (format, channels, rate, bits)
    let mut data: Option<&[u8]> = None;
    let mut pos = 12usize;
    while pos + 8 <= bytes.len() {
        let id: [u8; 4] = bytes[pos..pos + 4].try_into().unwrap();
        let size = read_u32(bytes, pos + 4)? as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| Error::Format(format!("chunk '{}' overruns file", String::from_utf8_lossy(&id))))?;
        match &id {
            FMT => {
                if size < 16 {
                    return Err(Error::Format("fmt chunk shorter than 16 bytes".into()));
                }
                let audio_format = read_u16(bytes, body_start)?;
                let channels = read_u16(bytes, body_start + 2)?;
                let sample_rate = read_u32(bytes, body_start + 4)?;
                let bits = read_u16(bytes, body_start + 14)?;
                fmt = Some((audio_format, channels, sample_rate, bits));
            }
            DATA => data = Some(&bytes[body_start..body_end]),
            _ => {} // skip LIST, fact, etc.
        }
        // chunks are word-aligned
        pos = body_end + (size & 1);
    }

    let (audio_format, channels, sample_rate, bits) =
        fmt.ok_or_else(|| Error::Format("missing fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::Format("missing data chunk".into()))?;

    if audio_format != 1 {
        return Err(Error::Unsupported(format!(
            "WAV codec {audio_format} (only PCM is supported)"
        )));
    }
    if bits != 16 {
        return Err(Error::Unsupported(format!(
            "{bits}-bit PCM (only 16-bit is supported)"
        )));
    }
    if channels == 0 || channels > 2 {
        return Err(Error::Unsupported(format!("{channels} channels")));
    }
    if sample_rate == 0 {
        return Err(Error::Format("sample rate 0".into()));
    }

    let ch = channels as usize;
    let frame_bytes = 2 * ch;
    let frames = data.len() / frame_bytes;
    let mut samples = Vec::with_capacity(frames);
    for f in 0..frames {
        let mut acc = 0.0f32;
        for c in 0..ch {
            let at = f * frame_bytes + c * 2;
            let v = i16::from_le_bytes([data[at], data[at + 1]]);
            acc += v as f32 / 32768.0;
        }
        samples.push(acc / ch as f32);
    }

    Ok(AudioClip::new(samples, sample_rate, ""))
}

/// Encodes a mono clip as 16-bit PCM RIFF/WAVE bytes.
///
/// Samples are scaled by 32768 and rounded, clamping to the i16 range, so
/// `decode_wav(encode_wav(c))` reproduces samples to within 1/32768.
pub fn encode_wav(clip: &AudioClip) -> Vec<u8> {
    let data_size = (clip.samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_size as usize);
    out.extend_from_slice(RIFF);
    out.extend_from_slice(&(36 + data_size).to_le_bytes());
    out.extend_from_slice(WAVE);
    out.extend_from_slice(FMT);
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&clip.sample_rate.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(DATA);
    out.extend_from_slice(&data_size.to_le_bytes());
    for &s in &clip.samples {
        let v = (s as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Reads and decodes a WAV file, setting `source_id` from the file stem.
pub fn load_wav(path: impl AsRef<std::path::Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut clip = decode_wav(&bytes)?;
    clip.source_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(clip)
}

/// Writes a clip to disk as 16-bit PCM WAV.
pub fn save_wav(clip: &AudioClip, path: impl AsRef<std::path::Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_wav(clip)).map_err(|e| Error::io(path, e))
}

/// Resamples a clip to `target_rate` by linear interpolation.
///
/// Output duration equals input duration to within one sample period. No
/// anti-aliasing filter is applied, which is a known quality limitation;
/// adequate for the clean synthetic signals this pipeline targets.
pub fn resample(clip: &AudioClip, target_rate: u32) -> AudioClip {
    assert!(target_rate > 0, "target_rate must be positive");
    if target_rate == clip.sample_rate || clip.samples.is_empty() {
        return AudioClip::new(clip.samples.clone(), target_rate, clip.source_id.clone());
    }
    let ratio = clip.sample_rate as f64 / target_rate as f64;
    let out_len = ((clip.samples.len() as f64) / ratio).round() as usize;
    let n = clip.samples.len();
    let mut out = Vec::with_capacity(out_len);
    for i in 0..out_len {
        let pos = i as f64 * ratio;
        let i0 = pos.floor() as usize;
        let frac = pos - i0 as f64;
        let a = clip.samples[i0.min(n - 1)] as f64;
        let b = clip.samples[(i0 + 1).min(n - 1)] as f64;
        out.push((a + (b - a) * frac) as f32);
    }
    AudioClip::new(out, target_rate, clip.source_id.clone())
}

/// Enumerates 1 s windows at start times `0, hop, 2·hop, …` while the whole
/// window fits inside the clip.
///
/// # Errors
///
/// [`Error::ClipTooShort`] when the clip is shorter than 1 s.
pub fn enumerate_windows(clip: &AudioClip, hop: f64) -> Result<Vec<SnippetWindow>> {
    assert!(hop > 0.0, "hop must be positive");
    let len_seconds = clip.seconds();
    if len_seconds < SNIPPET_SECONDS {
        return Err(Error::ClipTooShort {
            seconds: len_seconds,
            required: SNIPPET_SECONDS,
        });
    }
    let count = ((len_seconds - SNIPPET_SECONDS) / hop).floor() as usize + 1;
    Ok((0..count)
        .map(|k| SnippetWindow {
            clip_ref: clip.source_id.clone(),
            start_time: k as f64 * hop,
            duration: SNIPPET_SECONDS,
            hop,
        })
        .collect())
}

/// Resamples to the canonical 16 kHz if needed.
pub fn canonicalize(clip: AudioClip) -> AudioClip {
    clip.at_rate(CANONICAL_SAMPLE_RATE)
}
