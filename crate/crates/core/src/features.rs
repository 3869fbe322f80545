//! Spectral features: STFT, mel filterbank, log-compressed mel snippets,
//! and chroma.
//!
//! The classifier consumes 1 s snippets as 128 band by 100 frame matrices of
//! `ln(1 + 10000 x)` compressed mel power. Chroma folds spectral magnitude
//! into the 12 pitch classes and backs change-point refinement.

use std::sync::OnceLock;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::audio::{AudioClip, SnippetWindow};
use crate::error::{Error, Result};
use crate::{CANONICAL_SAMPLE_RATE, SNIPPET_SECONDS};

/// Frame and transform geometry for a short-time Fourier transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftConfig {
    /// Analysis window length in samples.
    pub window_len: usize,
    /// Hop between frame starts in samples.
    pub hop: usize,
    /// Transform length; frames are zero-padded up to this.
    pub fft_len: usize,
}

/// 25 ms Hann window, 10 ms hop: frames a padded 1 s snippet into exactly
/// [`SNIPPET_FRAMES`] columns.
pub const MEL_STFT: StftConfig = StftConfig {
    window_len: 400,
    hop: 160,
    fft_len: 512,
};

/// Chroma geometry. The 4096-point transform gives 3.9 Hz bins; a 512-point
/// one (31 Hz bins) cannot separate neighboring pitch classes below ~C4.
pub const CHROMA_STFT: StftConfig = StftConfig {
    window_len: 2048,
    hop: 160,
    fft_len: 4096,
};

/// Mel bands per snippet.
pub const MEL_BANDS: usize = 128;
/// STFT frames per snippet.
pub const SNIPPET_FRAMES: usize = 100;
/// Pitch classes in a chromagram, ordered C, C#, .., B.
pub const PITCH_CLASSES: usize = 12;
/// A 1 s snippet is zero-padded to this many samples before framing so it
/// yields exactly [`SNIPPET_FRAMES`] frames.
pub const SNIPPET_PADDED_SAMPLES: usize =
    MEL_STFT.window_len + (SNIPPET_FRAMES - 1) * MEL_STFT.hop;

/// One-sided complex STFT, `fft_len/2 + 1` bins per frame.
#[derive(Debug, Clone)]
pub struct Stft {
    pub num_bins: usize,
    pub num_frames: usize,
    /// Frequency step between bins in Hz.
    pub bin_hz: f64,
    data: Vec<Complex64>,
}

impl Stft {
    /// Complex value at (bin, frame).
    pub fn at(&self, bin: usize, frame: usize) -> Complex64 {
        self.data[frame * self.num_bins + bin]
    }

    /// Squared magnitude at (bin, frame).
    pub fn power(&self, bin: usize, frame: usize) -> f64 {
        self.at(bin, frame).norm_sqr()
    }
}

fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos())
        .collect()
}

/// Hann-windowed one-sided STFT of `samples` at `sample_rate`.
///
/// Frame `t` covers samples `[t*hop, t*hop + window_len)`; no padding is
/// applied at the signal edges, so input shorter than one window produces a
/// spectrogram with zero frames.
pub fn stft(samples: &[f32], sample_rate: u32, config: &StftConfig) -> Result<Stft> {
    if config.window_len == 0 || config.hop == 0 {
        return Err(Error::Config(
            "stft window_len and hop must be positive".into(),
        ));
    }
    if config.window_len > config.fft_len {
        return Err(Error::Config(format!(
            "stft window_len {} exceeds fft_len {}",
            config.window_len, config.fft_len
        )));
    }
    let num_bins = config.fft_len / 2 + 1;
    let num_frames = if samples.len() < config.window_len {
        0
    } else {
        (samples.len() - config.window_len) / config.hop + 1
    };
    let window = hann(config.window_len);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(config.fft_len);
    let mut data = Vec::with_capacity(num_bins * num_frames);
    let mut buf = vec![Complex64::default(); config.fft_len];
    for t in 0..num_frames {
        let offset = t * config.hop;
        for (i, slot) in buf.iter_mut().enumerate() {
            let s = if i < config.window_len {
                samples[offset + i] as f64 * window[i]
            } else {
                0.0
            };
            *slot = Complex64::new(s, 0.0);
        }
        fft.process(&mut buf);
        data.extend_from_slice(&buf[..num_bins]);
    }
    Ok(Stft {
        num_bins,
        num_frames,
        bin_hz: sample_rate as f64 / config.fft_len as f64,
        data,
    })
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Bank of triangular mel filters over one-sided FFT bins.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    pub num_bands: usize,
    pub num_bins: usize,
    /// Triangle peak frequency of each band in Hz, strictly increasing.
    pub centers_hz: Vec<f64>,
    weights: Vec<f64>,
}

impl MelFilterbank {
    /// Weight of `band` at FFT `bin`.
    pub fn weight(&self, band: usize, bin: usize) -> f64 {
        self.weights[band * self.num_bins + bin]
    }

    /// Projects one frame of per-bin power onto the bands.
    pub fn apply(&self, bin_power: &[f64]) -> Vec<f64> {
        assert_eq!(bin_power.len(), self.num_bins, "bin count mismatch");
        self.weights
            .chunks_exact(self.num_bins)
            .map(|row| row.iter().zip(bin_power).map(|(w, p)| w * p).sum())
            .collect()
    }

    /// The snippet filterbank: 128 bands over 0..8000 Hz at the [`MEL_STFT`]
    /// resolution.
    pub fn canonical() -> &'static MelFilterbank {
        static BANK: OnceLock<MelFilterbank> = OnceLock::new();
        BANK.get_or_init(|| {
            mel_filterbank(
                MEL_BANDS,
                MEL_STFT.fft_len,
                CANONICAL_SAMPLE_RATE,
                0.0,
                8000.0,
            )
            .expect("canonical filterbank config is valid")
        })
    }
}

/// Integral of the triangle with corners (l, 0), (c, 1), (r, 0) over [a, b].
fn triangle_integral(l: f64, c: f64, r: f64, a: f64, b: f64) -> f64 {
    let mut total = 0.0;
    let (x1, x2) = (a.max(l), b.min(c));
    if x2 > x1 {
        total += ((x2 - l).powi(2) - (x1 - l).powi(2)) / (2.0 * (c - l));
    }
    let (x1, x2) = (a.max(c), b.min(r));
    if x2 > x1 {
        total += ((r - x1).powi(2) - (r - x2).powi(2)) / (2.0 * (r - c));
    }
    total
}

/// Builds `num_bands` triangular filters with corners uniformly spaced on the
/// HTK mel scale `m = 2595 log10(1 + f/700)` between `f_min` and `f_max`.
///
/// Each weight is the triangle's mean over that bin's frequency cell rather
/// than a point sample at the bin center; filters narrower than a cell would
/// otherwise sample to all zeros at coarse FFT resolutions.
pub fn mel_filterbank(
    num_bands: usize,
    fft_len: usize,
    sample_rate: u32,
    f_min: f64,
    f_max: f64,
) -> Result<MelFilterbank> {
    let nyquist = sample_rate as f64 / 2.0;
    if num_bands == 0 {
        return Err(Error::Config("num_bands must be positive".into()));
    }
    if !(0.0..nyquist).contains(&f_min) || f_min >= f_max || f_max > nyquist {
        return Err(Error::Config(format!(
            "mel range [{f_min}, {f_max}] invalid for Nyquist {nyquist}"
        )));
    }
    let num_bins = fft_len / 2 + 1;
    if num_bands > num_bins {
        return Err(Error::Config(format!(
            "{num_bands} mel bands exceed the {num_bins} bins of a {fft_len}-point FFT"
        )));
    }

    let (mel_lo, mel_hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
    let step = (mel_hi - mel_lo) / (num_bands + 1) as f64;
    let corners_hz: Vec<f64> = (0..num_bands + 2)
        .map(|i| mel_to_hz(mel_lo + step * i as f64))
        .collect();

    let bin_hz = sample_rate as f64 / fft_len as f64;
    let mut weights = vec![0.0; num_bands * num_bins];
    for band in 0..num_bands {
        let (l, c, r) = (corners_hz[band], corners_hz[band + 1], corners_hz[band + 2]);
        for bin in 0..num_bins {
            let cell_lo = (bin as f64 - 0.5) * bin_hz;
            let cell_hi = (bin as f64 + 0.5) * bin_hz;
            let w = triangle_integral(l, c, r, cell_lo, cell_hi) / bin_hz;
            weights[band * num_bins + bin] = w.max(0.0);
        }
        if weights[band * num_bins..(band + 1) * num_bins]
            .iter()
            .all(|&w| w <= 0.0)
        {
            return Err(Error::Config(format!(
                "mel band {band} has no spectral support; reduce num_bands or raise fft_len"
            )));
        }
    }

    Ok(MelFilterbank {
        num_bands,
        num_bins,
        centers_hz: corners_hz[1..=num_bands].to_vec(),
        weights,
    })
}

/// Log-compressed mel spectrogram of one 1 s snippet.
#[derive(Debug, Clone)]
pub struct MelSnippet {
    /// Band-major values: `values[band * SNIPPET_FRAMES + frame]`,
    /// shape (128, 100), all entries finite and nonnegative.
    pub values: Vec<f32>,
    /// Snippet start within the source clip, in seconds.
    pub start_time: f64,
    /// `source_id` of the clip the snippet came from.
    pub clip_ref: String,
}

impl MelSnippet {
    pub fn at(&self, band: usize, frame: usize) -> f32 {
        self.values[band * SNIPPET_FRAMES + frame]
    }
}

/// The compression applied to mel power before the classifier sees it.
pub fn log_compress(x: f64) -> f64 {
    (1.0 + 10_000.0 * x).ln()
}

/// Extracts the log-compressed mel spectrogram for one snippet window.
///
/// The 16000-sample snippet is zero-padded to [`SNIPPET_PADDED_SAMPLES`] so
/// the 400/160 framing yields exactly 100 frames.
pub fn log_mel_snippet(clip: &AudioClip, window: &SnippetWindow) -> Result<MelSnippet> {
    if clip.sample_rate != CANONICAL_SAMPLE_RATE {
        return Err(Error::Config(format!(
            "snippets require {CANONICAL_SAMPLE_RATE} Hz input, got {} Hz; resample first",
            clip.sample_rate
        )));
    }
    if window.clip_ref != clip.source_id {
        return Err(Error::Dimension(format!(
            "window refers to clip '{}' but got '{}'",
            window.clip_ref, clip.source_id
        )));
    }
    if (window.duration - SNIPPET_SECONDS).abs() > 1e-9 {
        return Err(Error::Dimension(format!(
            "snippet windows are {SNIPPET_SECONDS} s, got {} s",
            window.duration
        )));
    }
    let sr = CANONICAL_SAMPLE_RATE as f64;
    let start = (window.start_time * sr).round() as usize;
    let want = (SNIPPET_SECONDS * sr).round() as usize;
    if start + want > clip.samples.len() {
        return Err(Error::Dimension(format!(
            "window [{}, {}) exceeds clip of {} samples",
            start,
            start + want,
            clip.samples.len()
        )));
    }

    let mut padded = vec![0f32; SNIPPET_PADDED_SAMPLES];
    padded[..want].copy_from_slice(&clip.samples[start..start + want]);
    let sg = stft(&padded, CANONICAL_SAMPLE_RATE, &MEL_STFT)?;
    if sg.num_frames != SNIPPET_FRAMES {
        return Err(Error::Internal(format!(
            "snippet framed into {} frames instead of {SNIPPET_FRAMES}",
            sg.num_frames
        )));
    }

    let bank = MelFilterbank::canonical();
    let mut values = vec![0f32; MEL_BANDS * SNIPPET_FRAMES];
    let mut bin_power = vec![0f64; sg.num_bins];
    for frame in 0..SNIPPET_FRAMES {
        for (bin, p) in bin_power.iter_mut().enumerate() {
            *p = sg.power(bin, frame);
        }
        for (band, energy) in bank.apply(&bin_power).into_iter().enumerate() {
            values[band * SNIPPET_FRAMES + frame] = log_compress(energy) as f32;
        }
    }

    Ok(MelSnippet {
        values,
        start_time: window.start_time,
        clip_ref: window.clip_ref.clone(),
    })
}

/// Pitch class of a frequency: 0 = C, .., 9 = A (440 Hz), 11 = B.
pub fn pitch_class(freq_hz: f64) -> usize {
    assert!(freq_hz > 0.0, "pitch class needs a positive frequency");
    let midi = (12.0 * (freq_hz / 440.0).log2()).round() as i64 + 69;
    midi.rem_euclid(12) as usize
}

/// Chroma magnitudes: 12 pitch classes by STFT frames, columns L1-normalized.
#[derive(Debug, Clone)]
pub struct ChromaGram {
    pub num_frames: usize,
    /// Seconds between adjacent frames.
    pub frame_hop: f64,
    /// Class-major values: `values[class * num_frames + frame]`.
    values: Vec<f64>,
}

impl ChromaGram {
    pub fn at(&self, class: usize, frame: usize) -> f64 {
        self.values[class * self.num_frames + frame]
    }

    /// One frame's distribution over the 12 classes.
    pub fn column(&self, frame: usize) -> [f64; PITCH_CLASSES] {
        std::array::from_fn(|class| self.at(class, frame))
    }

    /// Mean of columns `lo..hi`, not renormalized.
    pub fn mean_column(&self, lo: usize, hi: usize) -> [f64; PITCH_CLASSES] {
        assert!(lo < hi && hi <= self.num_frames, "bad frame range");
        let mut mean = [0.0; PITCH_CLASSES];
        for frame in lo..hi {
            for (m, class) in mean.iter_mut().zip(0..PITCH_CLASSES) {
                *m += self.at(class, frame);
            }
        }
        for m in &mut mean {
            *m /= (hi - lo) as f64;
        }
        mean
    }
}

/// Audible band folded into pitch classes; bins outside carry rumble or
/// aliasing rather than pitch.
const CHROMA_BAND_HZ: (f64, f64) = (27.5, 4186.0);

/// Computes the chromagram of `[start, start + duration)` seconds of a clip.
///
/// Each STFT bin's magnitude is folded onto `pitch_class(bin frequency)`,
/// then every column with energy is L1-normalized; silent columns stay
/// all-zero. A span shorter than one chroma window yields zero frames.
pub fn chroma(clip: &AudioClip, start: f64, duration: f64) -> Result<ChromaGram> {
    if clip.sample_rate != CANONICAL_SAMPLE_RATE {
        return Err(Error::Config(format!(
            "chroma requires {CANONICAL_SAMPLE_RATE} Hz input, got {} Hz; resample first",
            clip.sample_rate
        )));
    }
    if duration <= 0.0 {
        return Err(Error::Config("chroma duration must be positive".into()));
    }
    let sr = CANONICAL_SAMPLE_RATE as f64;
    let lo = (start * sr).round() as i64;
    let hi = ((start + duration) * sr).round() as i64;
    if lo < 0 || hi > clip.samples.len() as i64 {
        return Err(Error::Dimension(format!(
            "chroma span [{start}, {}) s outside clip of {} s",
            start + duration,
            clip.seconds()
        )));
    }

    let sg = stft(
        &clip.samples[lo as usize..hi as usize],
        CANONICAL_SAMPLE_RATE,
        &CHROMA_STFT,
    )?;
    let classes: Vec<Option<usize>> = (0..sg.num_bins)
        .map(|bin| {
            let hz = bin as f64 * sg.bin_hz;
            (hz >= CHROMA_BAND_HZ.0 && hz <= CHROMA_BAND_HZ.1).then(|| pitch_class(hz))
        })
        .collect();

    let num_frames = sg.num_frames;
    let mut values = vec![0f64; PITCH_CLASSES * num_frames];
    for frame in 0..num_frames {
        let mut column = [0f64; PITCH_CLASSES];
        for (bin, class) in classes.iter().enumerate() {
            if let Some(class) = class {
                column[*class] += sg.at(bin, frame).norm();
            }
        }
        let total: f64 = column.iter().sum();
        if total > 1e-12 {
            for (class, v) in column.iter().enumerate() {
                values[class * num_frames + frame] = v / total;
            }
        }
    }

    Ok(ChromaGram {
        num_frames,
        frame_hop: CHROMA_STFT.hop as f64 / sr,
        values,
    })
}
